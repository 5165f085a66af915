import math

import numpy as np
import pytest

from conjulab.core.exceptions import (
    ConfigurationError, NotHyperbolicError, NotInvertibleError
)
from conjulab.model.operators import (
    BlockOperator, DiagonalOperator, WeightedShift, certify_constants, correspondence_lip_constant,
    epsilon_threshold, franks_constant, gelfand_estimate, make_block_operator, make_diagonal_operator
)
from conjulab.model.vectorspace import DenseVector, SparseVector


class TestDiagonalOperator:

    def test_unit_weight_is_rejected(self):
        with pytest.raises(NotHyperbolicError, match="not hyperbolic on coordinate 0"):
            make_diagonal_operator([1.0, 2.0])

    def test_zero_weight_is_rejected(self):
        with pytest.raises(NotInvertibleError):
            DiagonalOperator([0.0, 2.0])

    def test_apply_and_projections(self, diag_op):
        x = DenseVector([4.0, 3.0])
        assert diag_op.apply(x).to_json() == [2.0, 6.0]
        assert diag_op.apply_inverse(x).to_json() == [8.0, 1.5]
        assert diag_op.proj_M(x).to_json() == [4.0, 0.0]
        assert diag_op.proj_N(x).to_json() == [0.0, 3.0]
        assert diag_op.power(x, -2).to_json() == [16.0, 0.75]

    def test_hyperbolic_and_every_vector_in_Y(self, diag_op):
        assert diag_op.is_hyperbolic
        assert diag_op.in_Y(DenseVector([1.0, 1.0]))


class TestCertificate:

    def test_diagonal_constants(self, diag_cert):
        assert diag_cert.a == 1.0
        assert diag_cert.t == 0.5
        assert diag_cert.b == 1.0
        assert diag_cert.inv_norm == 2.0
        assert diag_cert.n0 == 1
        assert diag_cert.op_norm == 2.0

    def test_auto_rate_sits_above_gelfand_estimate(self, diag_op):
        assert gelfand_estimate(diag_op, 200) == pytest.approx(0.5)
        cert = certify_constants(diag_op, "auto")
        assert cert.t == pytest.approx(0.55)

    def test_derived_thresholds(self, diag_cert):
        assert epsilon_threshold(diag_cert, 0.5) == pytest.approx(1.0 / 6.0)
        assert franks_constant(diag_cert) == pytest.approx(3.0)
        assert correspondence_lip_constant(diag_cert, 0.5) == pytest.approx(12.0)

    def test_shift_has_the_same_constants(self, shift_cert):
        assert (shift_cert.a, shift_cert.t, shift_cert.b, shift_cert.inv_norm) == (1.0, 0.5, 1.0, 2.0)
        assert epsilon_threshold(shift_cert, 0.5) == pytest.approx(1.0 / 6.0)

    def test_delta_outside_unit_interval(self, diag_cert):
        with pytest.raises(ConfigurationError):
            epsilon_threshold(diag_cert, 1.0)
        with pytest.raises(ConfigurationError):
            correspondence_lip_constant(diag_cert, 0.0)

    def test_rate_outside_unit_interval(self, diag_op):
        with pytest.raises(ConfigurationError):
            certify_constants(diag_op, 1.5)

    def test_expanding_stable_block_fails_certification(self):
        op = make_block_operator([[1.0, 0.0], [0.0, 1.0]], [[1.5]], [[2.0]])
        with pytest.raises(NotHyperbolicError, match="not certifiably"):
            certify_constants(op)

    def test_rate_too_small_fails_certification(self, diag_op):
        with pytest.raises(NotHyperbolicError):
            certify_constants(diag_op, 0.1, horizon=20)


class TestBlockOperator:

    def test_nilpotent_stable_block(self, nilpotent_block):
        cert = certify_constants(nilpotent_block, 0.5)
        assert cert.n0 == 2
        assert cert.a == pytest.approx(1.8)
        assert math.isinf(cert.inv_norm)
        assert not nilpotent_block.is_invertible
        with pytest.raises(NotInvertibleError):
            nilpotent_block.apply_inverse(DenseVector([1.0, 0.0, 0.0]))

    def test_singular_unstable_block(self):
        with pytest.raises(NotHyperbolicError):
            make_block_operator([[1.0, 0.0], [0.0, 1.0]], [[0.5]], [[0.0]])

    def test_singular_basis_change(self):
        with pytest.raises(NotInvertibleError):
            make_block_operator([[1.0, 1.0], [1.0, 1.0]], [[0.5]], [[2.0]])

    def test_oblique_splitting(self):
        op = make_block_operator([[1.0, 1.0], [0.0, 1.0]], [[0.5]], [[2.0]])
        np.testing.assert_allclose(op.matrix, [[0.5, 1.5], [0.0, 2.0]])
        x = DenseVector([3.0, -1.0])

        back = op.apply_inverse(op.apply(x))
        np.testing.assert_allclose(back.values, x.values, atol=1e-12)
        np.testing.assert_allclose((op.proj_M(x) + op.proj_N(x)).values, x.values, atol=1e-12)
        np.testing.assert_allclose(op.proj_M(op.apply(x)).values, op.apply(op.proj_M(x)).values, atol=1e-12)

        cert = certify_constants(op, 0.5)
        assert cert.b == pytest.approx(2.0)


def random_unit_pair(op, rng):
    """A sup-norm unit y in M and z in N."""
    if isinstance(op, WeightedShift):
        y = SparseVector({k: rng.normal() for k in range(op.m0, op.m0 + 8)})
        z = SparseVector({k: rng.normal() for k in range(op.m0 - 8, op.m0)})
    else:
        v = DenseVector(rng.normal(size=op.dimension))
        y, z = op.proj_M(v), op.proj_N(v)
    return y.scaled(1.0 / y.sup_norm()), z.scaled(1.0 / z.sup_norm())


def backward_on_N(op, z, n):
    """T^-n z for z in N, through the unstable block alone when T itself is not invertible."""
    if isinstance(op, BlockOperator):
        k = op.A_M.shape[0]
        coords = np.linalg.solve(np.linalg.matrix_power(op.A_N, n), (op.P_inv @ z.values)[k:])
        return DenseVector(op.P[:, k:] @ coords)
    return op.power(z, -n)


class TestDecayBound:

    @pytest.mark.parametrize("op_name", ["diag_op", "nilpotent_block", "shift_op"])
    def test_random_unit_vectors_decay(self, request, op_name):
        op = request.getfixturevalue(op_name)
        cert = certify_constants(op, 0.5)
        rng = np.random.default_rng(17)
        for _ in range(200):
            y, z = random_unit_pair(op, rng)
            for n in range(2 * cert.n0 + 1):
                limit = cert.a * cert.t ** n * (1.0 + 1e-12)
                assert op.power(y, n).sup_norm() <= limit
                assert backward_on_N(op, z, n).sup_norm() <= limit

    def test_forward_images_of_M_stay_in_M(self, nilpotent_block):
        rng = np.random.default_rng(4)
        y, _ = random_unit_pair(nilpotent_block, rng)
        assert nilpotent_block.proj_N(nilpotent_block.apply(y)).sup_norm() <= 1e-12


class TestWeightedShift:

    def test_action(self, shift_op):
        x = SparseVector({-1: 1.0, 1: 1.0})
        # w_0 = 2 (index <= m0), w_2 = 1/2
        assert shift_op.apply(x) == SparseVector({0: 2.0, 2: 0.5})
        assert shift_op.apply_inverse(shift_op.apply(x)) == x

    def test_not_hyperbolic(self, shift_op):
        assert not shift_op.is_hyperbolic
        assert shift_op.restricted_power_norms(3) == (0.125, 0.125)

    def test_membership_in_Y(self, shift_op):
        assert shift_op.in_Y(SparseVector.basis(0))
        assert shift_op.in_Y(SparseVector.basis(-2))
        assert not shift_op.in_Y(SparseVector.basis(-1))

    def test_weights_must_split(self):
        from conjulab.model.operators import make_weighted_shift
        with pytest.raises(NotHyperbolicError):
            make_weighted_shift(0.5, 0.5, 0)
        with pytest.raises(NotHyperbolicError):
            make_weighted_shift(2.0, 1.0, 0)
