import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from conjulab.core.exceptions import AdmissibilityError, ConfigurationError, IncompatibleVectorsError
from conjulab.model.perturbations import (
    AdmissibilityMode, ClampLinearMap, ComposeMap, ConstantMap, PerturbationTuple, ScaleMap, SineMap,
    SumMap, build_lipmap, invert_perturbed, tuple_distance, zero_map
)
from conjulab.model.vectorspace import DenseVector, SpaceFamily, SparseVector

DENSE = SpaceFamily.DENSE


def const(*values):
    return ConstantMap(DenseVector(values))


class TestPrimitives:

    def test_sine_bounds(self):
        f = SineMap(DENSE, 0, 0.1, 1.0, dimension=1)
        assert f.sup_bound == pytest.approx(0.1)
        assert f.lip_bound == pytest.approx(0.1)
        assert f(DenseVector([math.pi / 2])).to_json() == [pytest.approx(0.1)]

    def test_sine_writes_target_only(self):
        f = SineMap(DENSE, 0, 1.0, 1.0, target=1, dimension=2)
        assert f(DenseVector([math.pi / 2, 5.0])).to_json() == [0.0, pytest.approx(1.0)]

    def test_sine_coordinate_range(self):
        with pytest.raises(ConfigurationError):
            SineMap(DENSE, 3, 0.1, 1.0, dimension=2)

    def test_clamp_linear(self):
        f = ClampLinearMap(DENSE, [[0.5, 0.5], [0.0, 0.25]], 2.0, dimension=2)
        assert f.lip_bound == pytest.approx(1.0)
        assert f.sup_bound == pytest.approx(2.0)
        assert f(DenseVector([10.0, -1.0])).to_json() == [pytest.approx(0.5), pytest.approx(-0.25)]

    def test_sparse_clamp_needs_window(self):
        with pytest.raises(ConfigurationError):
            ClampLinearMap(SpaceFamily.SPARSE, [[0.5]], 1.0)
        f = ClampLinearMap(SpaceFamily.SPARSE, [[0.5]], 1.0, window=[3])
        assert f(SparseVector({3: 4.0})) == SparseVector({3: 0.5})

    def test_compose_bounds(self):
        f = ComposeMap(SineMap(DENSE, 0, 0.1, 2.0, dimension=1), SineMap(DENSE, 0, 0.5, 1.0, dimension=1))
        assert f.sup_bound == pytest.approx(0.1)
        assert f.lip_bound == pytest.approx(0.2 * 1.5)


def bounded_maps():
    sine = SineMap(DENSE, 1, 0.3, 2.0, target=0, dimension=2)
    clamp = ClampLinearMap(DENSE, [[0.5, -0.5], [0.25, 0.0]], 1.5, dimension=2)
    return {
        "const": const(0.2, -0.7),
        "sine": sine,
        "clamp_linear": clamp,
        "sum": SumMap([sine, clamp, const(0.1, 0.1)]),
        "scale": ScaleMap(-0.4, clamp),
        "compose": ComposeMap(sine, clamp),
        "nested": ComposeMap(ScaleMap(0.5, SumMap([sine, clamp])), SineMap(DENSE, 0, 0.8, 1.5, dimension=2)),
    }


class TestBoundDominance:

    @pytest.mark.slow
    @pytest.mark.parametrize("name", list(bounded_maps()))
    def test_sampled_differences_respect_bounds(self, name):
        f = bounded_maps()[name]
        rng = np.random.default_rng(2024)
        xs = rng.uniform(-20.0, 20.0, size=(10_000, 2))
        # even rows pair far points, odd rows near ones
        offsets = rng.normal(size=(10_000, 2)) * np.where(np.arange(10_000) % 2 == 0, 10.0, 1e-2)[:, None]
        for x_row, offset in zip(xs, offsets):
            x, y = DenseVector(x_row), DenseVector(x_row + offset)
            fx, fy = f(x), f(y)
            assert fx.sup_norm() <= f.sup_bound * (1.0 + 1e-12)
            assert (fx - fy).sup_norm() <= f.lip_bound * (x - y).sup_norm() * (1.0 + 1e-9) + 1e-15


class TestDescriptors:

    def test_nested_tree(self):
        descriptor = {
            "kind": "sum",
            "args": [
                {"kind": "const", "c": [0.1, 0.0]},
                {"kind": "scale", "alpha": 2.0, "arg": {"kind": "sine", "i": 1, "A": 0.05, "w": 1.0, "target": 0}},
            ],
        }
        f = build_lipmap(descriptor, DENSE, 2)
        x = DenseVector([0.0, math.pi / 2])
        assert f(x).to_json() == [pytest.approx(0.2), 0.0]
        assert f.sup_bound == pytest.approx(0.2)
        assert f.lip_bound == pytest.approx(0.1)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            build_lipmap({"kind": "cosine"}, DENSE, 1)

    def test_missing_parameter(self):
        with pytest.raises(ConfigurationError, match="missing parameter"):
            build_lipmap({"kind": "sine", "i": 0, "A": 0.1}, DENSE, 1)

    def test_compose_needs_two_maps(self):
        with pytest.raises(ConfigurationError):
            build_lipmap({"kind": "compose", "args": [{"kind": "const", "c": [0.0]}]}, DENSE, 1)


class TestPerturbationTuple:

    def test_indexing_wraps(self):
        tuple_ = PerturbationTuple([const(0.3), const(0.0)])
        assert tuple_.p == 2
        assert tuple_[2] is tuple_[0]
        assert tuple_[-1] is tuple_[1]

    def test_admissibility_modes(self):
        eps = 1.0 / 6.0
        assert PerturbationTuple([const(0.1, 0.1)]).admissibility(eps) == AdmissibilityMode.B
        assert PerturbationTuple([const(0.2, 0.0)]).admissibility(eps) == AdmissibilityMode.A
        steep = PerturbationTuple([SineMap(DENSE, 0, 0.2, 1.0, dimension=2)])
        assert steep.admissibility(eps) is None
        with pytest.raises(AdmissibilityError, match="admissibility"):
            steep.check_admissible(eps)

    def test_mode_B_request_rejects_large_sup(self):
        with pytest.raises(AdmissibilityError):
            PerturbationTuple([const(0.2, 0.0)]).check_admissible(1.0 / 6.0, AdmissibilityMode.B)

    def test_zero_tuple_always_admissible(self):
        tuple_ = PerturbationTuple([zero_map(DENSE, 3)])
        assert tuple_.is_zero()
        assert tuple_.check_admissible(0.0, AdmissibilityMode.B) == AdmissibilityMode.B

    def test_repeat_and_scale(self):
        tuple_ = PerturbationTuple.repeat(const(0.1), 5).scaled(0.5)
        assert tuple_.p == 5
        assert tuple_.max_sup == pytest.approx(0.05)

    def test_families_must_agree(self):
        with pytest.raises(IncompatibleVectorsError):
            PerturbationTuple([const(0.1), ConstantMap(SparseVector({0: 0.1}))])


class TestDistance:

    def test_constant_pair_is_structural(self):
        first = PerturbationTuple([const(0.1, 0.1)])
        second = PerturbationTuple([const(0.05, 0.1)])
        estimate = tuple_distance(first, second, [DenseVector([0.0, 0.0])])
        assert estimate.upper == pytest.approx(0.05)
        assert estimate.lower == pytest.approx(0.05)
        assert not estimate.sampled

    def test_mixed_shapes_fall_back_to_triangle_bound(self):
        first = PerturbationTuple([const(0.1)])
        second = PerturbationTuple([SineMap(DENSE, 0, 0.2, 1.0, dimension=1)])
        estimate = tuple_distance(first, second, [DenseVector([0.0])])
        assert estimate.sampled
        assert estimate.upper == pytest.approx(0.3)
        assert estimate.lower == pytest.approx(0.1)

    def test_lengths_must_agree(self):
        with pytest.raises(ConfigurationError):
            tuple_distance(PerturbationTuple([const(0.1)]), PerturbationTuple([const(0.1), const(0.1)]))


class TestInvertPerturbed:

    def test_constant_perturbation(self, scalar_op):
        x = invert_perturbed(scalar_op, const(0.3), DenseVector([1.3]), 1e-12)
        assert x.to_json() == [pytest.approx(0.5, abs=1e-12)]

    def test_matches_bisection_oracle(self, scalar_op):
        f = SineMap(DENSE, 0, 0.4, 1.0, dimension=1)
        x = invert_perturbed(scalar_op, f, DenseVector([1.0]), 1e-12)
        expected = brentq(lambda s: 2.0 * s + 0.4 * math.sin(s) - 1.0, -10.0, 10.0, xtol=1e-15)
        assert x.coordinate(0) == pytest.approx(expected, abs=1e-10)

    def test_steep_perturbation_is_refused(self, scalar_op):
        f = SineMap(DENSE, 0, 4.0, 1.0, dimension=1)
        with pytest.raises(AdmissibilityError, match="perturbed map not certifiably invertible"):
            invert_perturbed(scalar_op, f, DenseVector([1.0]), 1e-12)

    @given(st.floats(-5.0, 5.0), st.floats(0.0, 1.5), st.floats(0.1, 3.0))
    @hyp_settings(max_examples=100, deadline=None)
    def test_residual_within_tolerance(self, y, amplitude, frequency):
        from conjulab.model.operators import make_diagonal_operator
        op = make_diagonal_operator([2.0])
        f = SineMap(DENSE, 0, amplitude / frequency, frequency, dimension=1)
        target = DenseVector([y])
        x = invert_perturbed(op, f, target, 1e-10)
        residual = (op.apply(x) + f(x) - target).sup_norm()
        assert residual <= 1e-9
