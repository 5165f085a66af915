import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from conjulab.core.exceptions import IncompatibleVectorsError
from conjulab.model.vectorspace import (
    DenseVector, SpaceFamily, SparseVector, linear_combine, sup_norm, support, vector_from_json
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


class TestDenseVector:

    def test_arithmetic(self):
        x = DenseVector([1.0, -2.0])
        y = DenseVector([0.5, 4.0])
        assert (x + y).to_json() == [1.5, 2.0]
        assert (x - y).to_json() == [0.5, -6.0]
        assert (-x).to_json() == [-1.0, 2.0]
        assert (2.0 * x).to_json() == [2.0, -4.0]

    def test_sup_norm_and_support(self):
        x = DenseVector([0.0, -3.0, 2.0])
        assert sup_norm(x) == 3.0
        assert support(x) == frozenset({1, 2})
        assert DenseVector.zeros(3).is_zero()

    def test_values_are_read_only(self):
        x = DenseVector([1.0, 2.0])
        with pytest.raises(ValueError):
            x.values[0] = 5.0

    def test_equal_vectors_share_key(self):
        assert DenseVector([1, 2]) == DenseVector([1.0, 2.0])
        assert hash(DenseVector([1, 2])) == hash(DenseVector([1.0, 2.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(IncompatibleVectorsError):
            DenseVector([1.0]) + DenseVector([1.0, 2.0])


class TestSparseVector:

    def test_explicit_zeros_are_dropped(self):
        x = SparseVector({0: 1.0, 3: 0.0})
        assert x.support() == frozenset({0})
        assert (x - SparseVector.basis(0)).is_zero()

    def test_empty_vector_has_zero_norm(self):
        assert SparseVector.zero_vector().sup_norm() == 0.0

    def test_coordinates(self):
        x = SparseVector({-2: 1.5, 4: -0.25})
        assert x.coordinate(-2) == 1.5
        assert x.coordinate(7) == 0.0

    def test_mixing_families_is_rejected(self):
        with pytest.raises(IncompatibleVectorsError):
            linear_combine(1.0, DenseVector([1.0]), 1.0, SparseVector({0: 1.0}))


class TestJson:

    def test_sparse_keys_are_strings(self):
        x = SparseVector({-1: 2.0, 3: 1.0})
        assert x.to_json() == {"-1": 2.0, "3": 1.0}
        assert vector_from_json(x.to_json(), SpaceFamily.SPARSE) == x

    def test_dense_dimension_is_checked(self):
        with pytest.raises(IncompatibleVectorsError):
            vector_from_json([1.0, 2.0], SpaceFamily.DENSE, dimension=3)

    def test_wrong_shape_for_family(self):
        with pytest.raises(IncompatibleVectorsError):
            vector_from_json({"0": 1.0}, SpaceFamily.DENSE)
        with pytest.raises(IncompatibleVectorsError):
            vector_from_json([1.0], SpaceFamily.SPARSE)


class TestProperties:

    @given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3), finite, finite)
    @hyp_settings(max_examples=200, deadline=None)
    def test_linear_combine_matches_numpy(self, xs, ys, alpha, beta):
        result = linear_combine(alpha, DenseVector(xs), beta, DenseVector(ys))
        expected = alpha * np.array(xs) + beta * np.array(ys)
        np.testing.assert_allclose(result.values, expected, rtol=1e-12, atol=1e-12)

    @given(st.dictionaries(st.integers(-20, 20), finite, max_size=8),
           st.dictionaries(st.integers(-20, 20), finite, max_size=8))
    @hyp_settings(max_examples=200, deadline=None)
    def test_sup_norm_triangle_inequality(self, a, b):
        x, y = SparseVector(a), SparseVector(b)
        assert (x + y).sup_norm() <= (x.sup_norm() + y.sup_norm()) * (1 + 1e-12)
