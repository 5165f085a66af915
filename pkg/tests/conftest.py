"""
Shared fixtures: the closed-form operators with certificates at t = 0.5.
"""

import pytest

from conjulab.model.operators import (
    certify_constants, make_block_operator, make_diagonal_operator, make_weighted_shift
)
from conjulab.model.perturbations import ConstantMap, PerturbationTuple, SineMap
from conjulab.model.vectorspace import DenseVector, SpaceFamily, SparseVector


@pytest.fixture
def diag_op():
    return make_diagonal_operator([0.5, 2.0])


@pytest.fixture
def diag_cert(diag_op):
    return certify_constants(diag_op, 0.5)


@pytest.fixture
def scalar_op():
    return make_diagonal_operator([2.0])


@pytest.fixture
def scalar_cert(scalar_op):
    return certify_constants(scalar_op, 0.5)


@pytest.fixture
def shift_op():
    return make_weighted_shift(2.0, 0.5, 0)


@pytest.fixture
def shift_cert(shift_op):
    return certify_constants(shift_op, 0.5)


@pytest.fixture
def nilpotent_block():
    return make_block_operator(
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        [[0.0, 0.9], [0.0, 0.0]],
        [[3.0]],
    )


@pytest.fixture
def diag_constant_tuple():
    """L = (0.1, 0.1) on diag(1/2, 2); h = I + (0.2, -0.1)."""
    return PerturbationTuple([ConstantMap(DenseVector([0.1, 0.1]))])


@pytest.fixture
def scalar_periodic_tuple():
    """T = 2, p = 2, L_0 = 0.3, L_1 = 0; u_0 = -0.2, u_1 = -0.1."""
    return PerturbationTuple([ConstantMap(DenseVector([0.3])), ConstantMap(DenseVector([0.0]))])


@pytest.fixture
def scalar_sine_tuple():
    """L(x) = 0.1 sin(x) on the scalar operator."""
    return PerturbationTuple([SineMap(SpaceFamily.DENSE, 0, 0.1, 1.0, dimension=1)])


@pytest.fixture
def shift_zero_tuple():
    return PerturbationTuple([ConstantMap(SparseVector.zero_vector())])


@pytest.fixture
def dense_points():
    return [
        DenseVector([0.0, 0.0]),
        DenseVector([1.0, -1.0]),
        DenseVector([-3.5, 2.25]),
        DenseVector([7.0, 0.125]),
        DenseVector([-9.5, -6.0]),
    ]
