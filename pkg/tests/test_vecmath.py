import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxva_lab.vecmath import DimensionError, as_vector, ewise_map2, mean_abs, norm_l1, norm_sq


def test_ewise_map2_with_ufunc():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([10.0, 20.0, 30.0])
    assert np.array_equal(ewise_map2(a, b, np.add), [11.0, 22.0, 33.0])
    assert np.array_equal(ewise_map2(a, b, np.multiply), [10.0, 40.0, 90.0])


def test_ewise_map2_with_python_callable():
    a = np.array([1.0, 4.0])
    b = np.array([2.0, 0.5])
    out = ewise_map2(a, b, lambda x, y: x**y)
    assert np.allclose(out, [1.0, 2.0])


def test_ewise_map2_length_mismatch():
    with pytest.raises(DimensionError):
        ewise_map2(np.zeros(3), np.zeros(4), np.add)


def test_reductions_frozen_values():
    assert norm_sq(np.array([3.0, 4.0])) == 25.0
    assert norm_l1(np.array([-1.0, 2.0])) == 3.0
    assert mean_abs(np.array([-2.0, 4.0])) == 3.0


def test_as_vector_validation():
    vec = as_vector([1, 2, 3])
    assert vec.dtype == np.float64
    with pytest.raises(DimensionError):
        as_vector(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        as_vector([])
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])
    # opting out of the finiteness check is allowed at the boundary
    assert not np.isfinite(as_vector([1.0, np.inf], check_finite=False)).all()


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.randoms())
def test_reductions_permutation_invariant(values, rnd):
    a = np.array(values)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    b = np.array(shuffled)
    assert norm_sq(a) == pytest.approx(norm_sq(b), rel=1e-12, abs=1e-12)
    assert norm_l1(a) == pytest.approx(norm_l1(b), rel=1e-12, abs=1e-12)
    assert mean_abs(a) == pytest.approx(mean_abs(b), rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=10))
def test_norm_sq_matches_l2_definition(values):
    a = np.array(values)
    assert norm_sq(a) == pytest.approx(float(np.sum(a * a)), rel=1e-12, abs=1e-12)
