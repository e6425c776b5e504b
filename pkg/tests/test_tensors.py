import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpfft import tensors as T

from conftest import mandel, sym3


def test_deviator_of_identity_is_zero():
    np.testing.assert_array_equal(T.deviator(T.identity2()), np.zeros(6))


def test_deviator_uniaxial():
    s = 3.0
    np.testing.assert_allclose(T.deviator([s, 0, 0, 0, 0, 0]), [2.0, -1.0, -1.0, 0, 0, 0], atol=1e-15)


def test_deviator_matches_3x3_arithmetic(rng):
    a = rng.normal(size=(3, 3))
    a = a + a.T
    ref = a - np.trace(a) * np.eye(3) / 3.0
    np.testing.assert_allclose(T.to_matrix(T.deviator(T.from_matrix(a))), ref, atol=1e-14)


def test_equivalent_stress_cases():
    assert T.equivalent_stress(np.zeros(6)) == 0.0
    assert T.equivalent_stress([5.0, 0, 0, 0, 0, 0]) == pytest.approx(5.0, rel=1e-15)
    tau = 2.0
    shear = T.from_matrix([[0, tau, 0], [tau, 0, 0], [0, 0, 0]])
    assert T.equivalent_stress(shear) == pytest.approx(np.sqrt(3.0) * tau, rel=1e-14)


def test_equivalent_strain_cases():
    assert T.equivalent_strain(np.zeros(6)) == 0.0
    e = 0.05
    load = e * np.sqrt(3.0) / 2.0 * np.array([1.0, -1.0, 0, 0, 0, 0])
    assert T.equivalent_strain(load) == pytest.approx(0.05, rel=1e-14)
    assert T.equivalent_strain([e, -e / 2, -e / 2, 0, 0, 0]) == pytest.approx(e, rel=1e-14)


def test_standard_tensors():
    Id = T.StandardTensors.Id
    np.testing.assert_array_equal(Id, T.StandardTensors.Is - T.StandardTensors.II / 3.0)
    np.testing.assert_allclose(Id @ Id, Id, atol=1e-15)
    np.testing.assert_allclose(Id @ T.StandardTensors.I, 0.0, atol=1e-15)


def test_invert4_simple():
    np.testing.assert_allclose(T.invert4(np.eye(6)), np.eye(6))
    np.testing.assert_allclose(T.invert4(2.0 * np.eye(6)), 0.5 * np.eye(6))


def test_invert4_singular():
    with pytest.raises(T.SingularTensorError):
        T.invert4(T.StandardTensors.Id)


def test_in_plane_slots():
    assert [T.MANDEL_INDEX[i] for i in T.IN_PLANE] == [(0, 0), (1, 1), (0, 1)]


@given(sym3)
def test_round_trip(a):
    np.testing.assert_allclose(T.to_matrix(T.from_matrix(a)), a, atol=1e-15)


@given(sym3, sym3)
def test_contraction_matches_component_sum(a, b):
    ref = np.sum(a * b)
    assert T.ddot(T.from_matrix(a), T.from_matrix(b)) == pytest.approx(ref, rel=1e-14, abs=1e-14)


@given(mandel)
def test_projector_gives_deviator(a):
    np.testing.assert_allclose(T.ddot42(T.StandardTensors.Id, a), T.deviator(a), atol=1e-15)
    assert abs(T.trace(T.deviator(a))) <= 1e-14 * max(1.0, np.abs(a).max())


@given(mandel, st.floats(-10, 10, allow_nan=False))
def test_equivalent_stress_homogeneous(s, c):
    assert T.equivalent_stress(c * s) == pytest.approx(abs(c) * T.equivalent_stress(s), rel=1e-12, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_invert4_involution(seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(6, 6))
    t = a @ a.T + 6.0 * np.eye(6)
    np.testing.assert_allclose(T.invert4(t) @ t, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(T.invert4(T.invert4(t)), t, rtol=1e-9, atol=1e-9 * np.abs(t).max())
