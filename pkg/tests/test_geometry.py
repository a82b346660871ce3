import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_difference
from evasense import (
    SPEED_OF_LIGHT,
    ApGeometry,
    TargetTruth,
    ZeroRange,
    angle_jacobian,
    candidate_delay,
    candidate_virtual_angle,
    delay_jacobian,
    global_virtual_angle,
    local_angle_jacobian,
    local_unit_direction,
    rotation_matrix,
    to_local,
    wrap_angle,
)


def make_ap(x=0.0, y=0.0, kappa=0.0, count=4):
    return ApGeometry(position=np.array([x, y]), kappa=kappa,
                      antenna_count=count, antenna_spacing=0.03)


@given(st.floats(min_value=-50.0, max_value=50.0))
def test_wrap_angle_lands_in_half_open_interval(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi


@given(st.floats(min_value=-6.0, max_value=6.0), st.integers(-5, 5))
def test_wrap_angle_periodic(theta, k):
    a = wrap_angle(theta)
    b = wrap_angle(theta + 2.0 * math.pi * k)
    assert abs(a - b) < 1e-9


def test_wrap_angle_boundary():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3.0 * math.pi / 2.0) == pytest.approx(-math.pi / 2.0)


@given(st.floats(min_value=-math.pi, max_value=math.pi))
@settings(max_examples=100)
def test_rotation_matrix_orthonormal(kappa):
    r = rotation_matrix(kappa)
    assert np.allclose(r.T @ r, np.eye(2), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)


def test_rotation_matrix_quarter_turn():
    r = rotation_matrix(math.pi / 2.0)
    # global x maps onto local -y, global y onto local x
    assert np.allclose(r @ np.array([1.0, 0.0]), [0.0, -1.0], atol=1e-12)
    assert np.allclose(r @ np.array([0.0, 1.0]), [1.0, 0.0], atol=1e-12)


def test_to_local_matches_rotation():
    ap = make_ap(3.0, -2.0, kappa=0.7)
    p = np.array([10.0, 5.0])
    expected = rotation_matrix(0.7) @ (p - ap.position)
    assert np.allclose(to_local(p, ap), expected, atol=1e-12)


def test_candidate_delay_round_trip_scaling():
    ap = make_ap()
    tau = candidate_delay(np.array([90.0, 120.0]), ap)  # range 150 m
    assert tau == pytest.approx(2.0 * 150.0 / SPEED_OF_LIGHT, rel=1e-15)
    # exact speed of light puts this just above the nominal microsecond
    assert tau == pytest.approx(1.000692e-6, rel=1e-5)


def test_candidate_delay_reference_ap():
    ap = make_ap(500.0, 0.0)
    tau = candidate_delay(np.array([40.0, 30.0]), ap)
    assert tau == pytest.approx(2.0 * math.hypot(460.0, 30.0) / SPEED_OF_LIGHT,
                                rel=1e-15)


def test_candidate_delay_ignores_orientation():
    rng = np.random.default_rng(3)
    p = np.array([25.0, -40.0])
    base = candidate_delay(p, make_ap(kappa=0.0))
    for kappa in rng.uniform(-math.pi, math.pi, size=10):
        assert candidate_delay(p, make_ap(kappa=float(kappa))) == \
            pytest.approx(base, rel=1e-15)


def test_candidate_delay_zero_range():
    ap = make_ap(1.0, 1.0)
    with pytest.raises(ZeroRange):
        candidate_delay(np.array([1.0, 1.0]), ap)


def test_virtual_angle_boresight_and_broadside():
    ap = make_ap()
    assert candidate_virtual_angle(np.array([10.0, 0.0]), ap) == \
        pytest.approx(1.0)
    assert candidate_virtual_angle(np.array([0.0, 10.0]), ap) == \
        pytest.approx(0.0, abs=1e-15)


def test_virtual_angle_rotated_axis():
    ap = make_ap(kappa=math.pi / 4.0)
    # the target sits on the rotated local x-axis
    assert candidate_virtual_angle(np.array([10.0, 10.0]), ap) == \
        pytest.approx(1.0)


@given(st.floats(min_value=-math.pi, max_value=math.pi),
       st.floats(min_value=-80.0, max_value=80.0),
       st.floats(min_value=-80.0, max_value=80.0))
@settings(max_examples=150)
def test_virtual_angle_bounded_unit_direction(kappa, x, y):
    ap = make_ap(kappa=kappa)
    p = np.array([x, y])
    if np.linalg.norm(p) < 1.0:
        return
    psi = candidate_virtual_angle(p, ap)
    direction = local_unit_direction(p, ap)
    assert -1.0 <= psi <= 1.0
    assert direction[0] == pytest.approx(psi, abs=1e-12)
    assert np.linalg.norm(direction) == pytest.approx(1.0, abs=1e-12)


def test_delay_jacobian_line_of_sight():
    ap = make_ap()
    grad = delay_jacobian(np.array([120.0, 0.0]), ap)
    assert np.allclose(grad, [2.0 / SPEED_OF_LIGHT, 0.0], atol=1e-20)


def test_delay_jacobian_norm_constant():
    rng = np.random.default_rng(11)
    ap = make_ap(5.0, -8.0, kappa=0.3)
    for _ in range(50):
        p = rng.uniform(-100.0, 100.0, size=2)
        if np.linalg.norm(p - ap.position) < 1.0:
            continue
        assert np.linalg.norm(delay_jacobian(p, ap)) == \
            pytest.approx(2.0 / SPEED_OF_LIGHT, rel=1e-12)


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        ap = make_ap(float(rng.uniform(-50, 50)), float(rng.uniform(-50, 50)),
                     kappa=float(rng.uniform(-math.pi, math.pi)))
        p = rng.uniform(-100.0, 100.0, size=2)
        if np.linalg.norm(p - ap.position) < 5.0:
            continue
        checked += 1
        fd_tau = central_difference(lambda q: candidate_delay(q, ap), p)
        fd_psi_local = central_difference(
            lambda q: candidate_virtual_angle(q, ap), p)
        fd_psi_global = central_difference(
            lambda q: global_virtual_angle(q, ap), p)
        assert np.allclose(delay_jacobian(p, ap), fd_tau,
                           rtol=1e-6, atol=1e-15)
        assert np.allclose(local_angle_jacobian(p, ap), fd_psi_local,
                           rtol=1e-6, atol=1e-9)
        assert np.allclose(angle_jacobian(p, ap), fd_psi_global,
                           rtol=1e-6, atol=1e-9)


def test_angle_jacobian_due_east_vanishes():
    # on the global x-axis both printed entries carry a zero numerator
    ap = make_ap()
    grad = angle_jacobian(np.array([75.0, 0.0]), ap, form="printed")
    assert np.allclose(grad, [0.0, 0.0], atol=1e-18)


def test_angle_jacobian_forms_agree():
    # the two published entry forms are the same function in the plane
    rng = np.random.default_rng(23)
    ap = make_ap(-12.0, 9.0)
    for _ in range(50):
        p = rng.uniform(-100.0, 100.0, size=2)
        if np.linalg.norm(p - ap.position) < 2.0:
            continue
        printed = angle_jacobian(p, ap, form="printed")
        analytic = angle_jacobian(p, ap, form="analytic")
        assert np.allclose(printed, analytic, rtol=1e-12, atol=1e-18)


def test_local_angle_jacobian_reduces_to_global_at_zero_kappa():
    ap = make_ap(kappa=0.0)
    p = np.array([33.0, -21.0])
    assert np.allclose(local_angle_jacobian(p, ap), angle_jacobian(p, ap),
                       rtol=1e-12)


def test_ap_geometry_validation():
    with pytest.raises(ValueError):
        ApGeometry(position=np.array([0.0, 0.0]), kappa=0.0,
                   antenna_count=0, antenna_spacing=0.03)
    with pytest.raises(ValueError):
        ApGeometry(position=np.array([0.0, 0.0]), kappa=0.0,
                   antenna_count=4, antenna_spacing=0.0)


def test_target_truth_validation():
    with pytest.raises(ValueError):
        TargetTruth(position=np.array([1.0, 2.0]),
                    velocity=np.array([0.0, 0.0]), rcs=0.0)
