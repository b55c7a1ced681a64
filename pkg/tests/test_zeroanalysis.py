import math
from dataclasses import replace

import numpy as np
import pytest

from smibzeros.lineariser import StateSpaceModel, smib_closed_form
from smibzeros.netmodel import operating_point_at
from smibzeros.params import AvrParams, MachineParams
from smibzeros.workflow import linear_model, smib
from smibzeros.zeroanalysis import (
    LOOPS,
    DegenerateChannel,
    SisoDynamics,
    catalog,
    char_poly,
    cluster_mismatch,
    destab_margin,
    omega_em,
    poles,
    relative_mismatch,
    siso_zeros,
    stability_check,
    zero_gov_theta,
    zero_gov_voltage,
    zero_poly_p_theta,
    zero_poly_p_voltage,
    zero_pss_theta,
    zero_pss_voltage,
    zeros_numeric,
)

from conftest import chain_net, random_point

MP = MachineParams(M=0.02, D_m=0.0, T_do=7.0, x_d=1.8, x_d_prime=0.3)


def point(delta, K_A=0.0, mp=MP, meas="2", ctrl="2", eq=1.1):
    net = chain_net()
    op = operating_point_at(net, mp, delta, eq, K_A)
    return smib_closed_form(net, mp, AvrParams(K_A=K_A), op, meas, ctrl)


# ---------------------------------------------------------------- polynomials


def test_char_poly_factorises_when_decoupled(rng):
    s = random_point(rng).smib().with_(a23=0.0, a31=0.0)
    r = np.sort_complex(np.roots(char_poly(s)))
    mech = np.roots([1.0, s.a22, s.a21])
    expected = np.sort_complex(np.concatenate([mech, [-s.a33]]))
    np.testing.assert_allclose(r, expected, rtol=1e-10)


def test_char_poly_roots_are_eigenvalues(rng):
    for _ in range(100):
        s = random_point(rng).smib()
        assert relative_mismatch(np.roots(char_poly(s)), np.linalg.eigvals(s.A), floor=1.0) <= 1e-9
        assert char_poly(s)[1] == pytest.approx(-np.trace(s.A), rel=1e-12)


def test_poles_of_diagonal_and_companion():
    np.testing.assert_allclose(poles(np.diag([3.0, -1.0, 0.5])), [-1.0, 0.5, 3.0])
    # (s+1)(s^2+4s+13)
    coeffs = np.polymul([1, 1], [1, 4, 13])
    comp = np.zeros((3, 3))
    comp[0, :] = -coeffs[1:]
    comp[1, 0] = comp[2, 1] = 1.0
    np.testing.assert_allclose(poles(comp), [-2 - 3j, -2 + 3j, -1], atol=1e-12)
    with pytest.raises(ValueError):
        poles(np.zeros((2, 3)))


def test_siso_zero_of_simple_transfer():
    # (s+1)/(s^2+2s+5) in controllable canonical form
    A = np.array([[0.0, 1.0], [-5.0, -2.0]])
    b = np.array([0.0, 1.0])
    c = np.array([1.0, 1.0])
    np.testing.assert_allclose(siso_zeros(A, b, c, 0.0), [-1.0], atol=1e-12)
    # biproper version keeps both zeros finite
    z = siso_zeros(A, b, c, 1.0)
    assert relative_mismatch(z, np.roots([1, 3, 6])) <= 1e-12


def test_degenerate_channel_detected():
    A = np.diag([-1.0, -2.0])
    with pytest.raises(DegenerateChannel):
        siso_zeros(A, np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0)
    with pytest.raises(DegenerateChannel):
        siso_zeros(A, np.zeros(2), np.ones(2), 0.0)


def test_siso_dynamics_reproduces_transfer(rng):
    p = random_point(rng)
    m = p.model
    inp, out = f"P:{p.ctrl}", f"theta:{p.meas}"
    g = SisoDynamics.from_model(m, inp, out)
    right = max(np.real(g.poles)) + 1.0
    for w in np.linspace(-30, 30, 20):
        z = right + 1j * w
        assert abs(g(z) - m.transfer(z, inp, out)) <= 1e-8 * abs(m.transfer(z, inp, out))


def test_cluster_mismatch_tolerates_split_double_root():
    exp = np.array([-100.0, -100.0, -3.0])
    act = np.array([-100.0 + 1e-6j, -100.0 - 1e-6j, -3.0])
    assert relative_mismatch(act, exp) > 1e-9
    assert cluster_mismatch(act, exp) <= 1e-14


# ---------------------------------------------------------------- stability


def test_omega_is_the_undamped_em_frequency():
    s = point(0.0)
    assert omega_em(s) == pytest.approx(math.sqrt(s.a21), rel=1e-12)


def test_destab_condition_matches_real_part_without_damping(rng):
    """Undamped machines: the regulator destabilises exactly when the margin flips."""
    checked = 0
    for _ in range(300):
        p = random_point(rng, damping=0.0)
        if p.avr.K_A == 0.0:
            continue
        s = p.smib()
        rep = stability_check(s)
        if abs(rep.em[0].real) < 1e-6 or abs(rep.destab_margin) < 1e-6:
            continue
        assert rep.criteria == (s.a23 * s.a31 > 0)
        assert rep.criteria == (rep.em[0].real < 0), (rep.em, rep.criteria_margin)
        checked += 1
    assert checked > 100


def test_margin_independent_of_gain_when_terminal_angle_zero():
    s = point(0.6)
    s = s.with_(eps={**s.eps, s.terminal: 0.0})
    margins = {k: destab_margin(s.with_(K_A=k)) for k in (0.0, 50.0, 400.0)}
    assert margins[0.0] == margins[50.0] == margins[400.0]


def test_constant_field_instability_is_aperiodic(rng):
    """Without a regulator the swing pair stays damped; any loss of stability
    is a real root, flagged by the sign of the constant term."""
    for _ in range(80):
        p = random_point(rng, K_A=0.0, damping=0.0)
        rep = stability_check(p.smib())
        assert rep.destab_cond or p.op.delta == 0.0
        assert rep.em[0].real <= 1e-9
        unstable = max(np.real(rep.eigenvalues)) > 1e-9
        assert unstable == (not rep.constant_term)


# ---------------------------------------------------------------- excitation input


def test_pss_angle_zeros_at_origin_when_load_angle_equals_delta():
    s = point(0.5, meas="2")
    s = s.with_(eps={**s.eps, "2": s.delta})
    z = zero_pss_theta(s).zeros
    np.testing.assert_allclose(z, [0.0, 0.0], atol=1e-7)


def test_pss_angle_real_pair_is_nonminimum_phase(rng):
    for _ in range(50):
        p = random_point(rng, damping=0.0)
        if abs(p.op.delta) < 0.05 or abs(p.op.eps[p.meas]) < 1e-3:
            continue
        r = zero_pss_theta(p.smib())
        if r.details["radicand"] > 0:
            assert r.nmp
            assert r.zeros[0] == pytest.approx(-r.zeros[1])


def test_pss_angle_zero_angle_limit_and_imaginary_pair():
    r = zero_pss_theta(point(0.0))
    assert r.zeros == () and "infinity" in r.limit
    s = point(0.0)
    s = s.with_(eps={**s.eps, "2": 0.1})
    z = zero_pss_theta(s).zeros
    assert all(abs(v.real) < 1e-12 for v in z)
    assert abs(z[0].imag) == pytest.approx(omega_em(s), rel=1e-12)


def test_pss_voltage_zeros():
    s = point(0.0)
    np.testing.assert_allclose(sorted(v.imag for v in zero_pss_voltage(s).zeros),
                               [-omega_em(s), omega_em(s)], rtol=1e-12)
    s = point(0.5)
    s = s.with_(eps={**s.eps, "2": s.delta})
    k = s.b_sigma / s.M * s.eq_prime * s.E_N
    mag = math.sqrt(k / math.cos(s.delta))
    assert max(abs(v.imag) for v in zero_pss_voltage(s).zeros) == pytest.approx(mag, rel=1e-12)


# ---------------------------------------------------------------- mechanical input


def test_governor_angle_zero_at_zero_angle():
    s = point(0.0, K_A=0.0)
    (z,) = zero_gov_theta(s).zeros
    assert z.real == pytest.approx(-s.a33, rel=1e-12)


def test_governor_angle_gain_pushes_zero_left(rng):
    for _ in range(30):
        p = random_point(rng, K_A=0.0)
        r = zero_gov_theta(p.smib())
        if "K_A_coefficient" not in r.details:
            continue
        assert r.details["K_A_coefficient"] < 0
        s = p.smib().with_(K_A=100.0)
        assert zero_gov_theta(s).zeros[0].real < r.zeros[0].real


def test_governor_voltage_zero_and_limit():
    s = point(0.0)
    r = zero_gov_voltage(s)
    assert r.zeros == () and "infinity" in r.limit
    s = point(0.05, meas="1", K_A=0.0)
    (z,) = zero_gov_voltage(s).zeros
    assert z.real < 0


# ---------------------------------------------------------------- active-power input


def test_p_theta_imaginary_part_close_to_approximation():
    for d in (0.05, 0.1, 0.2, 0.4):
        for meas, ctrl in (("1", "1"), ("2", "2"), ("1", "2"), ("2", "3"), ("3", "3")):
            r = zero_poly_p_theta(point(d, meas=meas, ctrl=ctrl))
            assert abs(r.em_zeros[0].imag) == pytest.approx(r.approx_imag, rel=0.05)


def test_p_theta_em_zeros_at_least_omega(rng):
    for _ in range(100):
        p = random_point(rng)
        assert zero_poly_p_theta(p.smib()).abs_ge_omega


def test_p_voltage_terminal_case_independent_of_gain():
    rs = [zero_poly_p_voltage(point(0.6, K_A=k, meas="1", ctrl="1"), "A2+A3") for k in (0.0, 50.0, 200.0)]
    for r in rs[1:]:
        assert r.alpha1 == pytest.approx(rs[0].alpha1, rel=1e-9)
        assert r.alpha2 == pytest.approx(rs[0].alpha2, rel=1e-9)
    assert rs[0].alpha1 == pytest.approx(rs[0].alpha1_terminal, rel=1e-8)
    assert rs[0].nmp and rs[0].omega_ratio >= 10


def test_p_voltage_assumption_guards():
    with pytest.raises(ValueError):
        zero_poly_p_voltage(point(0.4, meas="2", ctrl="3"), "A2")
    with pytest.raises(ValueError):
        zero_poly_p_voltage(point(0.4, meas="2", ctrl="2"), "A2+A3")
    with pytest.raises(ValueError):
        zero_poly_p_voltage(point(0.4), "bogus")


def test_q_transfer_antisymmetry():
    a = zero_poly_p_voltage(point(0.7, K_A=50.0, meas="2", ctrl="3"))
    b = zero_poly_p_voltage(point(0.7, K_A=50.0, meas="3", ctrl="2"))
    scale = abs(a.alpha1_terminal)
    assert a.q_transfer * b.q_transfer == pytest.approx(scale**2, rel=1e-12)
    assert abs(a.q_transfer) < scale < abs(b.q_transfer)


def test_doubling_inertia_rescales_zeros():
    big = replace(MP, M=2 * MP.M)
    s1, s2 = point(0.5), point(0.5, mp=big)
    z1 = max(abs(z) for z in zero_pss_voltage(s1).zeros)
    z2 = max(abs(z) for z in zero_pss_voltage(s2).zeros)
    assert z2 == pytest.approx(z1 / math.sqrt(2), rel=1e-12)
    a1 = zero_poly_p_voltage(point(0.5, meas="1", ctrl="1"), "A2+A3").alpha1_terminal
    a2 = zero_poly_p_voltage(point(0.5, mp=big, meas="1", ctrl="1"), "A2+A3").alpha1_terminal
    assert a2 == pytest.approx(a1 / 2, rel=1e-12)


@pytest.mark.parametrize("meas,ctrl", [("1", "1"), ("2", "3"), ("3", "1"), ("3", "3")])
def test_closed_forms_match_pencil(ref, meas, ctrl):
    m = linear_model(ref)
    s = smib(ref, meas, ctrl, op=m.op)
    z = zero_poly_p_theta(s).zeros
    assert relative_mismatch(z, zeros_numeric(m, f"P:{ctrl}", f"theta:{meas}")) <= 1e-7
    z = zero_poly_p_voltage(s).zeros
    assert relative_mismatch(z, zeros_numeric(m, f"P:{ctrl}", f"V:{meas}")) <= 1e-7


# ---------------------------------------------------------------- catalog


def test_reference_catalog(ref):
    m = linear_model(ref)
    cat = catalog(m, smib(ref, op=m.op))
    assert len(cat) == 6 and [e.loop for e in cat.entries] == list(LOOPS)
    for e in cat.entries:
        assert e.status in ("ok", "limit")
        if e.status == "ok":
            assert e.mismatch <= 1e-7
    assert cat.by_loop("V_P").nmp
    with pytest.raises(KeyError):
        cat.by_loop("nope")


def test_catalog_infinite_bus_and_empty(ref):
    m = linear_model(ref)
    cat = catalog(m, smib(ref, op=m.op), meas=m.op.infinite)
    assert all(e.status == "unobservable" for e in cat.entries)
    empty = StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)),
                            (), (), ())
    assert len(catalog(empty, None)) == 0
    with pytest.raises(KeyError):
        catalog(m, smib(ref, op=m.op), loops=["bogus"])
