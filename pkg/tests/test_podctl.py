import cmath
import math

import numpy as np
import pytest

from smibzeros.lineariser import StateSpaceModel
from smibzeros.podctl import (
    LOWPASS,
    WASHOUT_T,
    PodController,
    ResidueError,
    TuningError,
    best_damping,
    closed_loop,
    controller_response,
    default_grid,
    phase_error,
    required_phase,
    residue,
    root_locus,
    tune_phase,
    tuned_controller,
)
from smibzeros.workflow import design_pod, linear_model
from smibzeros.zeroanalysis import cluster_mismatch, zeros_numeric


def ss(A, b, c, d=0.0):
    A = np.atleast_2d(np.asarray(A, float))
    n = A.shape[0]
    return StateSpaceModel(A, np.asarray(b, float).reshape(n, 1), np.asarray(c, float).reshape(1, n),
                           np.array([[d]]), tuple(f"x{i}" for i in range(n)), ("u",), ("y",))


def oscillator(sigma=0.05, w=7.0, zero=-2.0):
    """Lightly damped pair with one real zero: (s - zero)/((s - p)(s - p*))."""
    A = [[0.0, 1.0], [-(sigma**2 + w**2), 2 * sigma]]
    return ss(A, [0.0, 1.0], [-zero, 1.0])


def test_controller_response_formula():
    c = PodController(3.0, 12.0, 2.5)
    s = 0.4 + 6j
    expected = 2.5 * (s + 3) / (s + 12) * s * (LOWPASS / (s + LOWPASS)) ** 2 * s / (s + 1 / WASHOUT_T)
    assert controller_response(c, s) == pytest.approx(expected, rel=1e-14)
    assert controller_response(c.with_gain(0.0), s) == 0
    assert math.isinf(controller_response(c, -12.0).real)
    num, den = c.numden()
    assert 2.5 * np.polyval(num, s) / np.polyval(den, s) == pytest.approx(expected, rel=1e-12)


def test_controller_rejects_bad_parameters():
    with pytest.raises(ValueError):
        PodController(1.0, 0.0)
    with pytest.raises(ValueError):
        PodController(-1.0, 1.0)
    with pytest.raises(ValueError):
        PodController(1.0, 1.0, -0.1)


def test_controller_state_space_matches_transfer():
    c = PodController(2.0, 20.0, 1.0)
    Ak, bk, ck = c.state_space()
    for s in (1j, 5 + 3j, 0.2 + 40j):
        g = ck @ np.linalg.solve(s * np.eye(4) - Ak, bk)
        assert g == pytest.approx(controller_response(c, s), rel=1e-10)


def test_residue_first_order():
    assert residue(ss([[-1.0]], [1.0], [1.0]), "u", "y", -1.0) == pytest.approx(1.0)


def test_residue_with_zero():
    # (s+2)/((s+1)(s+3)) = 0.5/(s+1) + 0.5/(s+3)
    m = ss([[-1.0, 0.0], [0.0, -3.0]], [1.0, 1.0], [0.5, 0.5])
    assert residue(m, "u", "y", -1.0) == pytest.approx(0.5)
    assert residue(m, "u", "y", -3.0) == pytest.approx(0.5)


def test_residue_matches_limit(rng):
    m = oscillator()
    lam = complex(np.linalg.eigvals(m.A)[np.argmax(np.linalg.eigvals(m.A).imag)])
    R = residue(m, "u", "y", lam)
    h = 1e-7
    limit = h * m.transfer(lam + h, "u", "y")
    assert abs(R - limit) <= 1e-5 * abs(R)


def test_residues_sum_to_first_markov_parameter(rng):
    A = rng.normal(size=(5, 5))
    b, c = rng.normal(size=5), rng.normal(size=5)
    m = ss(A, b, c)
    total = sum(residue(m, "u", "y", lam) for lam in np.linalg.eigvals(A))
    assert total == pytest.approx(c @ b, abs=1e-9)


def test_residue_errors():
    m = ss(np.diag([-1.0, -1.0]), [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ResidueError):
        residue(m, "u", "y", -1.0)
    with pytest.raises(ResidueError):
        residue(ss([[-1.0]], [1.0], [1.0]), "u", "y", -5.0)


def test_tuning_neutral_case():
    lam = 0.1 + 7j
    base = PodController()
    # residue chosen so the fixed blocks already give zero phase
    R = 1 / base.structure(lam)
    assert required_phase(R, lam, base) == pytest.approx(0.0, abs=1e-15)
    T1, T2 = tune_phase(R, lam)
    assert T1 == T2


def test_tuning_adds_thirty_degrees():
    lam = 7j
    base = PodController()
    R = cmath.exp(-1j * math.radians(30)) / base.structure(lam)
    T1, T2 = tune_phase(R, lam)
    c = PodController(T1, T2)
    assert math.degrees(cmath.phase(c.leadlag(lam))) == pytest.approx(30.0, abs=1e-9)
    assert T1 < T2
    assert abs(phase_error(R, lam, c)) <= 1e-6


def test_tuning_beyond_one_section():
    lam = 7j
    R = cmath.exp(-1j * math.radians(95)) / PodController().structure(lam)
    with pytest.raises(TuningError) as exc:
        tune_phase(R, lam)
    assert math.degrees(exc.value.required_phase) == pytest.approx(95.0, abs=1e-9)
    with pytest.raises(ValueError):
        tune_phase(1.0, 0.1 - 7j)


def test_first_order_eigenvalue_shift():
    m = oscillator()
    lam = max(np.linalg.eigvals(m.A), key=lambda e: e.imag)
    c, R = tuned_controller(m, "u", "y", lam)
    k = 1e-4
    cl = np.linalg.eigvals(closed_loop(m, c.with_gain(k), "u", "y").A)
    moved = cl[np.argmin(np.abs(cl - lam))]
    predicted = -k * R * controller_response(c.with_gain(1.0), lam)
    assert abs((moved - lam) - predicted) <= 0.05 * abs(predicted)
    # tuned: the shift points left along the real axis
    assert predicted.real < 0 and abs(predicted.imag) <= 1e-6 * abs(predicted)


def test_closed_loop_at_zero_gain_is_block_diagonal():
    m = oscillator()
    c = PodController(2.0, 30.0, 0.0)
    cl = closed_loop(m, c, "u", "y")
    expected = np.concatenate([np.linalg.eigvals(m.A), c.poles()])
    assert cluster_mismatch(np.linalg.eigvals(cl.A), expected) <= 1e-10


def test_closed_loop_zeros_are_open_loop_zeros_and_controller_poles():
    m = oscillator()
    c = PodController(2.0, 30.0, 3.0)
    cl = closed_loop(m, c, "u", "y")
    expected = np.concatenate([zeros_numeric(m, "u", "y"), c.poles()])
    assert cluster_mismatch(zeros_numeric(cl, "u", "y"), expected) <= 1e-8


def test_locus_eigenvalues_are_conjugate_symmetric():
    m = oscillator()
    lam = max(np.linalg.eigvals(m.A), key=lambda e: e.imag)
    c, _ = tuned_controller(m, "u", "y", lam)
    tr = root_locus(m, c, "u", "y", gains=default_grid(1e-5, 1e2, 60), start=lam)
    for ev in tr.eigenvalues:
        assert cluster_mismatch(ev, np.conj(ev)) <= 1e-9
    assert tr.stabilizing
    assert tr.crossing_gain is not None
    k = tr.crossing_gain
    cl = np.linalg.eigvals(closed_loop(m, c.with_gain(k), "u", "y").A)
    near = cl[np.argmin(np.abs(cl - tr.path[0]))]
    assert abs(near.real) <= 1e-6


def test_best_gain_stable_under_grid_refinement(ref):
    m = linear_model(ref)
    a = design_pod(ref, "2", m, gains=default_grid(1e-2, 1e3, 200))
    b = design_pod(ref, "2", m, gains=default_grid(1e-2, 1e3, 400))
    assert abs(a.trace.best_gain - b.trace.best_gain) / b.trace.best_gain <= 1e-3
    assert a.trace.best_zeta == pytest.approx(b.trace.best_zeta, rel=1e-4)


def test_best_damping_synthetic():
    g = np.logspace(-2, 2, 41)
    z = 0.3 - (np.log(g) - math.log(3.0)) ** 2
    k, zeta = best_damping((g, z))
    assert k == pytest.approx(3.0, rel=1e-9)
    assert zeta == pytest.approx(0.3, rel=1e-9)
    k, zeta = best_damping((g, np.log(g)))
    assert k == g[-1]
    with pytest.raises(ValueError):
        best_damping(([], []))


def test_grid_validation():
    with pytest.raises(ValueError):
        default_grid(1.0, 0.5)
    with pytest.raises(ValueError):
        default_grid(1.0, 2.0, 1)
    m = oscillator()
    with pytest.raises(ValueError):
        root_locus(m, PodController(), "u", "y", gains=[1.0, 0.5])
