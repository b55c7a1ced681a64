"""Residue-tuned power-oscillation-damping controller and root-locus tools.

The controller is

    K(s) = K_POD * (s + T1)/(s + T2) * s * (100/(s + 100))^2 * s/(s + 1/1.5)

with ``T1``/``T2`` acting as corner frequencies in rad/s (the lead-lag is
implemented literally as written, despite the time-constant names).
Feedback is negative: ``u = -K(s) y``.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.signal import tf2ss

from .lineariser import StateSpaceModel
from .zeroanalysis import damping_ratio

LOWPASS = 100.0          # rad/s
WASHOUT_T = 1.5          # s
MAX_LEAD = math.radians(80.0)
CLUSTER_TOL = 1e-8
SPLIT_TOL = 1e-9


class TuningError(RuntimeError):
    def __init__(self, message: str, required_phase: float = math.nan):
        super().__init__(message)
        self.required_phase = required_phase


class ResidueError(ValueError):
    pass


@dataclass(frozen=True)
class PodController:
    T1: float = 1.0
    T2: float = 1.0
    K_POD: float = 0.0

    def __post_init__(self):
        if not self.T2 > 0:
            raise ValueError(f"T2 must be positive, got {self.T2}")
        if self.T1 < 0:
            raise ValueError(f"T1 must be non-negative, got {self.T1}")
        if self.K_POD < 0:
            raise ValueError(f"K_POD must be non-negative, got {self.K_POD}")

    def with_gain(self, k: float) -> "PodController":
        return replace(self, K_POD=k)

    def structure(self, s: complex) -> complex:
        """Response of the fixed blocks (differentiator, low-pass, washout)."""
        return s * (LOWPASS / (s + LOWPASS)) ** 2 * s / (s + 1.0 / WASHOUT_T)

    def leadlag(self, s: complex) -> complex:
        return (s + self.T1) / (s + self.T2)

    def numden(self) -> Tuple[np.ndarray, np.ndarray]:
        """Unit-gain transfer function coefficients (descending powers)."""
        num = np.polymul([1.0, self.T1], [LOWPASS**2, 0.0, 0.0])
        den = np.polymul(np.polymul([1.0, self.T2], [1.0, 2 * LOWPASS, LOWPASS**2]),
                         [1.0, 1.0 / WASHOUT_T])
        return num, den

    def poles(self) -> np.ndarray:
        return np.array([-self.T2, -LOWPASS, -LOWPASS, -1.0 / WASHOUT_T], dtype=complex)

    def state_space(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unit-gain strictly proper realization ``(Ak, bk, ck)``."""
        num, den = self.numden()
        Ak, Bk, Ck, Dk = tf2ss(num, den)
        assert np.allclose(Dk, 0.0), "controller must be strictly proper"
        return Ak, Bk[:, 0], Ck[0, :]


def controller_response(c: PodController, s: complex) -> complex:
    s = complex(s)
    for p in c.poles():
        if abs(s - p) <= 1e-14 * max(1.0, abs(p)):
            return complex(math.inf, math.inf)
    return c.K_POD * c.leadlag(s) * c.structure(s)


# --------------------------------------------------------------------------
# Residues and tuning


def residue(model: StateSpaceModel, input: str, output: str, lam: complex) -> complex:
    """``lim (s - lam) G(s)`` from the eigenvector dyad of ``A``."""
    A, b, c, _ = model.channel(input, output)
    return _residue(A, b, c, lam)


def _residue(A, b, c, lam: complex) -> complex:
    import scipy.linalg

    w, vl, vr = scipy.linalg.eig(A, left=True, right=True)
    k = int(np.argmin(np.abs(w - lam)))
    others = np.delete(w, k)
    if others.size and np.min(np.abs(others - w[k])) < CLUSTER_TOL * max(1.0, abs(w[k])):
        raise ResidueError("residue undefined for defective/clustered pole")
    if abs(w[k] - lam) > 1e-6 * max(1.0, abs(lam)):
        raise ResidueError(f"{lam} is not an eigenvalue of A")
    v, u = vr[:, k], vl[:, k]
    return complex((c @ v) * (np.conj(u) @ b) / (np.conj(u) @ v))


def required_phase(R: complex, lam: complex, c: PodController) -> float:
    """Lead (rad) the lead-lag section must add so that the first-order
    shift ``-R K(lam)`` points in the negative real direction."""
    phi = -cmath.phase(R * c.structure(lam))
    return math.remainder(phi, 2 * math.pi)


def tune_phase(R: complex, lam: complex, max_lead: float = MAX_LEAD) -> Tuple[float, float]:
    """Corner frequencies ``(T1, T2)`` aligning ``R K(lam)`` with the positive
    real axis, i.e. ``d lambda / d K_POD`` negative real."""
    lam = complex(lam)
    if lam.imag <= 0:
        raise ValueError("tune on the upper eigenvalue of the pair (Im lambda > 0)")
    base = PodController()
    phi = required_phase(R, lam, base)
    if abs(phi) > max_lead:
        raise TuningError(
            f"required compensation {math.degrees(phi):.1f} deg exceeds one lead-lag section "
            f"(+-{math.degrees(max_lead):.0f} deg); a cascade would be needed", phi)
    if abs(phi) < 1e-15:
        w = abs(lam)
        return w, w
    r = abs(lam)

    def section(log_a):
        a = math.exp(log_a)
        return cmath.phase((lam + r / a) / (lam + r * a)) - phi

    lo, hi = -1.0, 1.0
    while section(lo) > 0:
        lo *= 2
        if lo < -60:
            raise TuningError("lead-lag cannot provide the required phase", phi)
    while section(hi) < 0:
        hi *= 2
        if hi > 60:
            raise TuningError("lead-lag cannot provide the required phase", phi)
    la = brentq(section, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    a = math.exp(la)
    return r / a, r * a


def tuned_controller(model: StateSpaceModel, input: str, output: str, lam: complex,
                     gain: float = 0.0) -> Tuple[PodController, complex]:
    R = residue(model, input, output, lam)
    T1, T2 = tune_phase(R, lam)
    return PodController(T1, T2, gain), R


def phase_error(R: complex, lam: complex, c: PodController) -> float:
    """Angle of ``R K(lam)`` (rad); zero after tuning."""
    return cmath.phase(R * c.leadlag(lam) * c.structure(lam))


# --------------------------------------------------------------------------
# Closed loop and root locus


def closed_loop(model: StateSpaceModel, c: PodController, input: str, output: str,
                sign: float = 1.0) -> StateSpaceModel:
    """Augment ``model`` with ``u_input = v - sign * K(s) y_output``.

    External inputs and outputs keep their labels; the four controller
    states are appended.
    """
    Ak, bk, ck = c.state_space()
    iu, iy = model.input_index(input), model.output_index(output)
    k = sign * c.K_POD
    A, B, C, D = model.A, model.B, model.C, model.D
    b, cy, dyu = B[:, iu], C[iy, :], D[iy, iu]
    n, nk = A.shape[0], Ak.shape[0]
    Acl = np.zeros((n + nk, n + nk))
    Acl[:n, :n] = A
    Acl[:n, n:] = -k * np.outer(b, ck)
    Acl[n:, :n] = np.outer(bk, cy)
    Acl[n:, n:] = Ak - k * dyu * np.outer(bk, ck)
    Bcl = np.vstack([B, np.outer(bk, D[iy, :])])
    Ccl = np.hstack([C, -k * np.outer(D[:, iu], ck)])
    states = model.states + tuple(f"pod{i + 1}" for i in range(nk))
    return StateSpaceModel(Acl, Bcl, Ccl, D.copy(), states, model.inputs, model.outputs,
                           op=model.op, machines=model.machines)


def default_grid(gmin: float = 1e-2, gmax: float = 1e3, points: int = 200) -> np.ndarray:
    if not (0 < gmin < gmax) or points < 2:
        raise ValueError("gain grid needs 0 < min < max and at least 2 points")
    return np.logspace(math.log10(gmin), math.log10(gmax), points)


@dataclass(frozen=True)
class RootLocusTrace:
    gains: np.ndarray
    eigenvalues: Tuple[np.ndarray, ...]
    path: np.ndarray                 # tracked upper eigenvalue per gain
    start: complex                   # open-loop electromechanical eigenvalue
    crossing_gain: Optional[float]
    best_gain: float
    best_zeta: float
    splits: Tuple[int, ...] = ()
    zeros: Tuple[complex, ...] = ()

    @property
    def zeta(self) -> np.ndarray:
        return -self.path.real / np.abs(self.path)

    @property
    def stabilizing(self) -> bool:
        return bool(np.any(self.path.real < 0))


class _Locus:
    def __init__(self, model, c, input, output, sign):
        self.model, self.c, self.input, self.output, self.sign = model, c, input, output, sign

    def eigs(self, k: float) -> np.ndarray:
        return np.linalg.eigvals(closed_loop(self.model, self.c.with_gain(k),
                                             self.input, self.output, self.sign).A)


def _nearest(eigs: np.ndarray, prev: complex) -> Tuple[complex, bool]:
    d = np.abs(eigs - prev)
    order = np.argsort(d)
    ambiguous = len(order) > 1 and abs(d[order[1]] - d[order[0]]) < SPLIT_TOL \
        and abs(eigs[order[1]] - eigs[order[0]]) < SPLIT_TOL * 10 + 1e-9 * abs(prev)
    return complex(eigs[order[0]]), ambiguous


def _track(loc: _Locus, gains: Sequence[float], start: complex, jobs: int = 1):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            clouds = list(ex.map(loc.eigs, gains))
    else:
        clouds = [loc.eigs(k) for k in gains]
    path, splits, prev = [], [], start
    for i, ev in enumerate(clouds):
        lam, amb = _nearest(ev, prev)
        if lam.imag < 0:
            lam = lam.conjugate()
        if amb:
            splits.append(i)
        path.append(lam)
        prev = lam
    return clouds, np.array(path), splits


def root_locus(model: StateSpaceModel, c: PodController, input: str, output: str,
               gains: Optional[Sequence[float]] = None, start: Optional[complex] = None,
               sign: float = 1.0, jobs: int = 1) -> RootLocusTrace:
    """Closed-loop eigenvalues over an ascending gain grid, tracking the
    electromechanical pair from its open-loop position by nearest-neighbour
    continuation.  The grid is refined four-fold around axis crossings."""
    gains = default_grid() if gains is None else np.asarray(gains, float)
    if np.any(np.diff(gains) <= 0) or gains[0] <= 0:
        raise ValueError("gain grid must be positive and strictly ascending")
    loc = _Locus(model, c, input, output, sign)
    ol = np.linalg.eigvals(model.A)
    if start is None:
        from .zeroanalysis import em_pair
        start = em_pair(ol, 0.0)[0]
    start = complex(start)
    if start.imag < 0:
        start = start.conjugate()
    # small-gain seed so the first grid point is reached continuously
    seed = np.geomspace(gains[0] * 1e-4, gains[0], 8, endpoint=False)
    _, seed_path, _ = _track(loc, seed, start)
    clouds, path, splits = _track(loc, gains, seed_path[-1], jobs)

    # four-fold refinement around sign changes of the real part
    crossing = None
    re = path.real
    for i in range(len(gains) - 1):
        if (re[i] > 0) != (re[i + 1] > 0):
            sub = np.geomspace(gains[i], gains[i + 1], 5)
            _, sp, _ = _track(loc, sub, path[i])

            def f(k, _lo=gains[i], _p=path[i]):
                ks = np.geomspace(_lo, k, 4) if k > _lo else [k]
                _, pp, _ = _track(loc, ks, _p)
                return pp[-1].real

            j = next(j for j in range(4) if (sp[j].real > 0) != (sp[j + 1].real > 0))
            crossing = float(brentq(f, sub[j], sub[j + 1], xtol=1e-12, rtol=1e-10))
            break

    zeta = -path.real / np.abs(path)
    kb, zb = _refine_best(loc, gains, path, zeta)
    return RootLocusTrace(gains, tuple(clouds), path, start, crossing, kb, zb, tuple(splits))


def _refine_best(loc: _Locus, gains, path, zeta) -> Tuple[float, float]:
    i = int(np.argmax(zeta))
    if i == 0 or i == len(gains) - 1:
        return float(gains[i]), float(zeta[i])
    lo, hi = math.log(gains[i - 1]), math.log(gains[i + 1])
    anchor_k, anchor = gains[i - 1], path[i - 1]

    def neg_zeta(lk):
        k = math.exp(lk)
        ks = np.geomspace(anchor_k, k, 6) if k > anchor_k else [k]
        _, pp, _ = _track(loc, ks, anchor)
        return -damping_ratio(pp[-1])

    res = minimize_scalar(neg_zeta, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-4})
    k, z = math.exp(res.x), -res.fun
    if z < zeta[i]:
        return float(gains[i]), float(zeta[i])
    return float(k), float(z)


def best_damping(trace) -> Tuple[float, float]:
    """(gain, zeta) of the best-damped point; ``trace`` may be a
    :class:`RootLocusTrace` or a ``(gains, zetas)`` pair."""
    if isinstance(trace, RootLocusTrace):
        return trace.best_gain, trace.best_zeta
    gains, zetas = (np.asarray(x, float) for x in trace)
    if gains.size == 0:
        raise ValueError("empty trace")
    i = int(np.argmax(zetas))
    if 0 < i < len(gains) - 1:
        # parabola through the three points around the grid maximum (log gain)
        x = np.log(gains[i - 1:i + 2])
        y = zetas[i - 1:i + 2]
        a, b, _ = np.polyfit(x, y, 2)
        if a < 0:
            xs = -b / (2 * a)
            if x[0] <= xs <= x[2]:
                return float(math.exp(xs)), float(np.polyval(np.polyfit(x, y, 2), xs))
    return float(gains[i]), float(zetas[i])
