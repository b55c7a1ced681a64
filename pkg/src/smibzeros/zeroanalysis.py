"""Poles, stability conditions and open-loop zeros of the SMIB control loops.

Numeric zeros come from the Rosenbrock pencil of an assembled model; the
closed forms below are evaluated from the operating point directly (trig
expressions) so that agreement between the two is a genuine cross-check.
"""

from __future__ import annotations

import math
import cmath
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .lineariser import SmibMatrices, StateSpaceModel
from .netmodel import BeyondStaticLimit
from .serialize import complex_list, csv_text, dumps

TRIG_TOL = 1e-9          # rad, below which sin/cos denominators are treated as zero
INFINITE_ZERO = 1e12     # pencil eigenvalues above this magnitude are infinite zeros
VALID_DELTA = 1.2        # rad
VALID_KA = 20.0

LOOPS = ("theta_upss", "V_upss", "theta_Pm", "V_Pm", "theta_P", "V_P")


class DegenerateChannel(ValueError):
    """The selected channel has an identically zero transfer function."""


# --------------------------------------------------------------------------
# Poles and numeric zeros


def poles(model_or_A) -> np.ndarray:
    A = model_or_A.A if isinstance(model_or_A, StateSpaceModel) else np.asarray(model_or_A, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("state matrix must be square")
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue iteration did not converge: {exc}") from exc
    return _sorted(ev)


def _sorted(values) -> np.ndarray:
    v = np.asarray(values, dtype=complex)
    return v[np.lexsort((v.imag, v.real))]


def _markov_degenerate(A, b, c, d) -> bool:
    n = A.shape[0]
    scale = max(np.linalg.norm(A, 2), 1.0)
    ref = np.linalg.norm(b) * np.linalg.norm(c)
    if abs(d) > 1e-14 * max(ref, 1.0):
        return False
    if ref == 0.0:
        return True
    v = b.astype(float)
    for k in range(n):
        if abs(c @ v) > 1e-12 * ref * scale**k:
            return False
        v = A @ v
    return True


def siso_zeros(A, b, c, d) -> np.ndarray:
    """Finite invariant zeros of ``(A, b, c, d)`` via the system-matrix pencil."""
    A = np.asarray(A, float)
    b = np.asarray(b, float).reshape(-1)
    c = np.asarray(c, float).reshape(-1)
    n = A.shape[0]
    if _markov_degenerate(A, b, c, float(d)):
        raise DegenerateChannel("channel unobservable/uncontrollable: transfer function is identically zero")
    P = np.zeros((n + 1, n + 1))
    P[:n, :n], P[:n, n], P[n, :n], P[n, n] = A, b, c, d
    E = np.zeros_like(P)
    E[:n, :n] = np.eye(n)
    ab = scipy.linalg.eigvals(P, E, homogeneous_eigvals=True)
    alpha, beta = ab
    if np.any((np.abs(alpha) < 1e-13 * max(1.0, np.abs(P).max())) & (np.abs(beta) < 1e-13)):
        raise DegenerateChannel("singular system pencil: channel unobservable/uncontrollable")
    out = []
    for a, bt in zip(alpha, beta):
        if abs(bt) == 0 or abs(a) > INFINITE_ZERO * abs(bt):
            continue
        out.append(a / bt)
    z = np.array(out, dtype=complex)
    # conjugate pairs from QZ come out with tiny asymmetries; clean real parts
    z = np.where(np.abs(z.imag) <= 1e-13 * np.maximum(1.0, np.abs(z)), z.real + 0j, z)
    return _sorted(z)


def zeros_numeric(model: StateSpaceModel, input: str, output: str) -> np.ndarray:
    return siso_zeros(*model.channel(input, output))


@dataclass(frozen=True)
class SisoDynamics:
    input: str
    output: str
    poles: Tuple[complex, ...]
    zeros: Tuple[complex, ...]
    gain: float
    model: Optional[StateSpaceModel] = field(default=None, compare=False, repr=False)

    def __call__(self, s: complex) -> complex:
        num = np.prod([s - z for z in self.zeros]) if self.zeros else 1.0
        den = np.prod([s - p for p in self.poles])
        return complex(self.gain * num / den)

    @classmethod
    def from_model(cls, model: StateSpaceModel, input: str, output: str) -> "SisoDynamics":
        A, b, c, d = model.channel(input, output)
        z = siso_zeros(A, b, c, d)
        p = poles(A)
        if d != 0.0:
            gain = d
        else:
            r = len(p) - len(z)  # relative degree
            gain = float(c @ np.linalg.matrix_power(A, r - 1) @ b)
        return cls(input, output, tuple(p), tuple(z), float(gain), model)


def match_sets(a: Sequence[complex], b: Sequence[complex]) -> Tuple[np.ndarray, np.ndarray]:
    """Pair two zero sets by minimum total distance; returns (pairs_a, pairs_b)."""
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    if len(a) == 0 or len(b) == 0:
        return a[:0], b[:0]
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return a[r], b[c]


def relative_mismatch(a: Sequence[complex], b: Sequence[complex], floor: float = 1e-2) -> float:
    """Largest ``|a_i - b_i| / max(|b_i|, floor)`` after optimal pairing;
    ``inf`` when the sets differ in size."""
    if len(a) != len(b):
        return math.inf
    pa, pb = match_sets(a, b)
    if len(pa) == 0:
        return 0.0
    return float(np.max(np.abs(pa - pb) / np.maximum(np.abs(pb), floor)))


def cluster_mismatch(actual: Sequence[complex], expected: Sequence[complex],
                     floor: float = 1.0, cluster: float = 1e-9) -> float:
    """Like :func:`relative_mismatch`, but repeated expected values are
    compared through the centroid of their matched partners.

    A root of multiplicity m moves by O(eps**(1/m)), whereas the mean of the
    perturbed cluster stays accurate to O(eps).
    """
    if len(actual) != len(expected):
        return math.inf
    pa, pb = match_sets(actual, expected)
    if len(pa) == 0:
        return 0.0
    worst, used = 0.0, np.zeros(len(pb), bool)
    for i in range(len(pb)):
        if used[i]:
            continue
        grp = np.abs(pb - pb[i]) <= cluster * max(abs(pb[i]), floor)
        used |= grp
        err = abs(pa[grp].mean() - pb[grp].mean()) / max(abs(pb[i]), floor)
        worst = max(worst, float(err))
    return worst


# --------------------------------------------------------------------------
# Characteristic polynomial and stability


def char_poly(smib: SmibMatrices) -> Tuple[float, float, float, float]:
    a21, a22, a23, a31, a33 = smib.a21, smib.a22, smib.a23, smib.a31, smib.a33
    return (1.0, a22 + a33, a22 * a33 + a21, a21 * a33 - a23 * a31)


def omega_em(smib: SmibMatrices) -> float:
    cd = math.cos(smib.delta)
    if cd <= 0:
        raise BeyondStaticLimit(f"cos(delta*)={cd:.3g} <= 0: beyond static limit")
    return math.sqrt(smib.b_sigma / smib.M * smib.eq_prime * smib.E_N * cd)


def em_pair(eigs: Sequence[complex], Omega: float) -> Tuple[complex, complex]:
    """Electromechanical pair: complex pair whose modulus is closest to Omega
    (ties to the larger imaginary part); two roots nearest +-j Omega when
    every root is real."""
    eigs = np.asarray(eigs, complex)
    upper = [e for e in eigs if e.imag > 1e-12 * max(1.0, abs(e))]
    if upper:
        best = min(upper, key=lambda e: (round(abs(abs(e) - Omega), 12), -e.imag))
        return best, best.conjugate()
    if len(eigs) < 2:
        raise ValueError("need at least two eigenvalues")
    order = sorted(eigs, key=lambda e: abs(e - 1j * Omega))
    return order[0], order[1]


def damping_ratio(lam: complex) -> float:
    return -lam.real / abs(lam) if lam != 0 else 0.0


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: Tuple[complex, ...]
    em: Tuple[complex, complex]
    zeta: float
    Omega: float
    destab_cond: bool
    destab_margin: float
    constant_term: bool
    constant_margin: float
    with_damping: bool
    with_damping_margin: float
    criteria: bool
    criteria_margin: float
    hurwitz: bool
    within_validity: bool

    def to_dict(self) -> dict:
        return {
            "eigenvalues": complex_list(self.eigenvalues),
            "electromechanical": complex_list(self.em),
            "zeta": self.zeta,
            "Omega": self.Omega,
            "destab_cond": {"holds": self.destab_cond, "margin": self.destab_margin},
            "constant_term": {"holds": self.constant_term, "margin": self.constant_margin},
            "with_damping": {"holds": self.with_damping, "margin": self.with_damping_margin},
            "a23_a31": {"holds": self.criteria, "margin": self.criteria_margin},
            "hurwitz": self.hurwitz,
            "within_validity": self.within_validity,
        }


def destab_margin(smib: SmibMatrices) -> float:
    """LHS minus RHS of the AVR destabilization inequality."""
    lhs = abs(smib.b_sigma / smib.b_delta * smib.E_N * math.sin(smib.delta))
    e1 = smib.eps[smib.terminal]
    rhs = abs(smib.K_A * smib.beta[smib.terminal] * smib.eq_prime * math.sin(e1))
    return lhs - rhs


def stability_check(smib: SmibMatrices) -> StabilityReport:
    coeffs = char_poly(smib)
    eigs = _sorted(np.linalg.eigvals(smib.A))
    try:
        Om = omega_em(smib)
    except BeyondStaticLimit:
        Om = 0.0
    pair = em_pair(eigs, Om)
    a21, a22, a23, a31, a33 = smib.a21, smib.a22, smib.a23, smib.a31, smib.a33
    dm = destab_margin(smib)
    wd = a22 * (a22 * a33 + a21 + a33**2) + a23 * a31
    crit = a23 * a31
    const = coeffs[3]
    return StabilityReport(
        eigenvalues=tuple(eigs), em=pair, zeta=damping_ratio(pair[0]), Omega=Om,
        destab_cond=dm > 0, destab_margin=dm,
        constant_term=const > 0, constant_margin=const,
        with_damping=wd > 0, with_damping_margin=wd,
        criteria=crit > 0, criteria_margin=crit,
        hurwitz=bool(np.all(eigs.real < 0)),
        within_validity=abs(smib.delta) <= VALID_DELTA and smib.K_A >= VALID_KA,
    )


# --------------------------------------------------------------------------
# Closed-form loop zeros


@dataclass(frozen=True)
class ZeroResult:
    loop: str
    zeros: Tuple[complex, ...]
    nmp: bool
    limit: Optional[str] = None
    details: Dict[str, float] = field(default_factory=dict)


def _pair(radicand: float, shift: float) -> Tuple[complex, complex]:
    """Roots of ``s^2 + 2 shift s - radicand + shift^2 = 0``, i.e.
    ``-shift +- sqrt(shift^2 + radicand)``."""
    r = cmath.sqrt(shift * shift + radicand)
    return (-shift - r, -shift + r)


def _nmp(zs) -> bool:
    return any(z.real > 0 for z in zs)


def zero_pss_theta(smib: SmibMatrices) -> ZeroResult:
    """Zeros from the excitation input to the angle at ``smib.meas``.

    With ``D_m = 0`` this is the symmetric real pair ``+-sqrt(radicand)``;
    direct damping shifts both zeros by ``-a22/2``.
    """
    e2 = smib.eps[smib.meas]
    if abs(math.sin(e2)) < TRIG_TOL:
        return ZeroResult("theta_upss", (), nmp=False,
                          limit="no finite zeros: pair at +-infinity (eps2 -> 0)")
    k = smib.b_sigma / smib.M * smib.eq_prime * smib.E_N
    rad = k * (math.sin(smib.delta) * math.cos(e2) / math.sin(e2) - math.cos(smib.delta))
    zs = _pair(rad, smib.a22 / 2)
    return ZeroResult("theta_upss", zs, _nmp(zs), details={"radicand": rad})


def zero_pss_voltage(smib: SmibMatrices) -> ZeroResult:
    e2 = smib.eps[smib.meas]
    if abs(math.cos(e2)) < TRIG_TOL:
        return ZeroResult("V_upss", (), nmp=False,
                          limit="no finite zeros: pair at infinity (cos eps2 -> 0)")
    k = smib.b_sigma / smib.M * smib.eq_prime * smib.E_N
    mag2 = k * (math.cos(smib.delta) + math.sin(smib.delta) * math.sin(e2) / math.cos(e2))
    zs = _pair(-mag2, smib.a22 / 2)
    details = {"magnitude_sq": mag2}
    try:
        Om = omega_em(smib)
        details["near_mode"] = float(abs(math.sqrt(abs(mag2)) - Om) <= 0.05 * Om)
    except BeyondStaticLimit:
        pass
    return ZeroResult("V_upss", zs, _nmp(zs), details=details)


def zero_gov_theta(smib: SmibMatrices) -> ZeroResult:
    e2, e1 = smib.eps[smib.meas], smib.eps[smib.terminal]
    if abs(math.cos(e2)) < TRIG_TOL:
        return ZeroResult("theta_Pm", (), nmp=False, limit="zero at infinity (cos eps2 -> 0)")
    t2 = math.sin(e2) / math.cos(e2)
    T, bD, bS = smib.T_do, smib.b_delta, smib.b_sigma
    q = (-1.0 / (T * bD) * (bD + bS * (1 - smib.E_N / smib.eq_prime * t2 * math.sin(smib.delta)))
         - smib.K_A / T * smib.beta[smib.terminal] * (math.cos(e1) + t2 * math.sin(e1)))
    return ZeroResult("theta_Pm", (complex(q),), q > 0,
                      details={"K_A_coefficient": -smib.beta[smib.terminal] / T * (math.cos(e1) + t2 * math.sin(e1))})


def zero_gov_voltage(smib: SmibMatrices) -> ZeroResult:
    e2, e1 = smib.eps[smib.meas], smib.eps[smib.terminal]
    if abs(math.sin(e2)) < TRIG_TOL:
        side = "-infinity" if math.sin(smib.delta) > 0 else "+infinity"
        return ZeroResult("V_Pm", (), nmp=False, limit=f"zero at {side} (eps2 -> 0)")
    ct2 = math.cos(e2) / math.sin(e2)
    T, bD, bS = smib.T_do, smib.b_delta, smib.b_sigma
    q = (-1.0 / (T * bD) * (bD + bS * (1 + smib.E_N / smib.eq_prime * ct2 * math.sin(smib.delta)))
         - smib.K_A / T * smib.beta[smib.terminal] * (math.cos(e1) - ct2 * math.sin(e1)))
    return ZeroResult("V_Pm", (complex(q),), q > 0)


def _zero_poly(smib: SmibMatrices, c1: float, c3: float, d: float) -> np.ndarray:
    a21, a22, a23, a31, a33 = smib.a21, smib.a22, smib.a23, smib.a31, smib.a33
    b2, b3 = smib.b2, smib.b3
    return np.array([
        d,
        d * (a22 + a33) + c3 * b3,
        d * (a22 * a33 + a21) + c1 * b2 + c3 * a22 * b3,
        d * (a21 * a33 - a23 * a31) + c1 * a33 * b2 - c1 * a23 * b3 + c3 * a21 * b3 - c3 * a31 * b2,
    ])


def _roots(coeffs: np.ndarray) -> np.ndarray:
    c = np.array(coeffs, float)
    lead = np.max(np.abs(c))
    while len(c) > 1 and abs(c[0]) <= 1e-15 * lead:
        c = c[1:]
    return _sorted(np.roots(c)) if len(c) > 1 else np.array([], complex)


@dataclass(frozen=True)
class Verdict:
    holds: bool
    margin: float


@dataclass(frozen=True)
class PThetaResult:
    coeffs: Tuple[float, ...]
    zeros: Tuple[complex, ...]
    em_zeros: Tuple[complex, ...]
    cond1: Verdict
    cond2: Verdict
    destab_sum: Verdict
    conditions_disagree: bool
    minimum_phase: bool
    approx_imag: float
    abs_ge_omega: bool
    within_validity: bool
    reduced_degree: bool

    @property
    def monic(self) -> Tuple[float, ...]:
        return tuple(c / self.coeffs[0] for c in self.coeffs)


def zero_poly_p_theta(smib: SmibMatrices) -> PThetaResult:
    """Zero polynomial from the active-power injection at ``ctrl`` to the
    angle at ``meas``, plus the product, signed and summary conditions."""
    c1, c3, d = smib.c1, smib.c3, smib.d
    coeffs = _zero_poly(smib, c1, c3, d)
    zs = _roots(coeffs)
    try:
        Om = omega_em(smib)
    except BeyondStaticLimit:
        Om = 0.0
    em = em_pair(zs, Om) if len(zs) >= 2 else tuple(zs)
    b2, b3, a23, a31 = smib.b2, smib.b3, smib.a23, smib.a31
    cond1 = (c3 * b2 + d * a23) * (c1 * b3 + d * a31)
    cond2 = math.sin(smib.delta) * (c1 * b3 + d * a31)
    e1 = smib.eps[smib.terminal]
    if d != 0:
        lhs = abs(smib.T_do / d * c1 * b3 + smib.b_sigma / smib.b_delta * smib.E_N * math.sin(smib.delta))
    else:
        lhs = math.inf
    rhs = abs(smib.K_A * smib.beta[smib.terminal] * smib.eq_prime * math.sin(e1))
    summ = lhs - rhs
    approx = _approx_imag(smib)
    return PThetaResult(
        coeffs=tuple(coeffs), zeros=tuple(zs), em_zeros=tuple(em),
        cond1=Verdict(cond1 > 0, cond1), cond2=Verdict(cond2 > 0, cond2),
        destab_sum=Verdict(summ > 0, summ),
        conditions_disagree=(cond2 > 0) != (summ > 0),
        minimum_phase=bool(np.all(zs.real < 0)),
        approx_imag=approx,
        abs_ge_omega=bool(all(abs(z) >= Om * (1 - 1e-9) for z in em)),
        within_validity=abs(smib.delta) <= VALID_DELTA and smib.K_A >= VALID_KA,
        reduced_degree=d == 0,
    )


def _approx_imag(smib: SmibMatrices) -> float:
    """``sqrt(b'_12 E^2 cos(delta) / M)`` with ``b'_12`` the susceptance from
    the machine's internal node to the measurement node."""
    cd = math.cos(smib.delta)
    b12 = smib.b_from_machine_meas
    return math.sqrt(max(b12 / smib.M * smib.eq_prime**2 * cd, 0.0))


@dataclass(frozen=True)
class PVoltageResult:
    assumptions: str
    coeffs: Tuple[float, ...]
    zeros: Tuple[complex, ...]
    alpha1: Optional[float]
    alpha2: Optional[float]
    alpha1_closed: Optional[float]
    alpha1_terminal: float
    alpha2_approx: float
    q_same_bus: Optional[float]
    q_transfer: Optional[float]
    nmp: bool
    rhp_zero: Optional[float]
    omega_ratio: Optional[float]
    normalized: bool


def zero_poly_p_voltage(smib: SmibMatrices, assumptions: str = "none") -> PVoltageResult:
    """Zero polynomial from the injection at ``ctrl`` to the voltage at ``meas``.

    ``assumptions`` is ``"A2"`` (same bus), ``"A2+A3"`` (same bus, machine
    terminal) or ``"none"`` (full cubic with the direct term).
    """
    if assumptions not in ("A2", "A2+A3", "none"):
        raise ValueError(f"unknown assumption set {assumptions!r}")
    if assumptions != "none" and smib.meas != smib.ctrl:
        raise ValueError("same-bus assumption needs meas == ctrl")
    if assumptions == "A2+A3" and smib.meas != smib.terminal:
        raise ValueError("terminal assumption needs meas == ctrl == machine terminal")
    dv = 0.0 if assumptions != "none" else smib.dv
    coeffs = _zero_poly(smib, smib.c1v, smib.c3v, dv)
    if assumptions != "none":
        coeffs = coeffs[1:]
    zs = _roots(coeffs)

    E, T, bD, M = smib.eq_prime, smib.T_do, smib.b_delta, smib.M
    scale = E * E * T * bD / M
    e2, e3 = smib.eps[smib.meas], smib.eps[smib.ctrl]
    e13 = smib.eps[smib.ctrl] - smib.eps[smib.terminal]  # theta1 - theta3
    beta3 = smib.beta[smib.ctrl]
    den = math.sin(e3) - bD * smib.K_A / (beta3 * smib.bslash["1c"]) * math.sin(e13)

    alpha1 = alpha2 = None
    normalized = False
    lead = coeffs[0]
    if assumptions != "none" and abs(lead) > 1e-300:
        alpha1, alpha2 = coeffs[1] / lead, coeffs[2] / lead
        normalized = True
    alpha1_closed = None
    if abs(math.cos(e2)) > TRIG_TOL and abs(den) > TRIG_TOL:
        alpha1_closed = -scale * math.sin(e2) * math.cos(e3) / (math.cos(e2) * den)
    q_same = None
    if smib.meas == smib.ctrl and abs(den) > TRIG_TOL:
        q_same = scale * math.sin(e2) / den
    q_transfer = None
    if abs(math.tan(e3)) > TRIG_TOL and abs(math.cos(e2)) > TRIG_TOL:
        q_transfer = scale * math.tan(e2) / math.tan(e3)
    rhp = [z for z in zs if z.real > 0]
    rhp_zero = float(max(rhp, key=lambda z: z.real).real) if rhp else None
    try:
        Om = omega_em(smib)
        ratio = rhp_zero / Om if rhp_zero is not None else None
    except BeyondStaticLimit:
        ratio = None
    return PVoltageResult(
        assumptions=assumptions, coeffs=tuple(coeffs), zeros=tuple(zs),
        alpha1=alpha1, alpha2=alpha2, alpha1_closed=alpha1_closed,
        alpha1_terminal=-scale, alpha2_approx=-E * E * (smib.b_sigma + bD) / M,
        q_same_bus=q_same, q_transfer=q_transfer, nmp=bool(rhp),
        rhp_zero=rhp_zero, omega_ratio=ratio, normalized=normalized,
    )


# --------------------------------------------------------------------------
# Catalog


@dataclass(frozen=True)
class CatalogEntry:
    loop: str
    input: str
    output: str
    analytic: Tuple[complex, ...]
    numeric: Tuple[complex, ...]
    nmp: bool
    mismatch: float
    distance_to_mode: Optional[float]
    status: str = "ok"
    note: str = ""


@dataclass(frozen=True)
class ZeroCatalog:
    entries: Tuple[CatalogEntry, ...]
    em_mode: Optional[complex] = None
    Omega: Optional[float] = None

    def __len__(self):
        return len(self.entries)

    def by_loop(self, loop: str) -> CatalogEntry:
        for e in self.entries:
            if e.loop == loop:
                return e
        raise KeyError(loop)

    def to_dict(self) -> dict:
        return {
            "electromechanical_mode": None if self.em_mode is None else complex_list([self.em_mode])[0],
            "Omega": self.Omega,
            "loops": [{
                "loop": e.loop, "input": e.input, "output": e.output, "status": e.status,
                "note": e.note, "nmp": e.nmp, "max_relative_mismatch": e.mismatch,
                "distance_to_mode": e.distance_to_mode,
                "analytic": complex_list(e.analytic), "numeric": complex_list(e.numeric),
            } for e in self.entries],
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        rows = []
        for e in self.entries:
            pa, pb = match_sets(e.analytic, e.numeric)
            unmatched = [z for z in e.numeric if not np.any(pb == z)]
            for za, zn in zip(pa, pb):
                rows.append([e.loop, e.status, e.nmp, float(za.real), float(za.imag),
                             float(zn.real), float(zn.imag), float(abs(za - zn))])
            for zn in unmatched:
                rows.append([e.loop, e.status, e.nmp, "", "", float(zn.real), float(zn.imag), ""])
            if not len(e.analytic) and not len(e.numeric):
                rows.append([e.loop, e.status, e.nmp, "", "", "", "", ""])
        return csv_text(["loop", "status", "nmp", "analytic_re_rad_per_s", "analytic_im_rad_per_s",
                         "numeric_re_rad_per_s", "numeric_im_rad_per_s", "abs_delta"], rows)


def _entry(loop, inp, out, analytic: ZeroResult | Sequence[complex], model, em,
           note="") -> CatalogEntry:
    if isinstance(analytic, ZeroResult):
        an, limit = analytic.zeros, analytic.limit
    else:
        an, limit = tuple(analytic), None
    try:
        num = tuple(zeros_numeric(model, inp, out))
    except DegenerateChannel as exc:
        return CatalogEntry(loop, inp, out, tuple(an), (), False, math.nan, None,
                            status="unobservable", note=str(exc))
    if limit is not None:
        # the pencil still finds huge-but-finite zeros close to the limit
        mism = 0.0 if all(abs(z) > 1e6 for z in num) else math.inf
        status, note = "limit", limit
    else:
        mism = relative_mismatch(an, num)
        status = "ok"
    zs = num or an
    dist = min(abs(z - em) for z in zs) if (zs and em is not None) else None
    return CatalogEntry(loop, inp, out, tuple(an), num, any(z.real > 0 for z in zs),
                        mism, dist, status, note)


def catalog(model: Optional[StateSpaceModel], smib: Optional[SmibMatrices],
            loops: Optional[Sequence[str]] = None, meas: Optional[str] = None) -> ZeroCatalog:
    """Analytic and numeric zeros for each requested loop.

    ``meas`` may name the infinite bus, whose angle and voltage are fixed:
    every loop then reports an unobservable entry.
    """
    if model is None or model.A.size == 0 or smib is None:
        return ZeroCatalog(())
    loops = tuple(LOOPS if loops is None else loops)
    for lp in loops:
        if lp not in LOOPS:
            raise KeyError(f"unknown loop {lp!r}; choose from {', '.join(LOOPS)}")
    gen = model.op.machine if model.op is not None else model.states[0].split(":", 1)[1]
    inf_id = model.op.infinite if model.op is not None else None
    Om = None
    try:
        Om = omega_em(smib)
    except BeyondStaticLimit:
        pass
    em = em_pair(poles(model), Om or 0.0)[0]
    inputs = {"upss": f"Ef:{gen}", "Pm": f"Pm:{gen}", "P": f"P:{smib.ctrl}"}
    m = meas or smib.meas
    out = []
    for lp in loops:
        kind, src = lp.split("_")
        inp = inputs[src]
        outp = f"{kind}:{m}"
        if m == inf_id:
            out.append(CatalogEntry(lp, inp, outp, (), (), False, math.nan, None,
                                    status="unobservable",
                                    note="infinite-bus quantity is fixed; mode unobservable"))
            continue
        if lp == "theta_upss":
            res = zero_pss_theta(smib)
        elif lp == "V_upss":
            res = zero_pss_voltage(smib)
        elif lp == "theta_Pm":
            res = zero_gov_theta(smib)
        elif lp == "V_Pm":
            res = zero_gov_voltage(smib)
        elif lp == "theta_P":
            res = zero_poly_p_theta(smib).zeros
        else:
            res = zero_poly_p_voltage(smib, "none").zeros
        out.append(_entry(lp, inp, outp, res, model, em))
    return ZeroCatalog(tuple(out), em, Om)
