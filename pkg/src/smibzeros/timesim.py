"""Nonlinear time-domain simulation of the SMIB system.

The machine is the one-axis model, the regulator a first-order lag (pure
gain when ``T_e = 0``) and the optional POD loop drives an ideal active-power
injection at one bus.  Faults are large shunt susceptances; the network is
solved in closed form at every right-hand-side evaluation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from .netmodel import (
    Dispatch,
    NetworkModel,
    OperatingPoint,
    SteadyStateError,
    build_admittance,
    solve_smib_steady_state,
)
from .params import AvrParams, MachineParams
from .podctl import PodController

FAULT_SUSCEPTANCE = 1e4   # pu
LOW_VOLTAGE = 0.7         # pu, below which the actuator behaves as constant impedance
EVENT_KINDS = ("fault", "clear", "trip", "pm_step", "inject")


class VoltageCollapse(RuntimeError):
    """No algebraic network solution for the requested injection."""


class InsufficientRingdown(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    node: Optional[str] = None
    branch: Optional[str] = None
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.time < 0:
            raise ValueError("event times must be non-negative")
        if self.kind in ("fault", "clear", "inject") and self.node is None:
            raise ValueError(f"{self.kind} event needs a node")
        if self.kind == "trip" and self.branch is None:
            raise ValueError("trip event needs a branch name")

    def describe(self) -> str:
        target = self.node if self.node is not None else self.branch
        return f"{self.kind}:{target}" if target is not None else f"{self.kind}:{self.value}"


@dataclass(frozen=True)
class PodLoop:
    controller: PodController
    meas: str
    ctrl: str


@dataclass(frozen=True)
class Scenario:
    net: NetworkModel
    machine: MachineParams
    dispatch: Dispatch
    avr: Optional[AvrParams] = None      # None: constant field voltage
    pod: Optional[PodLoop] = None
    events: Tuple[Event, ...] = ()
    horizon: float = 15.0
    step: float = 1e-3
    field_limits: Optional[Tuple[float, float]] = None
    freeze_eq: bool = False

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise ValueError("events must be time-ordered")
        if not self.step > 0 or not self.horizon > 0:
            raise ValueError("step and horizon must be positive")
        inj = {e.node for e in self.events if e.kind == "inject"}
        if self.pod is not None:
            inj.add(self.pod.ctrl)
        if len(inj) > 1:
            raise ValueError(f"only one actuator bus supported, got {sorted(inj)}")

    @property
    def K_A(self) -> float:
        return self.avr.K_A if self.avr is not None else 0.0

    @property
    def actuator(self) -> Optional[str]:
        if self.pod is not None:
            return self.pod.ctrl
        return next((e.node for e in self.events if e.kind == "inject"), None)


@dataclass
class TimeTrace:
    t: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    eq_prime: np.ndarray
    e_f: np.ndarray
    V: Dict[str, np.ndarray]
    theta: Dict[str, np.ndarray]
    p_inj: np.ndarray
    markers: List[Tuple[float, str]]
    delta_ref: float
    op: OperatingPoint
    error: Optional[str] = None

    def channel(self, name: str) -> np.ndarray:
        if name in ("delta", "omega", "eq_prime", "e_f", "p_inj"):
            return getattr(self, name)
        kind, _, node = name.partition(":")
        if kind == "V":
            return self.V[node]
        if kind == "theta":
            return self.theta[node]
        raise KeyError(name)

    @property
    def last_event_time(self) -> float:
        return self.markers[-1][0] if self.markers else 0.0

    def columns(self) -> Tuple[List[str], List[np.ndarray]]:
        names = ["t_s", "delta_rad", "omega_rad_per_s", "eq_prime_pu", "e_f_pu", "p_inj_pu"]
        cols = [self.t, self.delta, self.omega, self.eq_prime, self.e_f, self.p_inj]
        for k in sorted(self.V):
            names += [f"V_{k}_pu", f"theta_{k}_rad"]
            cols += [self.V[k], self.theta[k]]
        return names, cols


class _Topology:
    """Network solution for fixed topology: node phasors are affine in the
    internal and infinite-bus phasors plus the actuator current."""

    def __init__(self, net: NetworkModel, machine: MachineParams, nodes: Sequence[str],
                 actuator: Optional[str]):
        gen = net.machines[0].id
        Y = build_admittance(net, {gen: machine})
        alg = list(Y.algebraic)
        dyn = list(Y.dynamic)
        Ytt = Y.matrix[np.ix_(alg, alg)]
        Ytd = Y.matrix[np.ix_(alg, dyn)]
        try:
            Z = np.linalg.inv(Ytt)
        except np.linalg.LinAlgError as exc:
            raise VoltageCollapse(f"singular network: {exc}") from exc
        Ka = -Z @ Ytd
        pos = {Y.order[i]: j for j, i in enumerate(alg)}
        self.nodes = list(nodes)
        self.ka = {k: (complex(Ka[pos[k], 0]), complex(Ka[pos[k], 1])) for k in self.nodes}
        self.act = actuator
        if actuator is not None:
            ja = pos[actuator]
            self.z = {k: complex(Z[pos[k], ja]) for k in self.nodes}
        self.E_N = net.infinite.voltage

    def solve(self, e: complex, p: float) -> Dict[str, complex]:
        base = {k: a * e + b * self.E_N for k, (a, b) in self.ka.items()}
        if self.act is None or p == 0.0:
            return base
        a, z = base[self.act], self.z[self.act]
        current = self._actuator_current(a, z, p)
        return {k: base[k] + self.z[k] * current for k in self.nodes}

    @staticmethod
    def _actuator_current(a: complex, z: complex, p: float) -> complex:
        v = a
        lin = a / (1.0 - z * p / LOW_VOLTAGE**2)
        if abs(lin) < LOW_VOLTAGE:
            return p * lin / LOW_VOLTAGE**2
        for _ in range(100):
            if v == 0:
                break
            v_new = a + z * p / v.conjugate()
            if abs(v_new - v) <= 1e-14 * max(1.0, abs(v_new)):
                return p / v_new.conjugate()
            v = v_new
        raise VoltageCollapse(f"no network solution for {p:.4g} pu injection")


class _System:
    def __init__(self, sc: Scenario, op: OperatingPoint, v_ref: Optional[float]):
        self.sc = sc
        m = sc.machine
        self.M, self.D, self.T = m.M, m.D_m, m.T_do
        self.kd = m.x_d / m.x_d_prime
        self.kx = m.x_delta / m.x_d_prime
        self.bdp = m.b_d_prime
        self.term = sc.net.machines[0].terminal
        self.K_A = sc.K_A
        self.T_e = sc.avr.T_e if sc.avr is not None else 0.0
        self.v_ref = v_ref
        self.pm = op.p_e
        self.p0 = 0.0
        self.ef0 = op.e_f
        self.limits = sc.field_limits
        nodes = sorted(op.V)
        self.nodes = nodes
        self.net = sc.net
        self.topo = _Topology(self.net, m, nodes, sc.actuator)
        if sc.pod is not None:
            c = sc.pod.controller
            self.Ak, self.bk, self.ck = c.state_space()
            self.kpod = c.K_POD
            self.meas = sc.pod.meas
            self.theta_m0 = op.theta[self.meas]
        else:
            self.Ak = None

    def rebuild(self):
        self.topo = _Topology(self.net, self.sc.machine, self.nodes, self.sc.actuator)

    def apply(self, ev: Event):
        if ev.kind == "fault":
            self.net = self.net.with_shunt(ev.node, -1j * FAULT_SUSCEPTANCE)
        elif ev.kind == "clear":
            self.net = self.net.with_shunt(ev.node, 1j * FAULT_SUSCEPTANCE)
        elif ev.kind == "trip":
            self.net = self.net.without_branch(ev.branch)
        elif ev.kind == "pm_step":
            self.pm += ev.value
            return
        elif ev.kind == "inject":
            self.p0 = ev.value
            return
        self.rebuild()

    def _ef_cmd(self, v1: float) -> float:
        ef = self.K_A * (self.v_ref - v1)
        if self.limits is not None:
            ef = min(max(ef, self.limits[0]), self.limits[1])
        return ef

    def algebraic(self, x):
        delta, _, eq = x[0], x[1], x[2]
        p = self.p0
        if self.Ak is not None:
            p -= self.kpod * float(self.ck @ x[4:])
        v = self.topo.solve(eq * cmath.exp(1j * delta), p)
        return v, p

    def rhs(self, x) -> np.ndarray:
        delta, omega, eq, ef = x[0], x[1], x[2], x[3]
        v, _ = self.algebraic(x)
        v1 = v[self.term]
        rot = cmath.exp(1j * delta) * v1.conjugate()
        pe = self.bdp * eq * rot.imag
        if self.v_ref is None:
            ef_used, def_ = ef, 0.0
        elif self.T_e == 0.0:
            ef_used, def_ = self._ef_cmd(abs(v1)), 0.0
        else:
            ef_used, def_ = ef, (self._ef_cmd(abs(v1)) - ef) / self.T_e
        dx = np.empty_like(x)
        dx[0] = omega
        dx[1] = (self.pm - pe - self.D * omega) / self.M
        dx[2] = 0.0 if self.sc.freeze_eq else (-self.kd * eq + self.kx * rot.real + ef_used) / self.T
        dx[3] = def_
        if self.Ak is not None:
            y = cmath.phase(v[self.meas]) - self.theta_m0
            dx[4:] = self.Ak @ x[4:] + self.bk * y
        return dx

    def outputs(self, x):
        v, p = self.algebraic(x)
        ef = x[3]
        if self.v_ref is not None and self.T_e == 0.0:
            ef = self._ef_cmd(abs(v[self.term]))
        return v, p, ef


def initial_state(sc: Scenario) -> Tuple[OperatingPoint, Optional[float], np.ndarray]:
    op = solve_smib_steady_state(sc.net, sc.machine, sc.dispatch, K_A=sc.K_A)
    v_ref = None
    if sc.avr is not None and sc.K_A > 0:
        v_ref = sc.avr.v_ref if sc.avr.v_ref is not None else op.V[sc.net.machines[0].terminal] + op.e_f / sc.K_A
    n = 4 + (4 if sc.pod is not None else 0)
    x0 = np.zeros(n)
    x0[0], x0[2], x0[3] = op.delta, op.eq_prime, op.e_f
    return op, v_ref, x0


def rhs(x: np.ndarray, sc: Scenario, phase: str = "pre-fault") -> np.ndarray:
    """Right-hand side at ``x`` for the scenario's topology in ``phase``.

    ``phase`` is "pre-fault", "faulted" (every fault event applied) or
    "post-trip" (all events applied).
    """
    op, v_ref, _ = initial_state(sc)
    sysm = _System(sc, op, v_ref)
    if phase not in ("pre-fault", "faulted", "post-trip"):
        raise ValueError(f"unknown topology phase {phase!r}")
    for ev in sc.events:
        if phase == "post-trip" or (phase == "faulted" and ev.kind == "fault"):
            sysm.apply(ev)
    return sysm.rhs(np.asarray(x, float))


def _post_reference(sc: Scenario, op: OperatingPoint, v_ref: Optional[float]) -> float:
    net = sc.net
    pm = op.p_e
    for ev in sc.events:
        if ev.kind == "fault":
            net = net.with_shunt(ev.node, -1j * FAULT_SUSCEPTANCE)
        elif ev.kind == "clear":
            net = net.with_shunt(ev.node, 1j * FAULT_SUSCEPTANCE)
        elif ev.kind == "trip":
            net = net.without_branch(ev.branch)
        elif ev.kind == "pm_step":
            pm += ev.value
    if v_ref is not None:
        disp = Dispatch(pm, v_ref=v_ref)
    else:
        disp = Dispatch(pm, field_voltage=op.e_f)
    try:
        return solve_smib_steady_state(net, sc.machine, disp, K_A=sc.K_A).delta
    except (SteadyStateError, ValueError, np.linalg.LinAlgError):
        return op.delta


def simulate(sc: Scenario) -> TimeTrace:
    """Fixed-step RK4 with steps landing exactly on event times."""
    op, v_ref, x = initial_state(sc)
    sysm = _System(sc, op, v_ref)
    nodes = sysm.nodes
    T, D, E, F, P = [], [], [], [], []
    Vs = {k: [] for k in nodes}
    Th = {k: [] for k in nodes}
    markers: List[Tuple[float, str]] = []

    def record(t, x):
        v, p, ef = sysm.outputs(x)
        T.append(t)
        D.append(x[0])
        E.append(x[2])
        F.append(ef)
        W.append(x[1])
        P.append(p)
        for k in nodes:
            Vs[k].append(abs(v[k]))
            Th[k].append(cmath.phase(v[k]))

    W: List[float] = []
    error = None
    t = 0.0
    record(t, x)
    bounds = sorted({e.time for e in sc.events if 0 < e.time < sc.horizon} | {sc.horizon})
    pending = list(sc.events)
    while pending and pending[0].time <= 0.0:
        ev = pending.pop(0)
        sysm.apply(ev)
        markers.append((0.0, ev.describe()))
    try:
        for tb in bounds:
            n = max(1, math.ceil((tb - t) / sc.step - 1e-9))
            h = (tb - t) / n
            t0 = t
            for i in range(1, n + 1):
                k1 = sysm.rhs(x)
                k2 = sysm.rhs(x + 0.5 * h * k1)
                k3 = sysm.rhs(x + 0.5 * h * k2)
                k4 = sysm.rhs(x + h * k3)
                x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                if not np.all(np.isfinite(x)):
                    raise FloatingPointError(f"non-finite state at t={t0 + i * h:.6g}")
                t = tb if i == n else t0 + i * h
                record(t, x)
            applied = False
            while pending and pending[0].time <= tb + 1e-12:
                ev = pending.pop(0)
                sysm.apply(ev)
                markers.append((tb, ev.describe()))
                applied = True
            if applied and tb < sc.horizon:
                record(tb, x)
    except (VoltageCollapse, FloatingPointError) as exc:
        error = str(exc)

    return TimeTrace(
        t=np.array(T), delta=np.array(D), omega=np.array(W), eq_prime=np.array(E),
        e_f=np.array(F), V={k: np.array(v) for k, v in Vs.items()},
        theta={k: np.array(v) for k, v in Th.items()}, p_inj=np.array(P),
        markers=markers, delta_ref=_post_reference(sc, op, v_ref), op=op, error=error,
    )


# --------------------------------------------------------------------------
# Post-processing


def detect_loss_of_synchrony(trace, delta_ref: Optional[float] = None) -> Optional[float]:
    """First time ``|delta - delta_ref| > pi`` (linearly interpolated)."""
    if isinstance(trace, TimeTrace):
        t, d = trace.t, trace.delta
        ref = trace.delta_ref if delta_ref is None else delta_ref
    else:
        t, d = (np.asarray(a, float) for a in trace)
        ref = 0.0 if delta_ref is None else delta_ref
    dev = np.abs(d - ref) - math.pi
    idx = np.nonzero(dev > 0)[0]
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0:
        return float(t[0])
    f0, f1 = dev[i - 1], dev[i]
    return float(t[i - 1] + (t[i] - t[i - 1]) * (-f0) / (f1 - f0))


@dataclass(frozen=True)
class DampingEstimate:
    zeta: float
    sigma: float
    omega_d: float
    residual: float
    peaks: int


def damping_estimate(trace, channel: str = "omega", t_start: Optional[float] = None,
                     t_end: Optional[float] = None) -> DampingEstimate:
    """Log-decrement fit on successive half-cycle amplitudes.

    Amplitudes are differences between neighbouring extrema, which removes
    any constant offset; extrema are refined by parabolic interpolation.
    """
    if isinstance(trace, TimeTrace):
        t, x = trace.t, trace.channel(channel)
        if t_start is None:
            t_start = trace.last_event_time
    else:
        t, x = (np.asarray(a, float) for a in trace)
    t_start = t[0] if t_start is None else t_start
    t_end = t[-1] if t_end is None else t_end
    sel = (t >= t_start) & (t <= t_end)
    t, x = t[sel], x[sel]
    if t.size < 5:
        raise InsufficientRingdown("selected window holds fewer than 5 samples")
    # drop duplicated time stamps left by event records
    keep = np.concatenate([[True], np.diff(t) > 0])
    t, x = t[keep], x[keep]
    ext = []
    for sgn in (1.0, -1.0):
        idx, _ = find_peaks(sgn * x)
        for i in idx:
            if 0 < i < len(x) - 1:
                y0, y1, y2 = x[i - 1], x[i], x[i + 1]
                den = y0 - 2 * y1 + y2
                off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
                h = t[i + 1] - t[i]
                ext.append((t[i] + off * h, y1 - 0.25 * (y0 - y2) * off, sgn))
    ext.sort()
    alt: List[Tuple[float, float, float]] = []
    for e in ext:
        if alt and alt[-1][2] == e[2]:
            if e[2] * e[1] > e[2] * alt[-1][1]:
                alt[-1] = e
        else:
            alt.append(e)
    n_peaks = sum(1 for e in alt if e[2] > 0)
    if n_peaks < 3 or len(alt) < 4:
        raise InsufficientRingdown(f"only {n_peaks} peaks in the selected window")
    tm = np.array([(alt[i][0] + alt[i + 1][0]) / 2 for i in range(len(alt) - 1)])
    amp = np.array([abs(alt[i + 1][1] - alt[i][1]) for i in range(len(alt) - 1)])
    good = amp > 0
    tm, amp = tm[good], amp[good]
    half = np.diff([a[0] for a in alt])
    omega_d = math.pi / float(np.mean(half))
    coef, res, *_ = np.polyfit(tm, np.log(amp), 1, full=True)
    sigma = float(coef[0])
    resid = float(math.sqrt(res[0] / len(tm))) if len(res) else 0.0
    zeta = -sigma / math.hypot(sigma, omega_d)
    return DampingEstimate(zeta, sigma, omega_d, resid, n_peaks)


def first_speed_reversal(trace: TimeTrace, after: Optional[float] = None) -> Optional[float]:
    """First time after ``after`` (default: last event) at which the speed
    deviation changes sign."""
    t0 = trace.last_event_time if after is None else after
    sel = trace.t > t0
    t, w = trace.t[sel], trace.omega[sel]
    s = np.sign(w)
    for i in range(1, len(s)):
        if s[i] != 0 and s[i - 1] != 0 and s[i] != s[i - 1]:
            return float(t[i])
    return None


def classify(trace: TimeTrace, settle: float = 1.0) -> Dict[str, object]:
    """Summarize a post-fault run.

    ``first_swing``: synchrony lost before the first speed reversal after
    the last event.  ``later_instability``: the first swing is survived but
    synchrony is lost later or the ringdown grows.  ``stable``: bounded with
    non-negative ringdown damping.
    """
    los = detect_loss_of_synchrony(trace)
    rev = first_speed_reversal(trace)
    out: Dict[str, object] = {"loss_of_synchrony_s": los, "first_reversal_s": rev,
                              "error": trace.error}
    zeta = None
    try:
        est = damping_estimate(trace, "omega", t_start=trace.last_event_time + settle,
                               t_end=los if los is not None else None)
        zeta = est.zeta
        out["ringdown_zeta"] = est.zeta
        out["ringdown_residual"] = est.residual
    except InsufficientRingdown:
        out["ringdown_zeta"] = None
    if los is not None and (rev is None or los < rev):
        out["verdict"] = "first_swing"
    elif los is not None or (zeta is not None and zeta < 0) or trace.error:
        out["verdict"] = "later_instability"
    else:
        out["verdict"] = "stable"
    return out


def with_clearing(sc: Scenario, clearing: float) -> Scenario:
    """Shift every event after the first fault so they occur ``clearing``
    seconds after it."""
    faults = [e for e in sc.events if e.kind == "fault"]
    if not faults:
        raise ValueError("scenario has no fault event")
    tf = faults[0].time
    moved = []
    for e in sc.events:
        keep = e.time < tf or (e.time == tf and e.kind == "fault")
        moved.append(e if keep else replace(e, time=tf + clearing))
    return replace(sc, events=tuple(sorted(moved, key=lambda e: e.time)))


def survives(sc: Scenario, clearing: float) -> bool:
    tr = simulate(with_clearing(sc, clearing))
    return tr.error is None and detect_loss_of_synchrony(tr) is None


def critical_clearing_time(sc: Scenario, lo: float = 0.0, hi: float = 0.5,
                           tol: float = 1e-3) -> Optional[float]:
    """Bisection on the clearing time between a surviving ``lo`` and a
    failing ``hi``; ``None`` if ``hi`` still survives."""
    if survives(sc, hi):
        return None
    if lo > 0 and not survives(sc, lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if survives(sc, mid):
            lo = mid
        else:
            hi = mid
    return lo
