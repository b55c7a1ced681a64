"""Per-unit network representation, Kron reduction and the SMIB steady state.

Node ordering everywhere is (machine nodes, algebraic nodes, infinite node).
For the reduction the infinite node is treated as a dynamic node with a
frozen phasor, so the dynamic set is machines + infinite bus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .params import MachineParams

MACHINE = "machine"
ALGEBRAIC = "algebraic"
INFINITE = "infinite"
NODE_KINDS = (MACHINE, ALGEBRAIC, INFINITE)


class NetworkError(ValueError):
    """Invalid network description or unsupported topology."""


class SingularNetworkError(NetworkError):
    def __init__(self, message: str, nodes: Sequence[str] = ()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class SteadyStateError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class BeyondStaticLimit(SteadyStateError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    shunt: complex = 0j          # y_i = g_i - j b_i
    terminal: Optional[str] = None  # machine nodes only
    voltage: float = 1.0         # infinite node only, |E_N|

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise NetworkError(f"node {self.id!r}: unknown kind {self.kind!r}")
        if self.kind == MACHINE and self.terminal is None:
            raise NetworkError(f"machine node {self.id!r} needs a terminal node")


@dataclass(frozen=True)
class Branch:
    from_id: str
    to_id: str
    x: float
    r: float = 0.0
    name: Optional[str] = None

    @property
    def admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class NetworkModel:
    nodes: Tuple[Node, ...]
    branches: Tuple[Branch, ...]
    f_nom: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "branches", tuple(self.branches))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate node ids")
        known = set(ids)
        infinite = [n for n in self.nodes if n.kind == INFINITE]
        if len(infinite) != 1:
            raise NetworkError(f"need exactly one infinite node, found {len(infinite)}")
        for b in self.branches:
            if b.from_id not in known or b.to_id not in known:
                raise NetworkError(f"branch {b.name or (b.from_id, b.to_id)} references unknown node")
            if b.from_id == b.to_id:
                raise NetworkError(f"branch {b.name} is a self loop at {b.from_id!r}")
            if abs(complex(b.r, b.x)) == 0.0:
                raise NetworkError(
                    f"branch {b.name or (b.from_id, b.to_id)} has zero impedance"
                )
        for n in self.nodes:
            if n.kind == MACHINE:
                if n.terminal not in known or self.node(n.terminal).kind != ALGEBRAIC:
                    raise NetworkError(f"machine {n.id!r}: terminal must be an algebraic node")
        self._check_connected()

    def _check_connected(self):
        adj: Dict[str, set] = {n.id: set() for n in self.nodes}
        for b in self.branches:
            adj[b.from_id].add(b.to_id)
            adj[b.to_id].add(b.from_id)
        for n in self.machines:
            adj[n.id].add(n.terminal)
            adj[n.terminal].add(n.id)
        start = self.nodes[0].id
        seen, stack = {start}, [start]
        while stack:
            for k in adj[stack.pop()]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        if len(seen) != len(self.nodes):
            missing = sorted(set(adj) - seen)
            raise NetworkError(f"network is not connected; unreachable: {missing}")

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def machines(self) -> List[Node]:
        return [n for n in self.nodes if n.kind == MACHINE]

    @property
    def algebraic(self) -> List[Node]:
        return [n for n in self.nodes if n.kind == ALGEBRAIC]

    @property
    def infinite(self) -> Node:
        return next(n for n in self.nodes if n.kind == INFINITE)

    @property
    def order(self) -> Tuple[str, ...]:
        return tuple(n.id for n in self.machines + self.algebraic + [self.infinite])

    def without_branch(self, name: str) -> "NetworkModel":
        kept = tuple(b for b in self.branches if b.name != name)
        if len(kept) == len(self.branches):
            raise NetworkError(f"no branch named {name!r}")
        return replace(self, branches=kept)

    def with_shunt(self, node_id: str, y: complex) -> "NetworkModel":
        """Copy with ``y`` added to the shunt admittance of ``node_id``."""
        nodes = tuple(replace(n, shunt=n.shunt + y) if n.id == node_id else n
                      for n in self.nodes)
        return replace(self, nodes=nodes)


# --------------------------------------------------------------------------
# Admittance matrices


@dataclass(frozen=True)
class AdmittanceMatrix:
    matrix: np.ndarray
    order: Tuple[str, ...]
    dynamic: Tuple[int, ...]
    algebraic: Tuple[int, ...]

    def index(self, node_id: str) -> int:
        return self.order.index(node_id)


def build_admittance(net: NetworkModel,
                     machines: Optional[Mapping[str, MachineParams]] = None) -> AdmittanceMatrix:
    """Nodal admittance matrix ``Y`` in (machines, algebraic, infinite) order.

    With ``machines`` given, each machine node is tied to its terminal by
    ``b'_d`` and carries the shunt ``b_Delta``, so ``Y_dd = -j(b'_d + b_Delta)``.
    Parallel branches are summed.
    """
    order = net.order
    idx = {k: i for i, k in enumerate(order)}
    Y = np.zeros((len(order), len(order)), dtype=complex)
    for n in net.nodes:
        Y[idx[n.id], idx[n.id]] += n.shunt
    for b in net.branches:
        i, k = idx[b.from_id], idx[b.to_id]
        y = b.admittance
        Y[i, i] += y
        Y[k, k] += y
        Y[i, k] -= y
        Y[k, i] -= y
    if machines:
        for n in net.machines:
            mp = machines[n.id]
            i, k = idx[n.id], idx[n.terminal]
            y = -1j * mp.b_d_prime
            Y[i, i] += y - 1j * mp.b_delta
            Y[k, k] += y
            Y[i, k] -= y
            Y[k, i] -= y
    n_m = len(net.machines)
    n_a = len(net.algebraic)
    dynamic = tuple(range(n_m)) + (len(order) - 1,)
    algebraic = tuple(range(n_m, n_m + n_a))
    return AdmittanceMatrix(Y, order, dynamic, algebraic)


@dataclass(frozen=True)
class WeightedAdmittance:
    matrix: np.ndarray
    order: Tuple[str, ...]
    dynamic: Tuple[int, ...]
    algebraic: Tuple[int, ...]
    U: np.ndarray
    phi: np.ndarray

    def _block(self, rows, cols):
        return self.matrix[np.ix_(rows, cols)]

    @property
    def dd(self):
        return self._block(self.dynamic, self.dynamic)

    @property
    def dt(self):
        return self._block(self.dynamic, self.algebraic)

    @property
    def td(self):
        return self._block(self.algebraic, self.dynamic)

    @property
    def tt(self):
        return self._block(self.algebraic, self.algebraic)

    @property
    def sizes(self) -> Tuple[int, int]:
        return len(self.dynamic), len(self.algebraic)

    def power(self) -> np.ndarray:
        return self.matrix.sum(axis=1)


def weight_admittance(Y: AdmittanceMatrix, U: Sequence[float],
                      phi: Sequence[float]) -> WeightedAdmittance:
    U = np.asarray(U, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = len(Y.order)
    if U.shape != (n,) or phi.shape != (n,):
        raise ValueError(f"voltage profile must have length {n}")
    if np.any(U <= 0):
        raise ValueError("voltage amplitudes must be positive")
    v = U * np.exp(1j * phi)
    W = v[:, None] * np.conj(Y.matrix) * np.conj(v)[None, :]
    return WeightedAdmittance(W, Y.order, Y.dynamic, Y.algebraic, U, phi)


def injected_power(net: NetworkModel, U: Sequence[float], phi: Sequence[float],
                   machines: Optional[Mapping[str, MachineParams]] = None) -> np.ndarray:
    """Complex injections from the explicit sine/cosine sums, in ``net.order``.

    Built straight from the branch list so it stays independent of the matrix
    assembly used by :func:`weight_admittance`.
    """
    order = net.order
    idx = {k: i for i, k in enumerate(order)}
    U = np.asarray(U, dtype=float)
    phi = np.asarray(phi, dtype=float)
    pairs: Dict[Tuple[int, int], complex] = {}
    self_y = np.array([0j] * len(order))
    for n in net.nodes:
        self_y[idx[n.id]] += n.shunt

    def link(i, k, y):
        pairs[(i, k)] = pairs.get((i, k), 0j) + y
        pairs[(k, i)] = pairs.get((k, i), 0j) + y
        self_y[i] += y
        self_y[k] += y

    for b in net.branches:
        link(idx[b.from_id], idx[b.to_id], b.admittance)
    if machines:
        for n in net.machines:
            mp = machines[n.id]
            link(idx[n.id], idx[n.terminal], -1j * mp.b_d_prime)
            self_y[idx[n.id]] += -1j * mp.b_delta

    g_ii, b_ii = self_y.real, -self_y.imag
    P = g_ii * U**2
    Q = b_ii * U**2
    for (i, k), y in pairs.items():
        g, b = y.real, -y.imag
        dphi = phi[i] - phi[k]
        P[i] += U[i] * U[k] * (b * math.sin(dphi) - g * math.cos(dphi))
        Q[i] -= U[i] * U[k] * (b * math.cos(dphi) + g * math.sin(dphi))
    return P + 1j * Q


@dataclass(frozen=True)
class KronReduction:
    red: np.ndarray
    shunt: np.ndarray
    A: np.ndarray
    dynamic_order: Tuple[str, ...]


def kron_reduce(W: WeightedAdmittance) -> KronReduction:
    """Eliminate algebraic nodes: ``Y_red``, ``Y_sharp = diag(Y_red 1)`` and
    ``Y_A = Y_red - Y_sharp``."""
    tt = W.tt
    if tt.size and np.linalg.cond(tt) > 1e13:
        raise SingularNetworkError(
            "algebraic subnetwork is singular (islanded without shunt)",
            _islanded_nodes(W),
        )
    red = W.dd - W.dt @ np.linalg.solve(tt, W.td) if tt.size else W.dd.copy()
    shunt = np.diag(red.sum(axis=1))
    return KronReduction(red, shunt, red - shunt,
                         tuple(W.order[i] for i in W.dynamic))


def _islanded_nodes(W: WeightedAdmittance) -> List[str]:
    alg = list(W.algebraic)
    tt = np.abs(W.tt) > 0
    anchored = np.abs(W.td).sum(axis=1) > 0
    comp = [-1] * len(alg)
    groups = []
    for s in range(len(alg)):
        if comp[s] >= 0:
            continue
        comp[s] = len(groups)
        members, stack = [s], [s]
        while stack:
            i = stack.pop()
            for k in np.nonzero(tt[i])[0]:
                if comp[k] < 0:
                    comp[k] = comp[s]
                    members.append(k)
                    stack.append(k)
        groups.append(members)
    bad = [W.order[alg[i]] for g in groups if not anchored[g].any() for i in g]
    return sorted(bad) or [W.order[i] for i in alg]


# --------------------------------------------------------------------------
# SMIB corridor helpers


@dataclass(frozen=True)
class Corridor:
    """Series chain machine -> terminal -> ... -> infinite bus.

    ``x_from_machine[i]`` is the series reactance between the machine's
    internal node and node ``i`` (including ``x'_d``).
    """

    machine: str
    nodes: Tuple[str, ...]
    x_from_machine: Mapping[str, float]
    x_total: float

    @property
    def b_sigma(self) -> float:
        return 1.0 / self.x_total

    def b_from_machine(self, i: str) -> float:
        return 1.0 / self.x_from_machine[i]

    def b_to_infinite(self, i: str) -> float:
        return 1.0 / (self.x_total - self.x_from_machine[i])

    def beta(self, i: str) -> float:
        return self.x_to_inf(i) / self.x_total

    def x_to_inf(self, i: str) -> float:
        return self.x_total - self.x_from_machine[i]

    def closer(self, i: str, k: str) -> bool:
        return self.x_from_machine[i] <= self.x_from_machine[k]

    def bslash(self, i: str, k: str) -> float:
        """``b'_1i + b'_1i b_kN / b_ik + b_kN`` with ``i`` the node closer to
        the machine; the coinciding-node limit is ``b'_1i + b_iN``."""
        if not self.closer(i, k):
            i, k = k, i
        b1i, bkN = self.b_from_machine(i), self.b_to_infinite(k)
        x_ik = self.x_from_machine[k] - self.x_from_machine[i]
        if x_ik == 0.0:
            return b1i + self.b_to_infinite(i)
        return b1i + b1i * bkN * x_ik + bkN


def corridor(net: NetworkModel, machine: MachineParams) -> Corridor:
    """Walk the lossless series chain from the machine to the infinite bus.

    Rejects meshes, lossy corridor branches and interior shunts, which the
    SMIB closed forms do not cover.
    """
    if len(net.machines) != 1:
        raise NetworkError("SMIB analysis needs exactly one machine node")
    gen = net.machines[0]
    for n in net.algebraic:
        if n.shunt != 0:
            raise NetworkError(f"SMIB closed forms need shunt-free corridor; node {n.id!r}")
    merged: Dict[frozenset, complex] = {}
    for b in net.branches:
        if gen.id in (b.from_id, b.to_id):
            raise NetworkError(f"branch {b.name!r} touches the machine node; use its terminal")
        if b.r != 0:
            raise NetworkError(f"SMIB closed forms need a lossless corridor; branch {b.name!r} has r={b.r}")
        key = frozenset((b.from_id, b.to_id))
        merged[key] = merged.get(key, 0j) + b.admittance
    adj: Dict[str, Dict[str, float]] = {n.id: {} for n in net.nodes if n.kind != MACHINE}
    for key, y in merged.items():
        i, k = tuple(key)
        x = -1.0 / y.imag
        adj[i][k] = x
        adj[k][i] = x
    inf_id = net.infinite.id
    path, x_acc = [gen.terminal], {gen.terminal: machine.x_d_prime}
    prev, cur = None, gen.terminal
    while cur != inf_id:
        nxt = [k for k in adj[cur] if k != prev]
        if len(nxt) != 1 or (cur != gen.terminal and len(adj[cur]) != 2):
            raise NetworkError(f"SMIB corridor is not a simple chain at node {cur!r}")
        k = nxt[0]
        if k in x_acc:
            raise NetworkError("SMIB corridor contains a loop")
        x_acc[k] = x_acc[cur] + adj[cur][k]
        prev, cur = cur, k
        if cur != inf_id:
            path.append(cur)
    if len(path) != len(net.algebraic):
        raise NetworkError("algebraic nodes off the machine-infinite chain")
    x_total = x_acc.pop(inf_id)
    return Corridor(gen.id, tuple(path), x_acc, x_total)


# --------------------------------------------------------------------------
# Operating point


@dataclass(frozen=True)
class OperatingPoint:
    machine: str
    delta: float
    eq_prime: float
    e_f: float
    E_N: float
    V: Mapping[str, float]
    theta: Mapping[str, float]
    p_e: float
    q_e: float
    K_A: float = 0.0
    v_ref: Optional[float] = None
    infinite: str = "INF"

    @property
    def eps(self) -> Dict[str, float]:
        return {k: self.delta - t for k, t in self.theta.items()}

    @property
    def voltages(self) -> Dict[str, complex]:
        out = {k: self.V[k] * complex(math.cos(self.theta[k]), math.sin(self.theta[k]))
               for k in self.V}
        out[self.machine] = self.eq_prime * complex(math.cos(self.delta), math.sin(self.delta))
        out[self.infinite] = complex(self.E_N, 0.0)
        return out

    def profile(self, order: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
        v = self.voltages
        ph = np.array([v[k] for k in order])
        return np.abs(ph), np.angle(ph)


@dataclass(frozen=True)
class Dispatch:
    """Active power target plus exactly one voltage/field condition."""

    p_e: float
    terminal_voltage: Optional[float] = None
    v_ref: Optional[float] = None
    field_voltage: Optional[float] = None
    eq_prime: Optional[float] = None

    def __post_init__(self):
        given = [k for k in ("terminal_voltage", "v_ref", "field_voltage", "eq_prime")
                 if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(
                "dispatch needs exactly one of terminal_voltage, v_ref, field_voltage, eq_prime"
            )

    @property
    def mode(self) -> str:
        return next(k for k in ("terminal_voltage", "v_ref", "field_voltage", "eq_prime")
                    if getattr(self, k) is not None)


def algebraic_voltages(net: NetworkModel, machine: MachineParams,
                       delta: float, eq_prime: float) -> Dict[str, complex]:
    """Network node phasors for given internal voltage (no injections)."""
    Y = build_admittance(net, {net.machines[0].id: machine})
    alg, dyn = list(Y.algebraic), list(Y.dynamic)
    e = np.array([eq_prime * np.exp(1j * delta), net.infinite.voltage])
    Ytt = Y.matrix[np.ix_(alg, alg)]
    Ytd = Y.matrix[np.ix_(alg, dyn)]
    v = -np.linalg.solve(Ytt, Ytd @ e)
    return {Y.order[i]: complex(x) for i, x in zip(alg, v)}


def operating_point_at(net: NetworkModel, machine: MachineParams, delta: float,
                       eq_prime: float, K_A: float = 0.0) -> OperatingPoint:
    """Equilibrium with the given rotor angle and internal voltage.

    The field voltage follows from the flux-decay equation at rest and, with
    ``K_A > 0``, the matching regulator setpoint.
    """
    gen = net.machines[0]
    v = algebraic_voltages(net, machine, delta, eq_prime)
    vt = v[gen.terminal]
    V1, th1 = abs(vt), float(np.angle(vt))
    e_f = (machine.x_d / machine.x_d_prime) * eq_prime \
        - (machine.x_delta / machine.x_d_prime) * V1 * math.cos(delta - th1)
    p_e = machine.b_d_prime * eq_prime * V1 * math.sin(delta - th1)
    q_e = machine.b_d_prime * (eq_prime**2 - eq_prime * V1 * math.cos(delta - th1))
    v_ref = V1 + e_f / K_A if K_A > 0 else None
    return OperatingPoint(
        machine=gen.id, delta=float(delta), eq_prime=float(eq_prime), e_f=float(e_f),
        E_N=net.infinite.voltage,
        V={k: abs(x) for k, x in v.items()},
        theta={k: float(np.angle(x)) for k, x in v.items()},
        p_e=float(p_e), q_e=float(q_e), K_A=K_A, v_ref=v_ref, infinite=net.infinite.id,
    )


def equilibrium_residual(net: NetworkModel, machine: MachineParams, op: OperatingPoint,
                         p_m: Optional[float] = None) -> np.ndarray:
    """Nonlinear right-hand side and nodal balance at ``op`` (should vanish)."""
    gen = net.machines[0]
    mp = {gen.id: machine}
    U, phi = op.profile(net.order)
    S = injected_power(net, U, phi, mp)
    alg = [i for i, k in enumerate(net.order) if net.node(k).kind == ALGEBRAIC]
    V1, th1 = op.V[gen.terminal], op.theta[gen.terminal]
    p_e = machine.b_d_prime * op.eq_prime * V1 * math.sin(op.delta - th1)
    p_m = op.p_e if p_m is None else p_m
    ef = op.e_f if op.K_A == 0 else op.K_A * (op.v_ref - V1)
    f = [
        (p_m - p_e) / machine.M,
        (-(machine.x_d / machine.x_d_prime) * op.eq_prime
         + (machine.x_delta / machine.x_d_prime) * V1 * math.cos(op.delta - th1) + ef) / machine.T_do,
    ]
    return np.concatenate([f, S[alg].real, S[alg].imag])


def solve_smib_steady_state(net: NetworkModel, machine: MachineParams, dispatch: Dispatch,
                            K_A: float = 0.0, tol: float = 1e-12,
                            max_iter: int = 50) -> OperatingPoint:
    """Damped Newton from a flat start on (delta, E'_q, E_f).

    The lossless network part is linear in the internal phasor and is solved
    exactly inside every residual evaluation.
    """
    if dispatch.mode == "v_ref" and K_A <= 0:
        raise ValueError("a v_ref dispatch needs K_A > 0")
    gen = net.machines[0]

    def residual(z):
        delta, eq, ef = z
        v = algebraic_voltages(net, machine, delta, eq)[gen.terminal]
        V1, th1 = abs(v), np.angle(v)
        p_e = machine.b_d_prime * eq * V1 * math.sin(delta - th1)
        flux = (-(machine.x_d / machine.x_d_prime) * eq
                + (machine.x_delta / machine.x_d_prime) * V1 * math.cos(delta - th1) + ef)
        if dispatch.mode == "terminal_voltage":
            c = V1 - dispatch.terminal_voltage
        elif dispatch.mode == "field_voltage":
            c = ef - dispatch.field_voltage
        elif dispatch.mode == "eq_prime":
            c = eq - dispatch.eq_prime
        else:
            c = ef - K_A * (dispatch.v_ref - V1)
        return np.array([p_e - dispatch.p_e, flux, c])

    z = np.array([0.0, 1.0, 1.0])
    r = residual(z)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            break
        J = np.empty((3, 3))
        for j in range(3):
            h = 1e-7 * max(1.0, abs(z[j]))
            e = np.zeros(3)
            e[j] = h
            J[:, j] = (residual(z + e) - residual(z - e)) / (2 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise BeyondStaticLimit("singular Jacobian: dispatch at the static transfer limit",
                                    float(np.max(np.abs(r))))
        lam = 1.0
        while True:
            z_new = z + lam * step
            r_new = residual(z_new)
            if np.max(np.abs(r_new)) < np.max(np.abs(r)) or lam < 1e-9:
                break
            lam *= 0.5
        if lam < 1e-9:
            break
        z, r = z_new, r_new
    res = float(np.max(np.abs(r)))
    if res > max(tol, 1e-10):
        if abs(z[0]) >= math.pi / 2 or abs(r[0]) > 0.5 * res:
            raise BeyondStaticLimit(
                f"no equilibrium for P_e={dispatch.p_e}: beyond static limit "
                f"(last residual {res:.3e})", res)
        raise SteadyStateError(f"steady state did not converge (last residual {res:.3e})", res)
    if math.cos(z[0]) <= 0:
        raise BeyondStaticLimit(f"P_e={dispatch.p_e} only reachable beyond the static limit", res)
    return operating_point_at(net, machine, z[0], z[1], K_A)


# --------------------------------------------------------------------------
# Direct feed-through between two corridor nodes


@dataclass(frozen=True)
class FeedthroughPair:
    matrix: np.ndarray     # -inv(weighted Y_tt) restricted to (i, k)
    bslash: float
    eps_ik: float


def direct_feedthrough_pair(net: NetworkModel, machine: MachineParams, op: OperatingPoint,
                            i: str, k: str) -> FeedthroughPair:
    """Closed-form ``Y_D`` block for corridor nodes ``i`` (closer) and ``k``."""
    cor = corridor(net, machine)
    if not cor.closer(i, k):
        raise NetworkError(f"node {i!r} must be closer to the machine than {k!r}")
    Vi, Vk = op.V[i], op.V[k]
    eps = op.theta[i] - op.theta[k]
    bsl = cor.bslash(i, k)
    b1i, bkN = cor.b_from_machine(i), cor.b_to_infinite(k)
    x_ik = cor.x_from_machine[k] - cor.x_from_machine[i]
    if x_ik == 0.0:
        # b_ik -> infinity: (1/b_ik)(b_ik + b_kN) -> 1
        m = np.array([[Vk**2, Vi * Vk * np.exp(1j * eps)],
                      [Vi * Vk * np.exp(-1j * eps), Vi**2]])
    else:
        b_ik = 1.0 / x_ik
        m = x_ik * np.array([
            [(b_ik + bkN) * Vk**2, b_ik * Vi * Vk * np.exp(1j * eps)],
            [b_ik * Vi * Vk * np.exp(-1j * eps), (b1i + b_ik) * Vi**2],
        ])
    return FeedthroughPair(1j * m / (Vi**2 * Vk**2 * bsl), bsl, eps)
