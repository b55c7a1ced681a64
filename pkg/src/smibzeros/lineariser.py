"""Linear state-space models of the network/machine/AVR system.

Two independent routes are provided: the general multi-machine assembly from
weighted, Kron-reduced admittances and the SMIB element-by-element closed
forms.  A central-difference Jacobian serves as the oracle for both.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .netmodel import (
    NetworkModel,
    OperatingPoint,
    build_admittance,
    corridor,
    kron_reduce,
    weight_admittance,
)
from .params import AvrParams, MachineParams
from .serialize import dumps


@dataclass(frozen=True)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    states: Tuple[str, ...]
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    op: Optional[OperatingPoint] = field(default=None, compare=False)
    machines: Optional[Mapping[str, MachineParams]] = field(default=None, compare=False)

    def __post_init__(self):
        n, m, p = len(self.states), len(self.inputs), len(self.outputs)
        for name, mat, shape in (("A", self.A, (n, n)), ("B", self.B, (n, m)),
                                 ("C", self.C, (p, n)), ("D", self.D, (p, m))):
            if mat.shape != shape:
                raise ValueError(f"{name} has shape {mat.shape}, labels imply {shape}")
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} has non-finite entries")

    def input_index(self, label: str) -> int:
        try:
            return self.inputs.index(label)
        except ValueError:
            raise KeyError(f"unknown input {label!r}; have {list(self.inputs)}") from None

    def output_index(self, label: str) -> int:
        try:
            return self.outputs.index(label)
        except ValueError:
            raise KeyError(f"unknown output {label!r}; have {list(self.outputs)}") from None

    def channel(self, input: str, output: str):
        """``(A, b, c, d)`` of one SISO channel."""
        j, i = self.input_index(input), self.output_index(output)
        return self.A, self.B[:, j], self.C[i, :], float(self.D[i, j])

    def transfer(self, s: complex, input: str, output: str) -> complex:
        A, b, c, d = self.channel(input, output)
        n = A.shape[0]
        return complex(c @ np.linalg.solve(s * np.eye(n) - A, b.astype(complex)) + d)

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "A": self.A, "B": self.B, "C": self.C, "D": self.D,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpaceModel":
        def mat(key, shape):
            return np.array(d[key], dtype=float).reshape(shape)
        n, m, p = len(d["states"]), len(d["inputs"]), len(d["outputs"])
        return cls(mat("A", (n, n)), mat("B", (n, m)), mat("C", (p, n)), mat("D", (p, m)),
                   tuple(d["states"]), tuple(d["inputs"]), tuple(d["outputs"]))

    @classmethod
    def from_json(cls, text: str) -> "StateSpaceModel":
        return cls.from_dict(json.loads(text))


def assemble_multimachine(net: NetworkModel, machines: Mapping[str, MachineParams],
                          op) -> StateSpaceModel:
    """State-space model without AVR from the weighted, reduced admittances.

    ``op`` must expose ``voltages``: node id -> steady-state phasor, with the
    internal voltage ``E'_q e^{j delta}`` at each machine node.  States are
    ordered (deltas, omegas, E'_qs); inputs are (P, Q) per algebraic node
    followed by Pm, Ef and upss per machine; outputs are (theta, V) per
    algebraic node.  Rows/columns of the infinite bus are dropped.
    """
    Y = build_admittance(net, machines)
    U, phi = op.profile(Y.order) if hasattr(op, "profile") else _profile(op, Y.order)
    W = weight_admittance(Y, U, phi)
    K = kron_reduce(W)
    gen_ids = [n.id for n in net.machines]
    alg_ids = [n.id for n in net.algebraic]
    nm, na = len(gen_ids), len(alg_ids)
    m = list(range(nm))  # machine positions inside the dynamic block

    YA = K.A[np.ix_(m, m)]
    Ysh = K.shunt[np.ix_(m, m)]
    YD = -np.linalg.inv(W.tt)
    YB = W.dt[m, :] @ YD
    YC = YD @ W.td[:, m]

    params = [machines[g] for g in gen_ids]
    E = U[:nm]
    Minv = np.diag([1.0 / p.M for p in params])
    Dm = np.diag([p.D_m for p in params])
    Tinv = np.diag([1.0 / (p.T_do * p.b_delta * e) for p, e in zip(params, E)])
    Einv = np.diag(1.0 / E)
    Vd = np.diag(U[nm:nm + na])
    Z, I = np.zeros((nm, nm)), np.eye(nm)

    A0 = np.block([
        [Z, I, Z],
        [-Minv @ YA.imag, -Minv @ Dm, -Minv @ (YA + 2 * Ysh).real @ Einv],
        [Tinv @ YA.real, Z, -Tinv @ (YA + Ysh).imag @ Einv],
    ])
    Zna = np.zeros((nm, na))
    B_net = np.block([
        [Zna, Zna],
        [Minv @ YB.real, -Minv @ YB.imag],
        [Tinv @ YB.imag, Tinv @ YB.real],
    ])
    Zmm = np.zeros((nm, nm))
    B_mach = np.block([
        [Zmm, Zmm, Zmm],
        [Minv, Zmm, Zmm],
        [Zmm, np.diag([1.0 / p.T_do for p in params]), Zmm],
    ])
    Zan = np.zeros((na, nm))
    C = np.block([
        [YC.real, Zan, -YC.imag @ Einv],
        [Vd @ YC.imag, Zan, Vd @ YC.real @ Einv],
    ])
    D_net = np.block([
        [YD.imag, YD.real],
        [-Vd @ YD.real, Vd @ YD.imag],
    ])
    D = np.hstack([D_net, np.zeros((2 * na, 3 * nm))])

    states = tuple(f"{s}:{g}" for s in ("delta", "omega", "Eq") for g in gen_ids)
    inputs = tuple(f"{s}:{k}" for s in ("P", "Q") for k in alg_ids) + \
        tuple(f"{s}:{g}" for s in ("Pm", "Ef", "upss") for g in gen_ids)
    outputs = tuple(f"{s}:{k}" for s in ("theta", "V") for k in alg_ids)
    return StateSpaceModel(A0, np.hstack([B_net, B_mach]), C, D, states, inputs, outputs,
                           op=op, machines=dict(machines))


def _profile(op, order):
    v = op.voltages
    ph = np.array([v[k] for k in order])
    return np.abs(ph), np.angle(ph)


def apply_avr(model: StateSpaceModel,
              avr: Union[AvrParams, Mapping[str, AvrParams]]) -> StateSpaceModel:
    """Close the proportional regulator ``E_f = K_A (V_ref - V + u_pss)``.

    Each machine's E'_q row loses ``K_A / T'do`` times the measured-voltage
    row of C (state part) and of D (input part); ``upss`` gets ``K_A / T'do``.
    """
    if model.machines is None:
        raise ValueError("model carries no machine parameters")
    gens = list(model.machines)
    if isinstance(avr, AvrParams):
        if len(gens) != 1:
            raise ValueError("pass one AvrParams per machine for multi-machine models")
        avr = {gens[0]: avr}
    A, B = model.A.copy(), model.B.copy()
    n_net = sum(1 for lab in model.inputs if lab.split(":")[0] in ("P", "Q"))
    for g in gens:
        a = avr.get(g)
        if a is None or a.K_A == 0:
            continue
        k = a.K_A / model.machines[g].T_do
        row = model.states.index(f"Eq:{g}")
        meas = model.output_index(f"V:{a.node}")
        A[row, :] -= k * model.C[meas, :]
        B[row, :n_net] -= k * model.D[meas, :n_net]
        B[row, model.input_index(f"upss:{g}")] = k
    return replace(model, A=A, B=B)


def linearize_smib(net: NetworkModel, machine: MachineParams, op: OperatingPoint,
                   avr: Optional[AvrParams] = None) -> StateSpaceModel:
    gen = net.machines[0].id
    model = assemble_multimachine(net, {gen: machine}, op)
    return apply_avr(model, avr) if avr is not None else model


# --------------------------------------------------------------------------
# SMIB closed forms


@dataclass(frozen=True)
class SmibMatrices:
    """Scalar elements of the SMIB model for one (measurement, control) pair.

    ``c1, c3, d`` belong to the angle output at ``meas``; the primed
    versions ``c1v, c3v, dv`` to the voltage output.  ``b2, b3`` form the
    active-power input column at ``ctrl``.
    """

    a21: float
    a22: float
    a23: float
    a31: float
    a33: float
    b2: float
    b3: float
    b3_avr: float
    c1: float
    c3: float
    c1v: float
    c3v: float
    d: float
    dv: float
    b_sigma: float
    beta: Mapping[str, float]
    eps: Mapping[str, float]
    V: Mapping[str, float]
    meas: str
    ctrl: str
    terminal: str
    delta: float
    eq_prime: float
    E_N: float
    M: float
    T_do: float
    b_delta: float
    K_A: float
    bslash: Mapping[str, float]
    b_from_machine_meas: float

    @property
    def A(self) -> np.ndarray:
        return np.array([[0.0, 1.0, 0.0],
                         [-self.a21, -self.a22, -self.a23],
                         [-self.a31, 0.0, -self.a33]])

    @property
    def b_p(self) -> np.ndarray:
        return np.array([0.0, self.b2, self.b3])

    @property
    def c_theta(self) -> np.ndarray:
        return np.array([self.c1, 0.0, self.c3])

    @property
    def c_volt(self) -> np.ndarray:
        return np.array([self.c1v, 0.0, self.c3v])

    @property
    def eps_mc(self) -> float:
        return self.eps[self.ctrl] - self.eps[self.meas]

    def with_(self, **changes) -> "SmibMatrices":
        return replace(self, **changes)


def smib_closed_form(net: NetworkModel, machine: MachineParams,
                     avr: Optional[AvrParams], op: OperatingPoint,
                     meas: str, ctrl: str) -> SmibMatrices:
    cor = corridor(net, machine)
    term = net.machines[0].terminal
    for k in (meas, ctrl):
        if k not in cor.nodes:
            raise KeyError(f"node {k!r} is not on the SMIB corridor")
    K_A = avr.K_A if avr is not None else 0.0
    if avr is not None and avr.node != term:
        raise ValueError("SMIB closed forms assume the AVR measures the machine terminal")
    E, EN, dl = op.eq_prime, op.E_N, op.delta
    M, T, bD = machine.M, machine.T_do, machine.b_delta
    bS = cor.b_sigma
    eps = op.eps
    beta = {k: cor.beta(k) for k in cor.nodes}
    V = dict(op.V)
    e1 = eps[term]
    b1 = beta[term]
    sd, cd = math.sin(dl), math.cos(dl)

    a21 = bS / M * E * EN * cd
    a22 = machine.D_m / M
    a23 = bS / M * EN * sd
    a31 = bS / (T * bD) * EN * sd - K_A / T * b1 * E * math.sin(e1)
    a33 = (bD + bS) / (T * bD) + K_A / T * b1 * math.cos(e1)

    ec, em = eps[ctrl], eps[meas]
    bc, bm = beta[ctrl], beta[meas]
    Vc, Vm = V[ctrl], V[meas]
    bsl_1c = cor.bslash(term, ctrl)
    eps_1c = op.theta[term] - op.theta[ctrl]
    b3_avr = bD * K_A / (bc * bsl_1c) * math.sin(eps_1c)
    b2 = bc * E / (M * Vc) * math.cos(ec)
    b3 = bc / (T * bD * Vc) * (math.sin(ec) - b3_avr)

    c1 = bm * E / Vm * math.cos(em)
    c3 = bm / Vm * math.sin(em)
    c1v = -bm * E * math.sin(em)
    c3v = bm * math.cos(em)

    bsl_mc = cor.bslash(meas, ctrl)
    eps_mc = op.theta[meas] - op.theta[ctrl]
    d = math.cos(eps_mc) / (bsl_mc * Vm * Vc)
    dv = math.sin(eps_mc) / (bsl_mc * Vc)

    return SmibMatrices(
        a21=a21, a22=a22, a23=a23, a31=a31, a33=a33, b2=b2, b3=b3, b3_avr=b3_avr,
        c1=c1, c3=c3, c1v=c1v, c3v=c3v, d=d, dv=dv, b_sigma=bS,
        beta=beta, eps=eps, V=V, meas=meas, ctrl=ctrl, terminal=term,
        delta=dl, eq_prime=E, E_N=EN, M=M, T_do=T, b_delta=bD, K_A=K_A,
        bslash={"mc": bsl_mc, "1c": bsl_1c},
        b_from_machine_meas=cor.b_from_machine(meas),
    )


def finite_difference_jacobian(f: Callable[[np.ndarray], np.ndarray], x0: Sequence[float],
                               h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x0``."""
    if not 1e-8 <= h <= 1e-4:
        raise ValueError(f"step h={h} outside [1e-8, 1e-4]")
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for j in range(x0.size):
        e = np.zeros_like(x0)
        e[j] = h
        fp, fm = np.asarray(f(x0 + e), float), np.asarray(f(x0 - e), float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise FloatingPointError(f"right-hand side returned NaN/inf around x[{j}]")
        cols.append((fp - fm) / (2 * h))
    return np.column_stack(cols)
