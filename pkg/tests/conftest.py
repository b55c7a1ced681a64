import math
from dataclasses import dataclass

import numpy as np
import pytest

from smibzeros import scenario
from smibzeros.lineariser import linearize_smib, smib_closed_form
from smibzeros.netmodel import (
    ALGEBRAIC,
    INFINITE,
    MACHINE,
    Branch,
    NetworkModel,
    Node,
    operating_point_at,
)
from smibzeros.params import AvrParams, MachineParams

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        request.config.stash[ACCEPTANCE_KEY].append(line)

    return _report


@pytest.fixture(scope="session")
def ref():
    return scenario.load(scenario.reference_path())


def chain_net(xs=(0.15, 0.3, 0.05), E_N=1.0, f_nom=60.0):
    """Machine G on terminal 1, series chain 1-2-3-INF."""
    nodes = [Node("G", MACHINE, terminal="1"), Node("1", ALGEBRAIC), Node("2", ALGEBRAIC),
             Node("3", ALGEBRAIC), Node("INF", INFINITE, voltage=E_N)]
    ids = ["1", "2", "3", "INF"]
    branches = [Branch(ids[i], ids[i + 1], x, name=f"B{i}") for i, x in enumerate(xs)]
    return NetworkModel(nodes, branches, f_nom)


@dataclass
class SmibPoint:
    net: NetworkModel
    machine: MachineParams
    avr: AvrParams
    op: object
    meas: str
    ctrl: str

    @property
    def model(self):
        return linearize_smib(self.net, self.machine, self.op, self.avr)

    def smib(self, meas=None, ctrl=None):
        return smib_closed_form(self.net, self.machine, self.avr, self.op,
                                meas or self.meas, ctrl or self.ctrl)


def assumption1(op) -> bool:
    """Load angles share the sign of delta and are bounded by it."""
    eps = list(op.eps.values())
    sd = math.copysign(1.0, op.delta)
    return all(e * sd >= 0 and abs(e) <= abs(op.delta) + 1e-12 for e in eps)


def random_point(rng, K_A=None, damping=None, delta_max=1.2) -> SmibPoint:
    while True:
        xs = rng.uniform(0.05, 0.6, 3)
        D_m = rng.uniform(0.0, 3 / (2 * math.pi * 60)) if damping is None else damping
        mp = MachineParams(M=rng.uniform(0.01, 0.05), D_m=D_m, T_do=rng.uniform(4, 10),
                           x_d=rng.uniform(1.2, 2.0), x_d_prime=rng.uniform(0.2, 0.4))
        net = chain_net(xs, E_N=rng.uniform(0.9, 1.1))
        ka = float(rng.choice([0.0, 20.0, 50.0, 200.0])) if K_A is None else float(K_A)
        op = operating_point_at(net, mp, rng.uniform(-delta_max, delta_max),
                                rng.uniform(0.9, 1.4), ka)
        if not assumption1(op):
            continue
        meas, ctrl = (str(v) for v in rng.choice(["1", "2", "3"], 2))
        return SmibPoint(net, mp, AvrParams(K_A=ka, node="1"), op, meas, ctrl)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
