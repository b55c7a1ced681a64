"""Glue between a parsed scenario file and the analysis modules."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

from .lineariser import SmibMatrices, StateSpaceModel, linearize_smib, smib_closed_form
from .netmodel import OperatingPoint, solve_smib_steady_state
from .podctl import PodController, RootLocusTrace, default_grid, root_locus, tuned_controller
from .scenario import ScenarioFile
from .timesim import PodLoop, Scenario
from .zeroanalysis import em_pair, omega_em, poles, zeros_numeric, DegenerateChannel


def operating_point(sf: ScenarioFile) -> OperatingPoint:
    return solve_smib_steady_state(sf.net, sf.machine, sf.dispatch, K_A=sf.avr.K_A)


def linear_model(sf: ScenarioFile, op: Optional[OperatingPoint] = None) -> StateSpaceModel:
    op = operating_point(sf) if op is None else op
    return linearize_smib(sf.net, sf.machine, op, sf.avr)


def smib(sf: ScenarioFile, meas: Optional[str] = None, ctrl: Optional[str] = None,
         op: Optional[OperatingPoint] = None) -> SmibMatrices:
    op = operating_point(sf) if op is None else op
    return smib_closed_form(sf.net, sf.machine, sf.avr, op, meas or sf.meas, ctrl or sf.ctrl)


def em_mode(model: StateSpaceModel, s: SmibMatrices) -> complex:
    try:
        Om = omega_em(s)
    except Exception:
        Om = 0.0
    return em_pair(poles(model), Om)[0]


@dataclass(frozen=True)
class PodDesign:
    bus: str
    mode: complex
    residue: complex
    controller: PodController
    trace: RootLocusTrace
    zeros: Tuple[complex, ...]

    @property
    def nearest_zero(self) -> Optional[complex]:
        upper = [z for z in self.zeros if z.imag >= 0]
        if not upper:
            return None
        return min(upper, key=lambda z: abs(z - self.mode))

    @property
    def endpoint_distance(self) -> Optional[float]:
        """Distance from the locus endpoint to the nearest open-loop zero,
        relative to that zero's modulus."""
        if not self.zeros:
            return None
        end = self.trace.path[-1]
        z = min(self.zeros, key=lambda q: abs(q - end))
        return float(abs(end - z) / abs(z))


def design_pod(sf: ScenarioFile, bus: str, model: Optional[StateSpaceModel] = None,
               gains=None, jobs: int = 1) -> PodDesign:
    """Residue-tuned lead-lag for the same-bus angle/injection loop and its
    root locus over the scenario's gain grid."""
    op = None if model is None else model.op
    model = linear_model(sf) if model is None else model
    s = smib(sf, bus, bus, op=model.op)
    lam = em_mode(model, s)
    inp, out = f"P:{bus}", f"theta:{bus}"
    c, R = tuned_controller(model, inp, out, lam)
    if gains is None:
        gains = default_grid(sf.gain_min, sf.gain_max, sf.gain_points)
    tr = root_locus(model, c, inp, out, gains=gains, start=lam, jobs=jobs)
    try:
        z = tuple(zeros_numeric(model, inp, out))
    except DegenerateChannel:
        z = ()
    tr = replace(tr, zeros=z)
    return PodDesign(bus, lam, R, c, tr, z)


def pod_gain(sf: ScenarioFile, design: PodDesign) -> float:
    if isinstance(sf.pod_gain, str):
        return design.trace.best_gain
    return float(sf.pod_gain)


def sim_scenario(sf: ScenarioFile, variant: str, pod: Optional[PodController] = None,
                 events=None) -> Scenario:
    events = sf.events if events is None else events
    common = dict(events=events, horizon=sf.horizon, step=sf.step, field_limits=sf.field_limits)
    if variant == "constant_ef":
        return Scenario(sf.net, sf.machine, sf.dispatch, None, None, **common)
    if variant == "avr":
        return Scenario(sf.net, sf.machine, sf.dispatch, sf.avr, None, **common)
    if variant == "avr_pod":
        if pod is None or sf.pod_bus is None:
            raise ValueError("avr_pod variant needs a designed POD controller")
        return Scenario(sf.net, sf.machine, sf.dispatch, sf.avr,
                        PodLoop(pod, sf.pod_bus, sf.pod_bus), **common)
    raise ValueError(f"unknown variant {variant!r}")
