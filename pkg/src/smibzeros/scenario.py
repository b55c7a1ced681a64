"""TOML scenario files: schema checking and conversion to model objects."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .netmodel import ALGEBRAIC, INFINITE, MACHINE, Branch, Dispatch, NetworkModel, Node
from .params import AvrParams, MachineParams
from .timesim import EVENT_KINDS, Event

VARIANTS = ("constant_ef", "avr", "avr_pod")


class ScenarioError(ValueError):
    """Invalid scenario file; the message carries the location."""


# Schema: key -> (type or tuple of types, required)
_NUM = (int, float)
_SCHEMA: Dict[str, Dict[str, Tuple[Any, bool]]] = {
    "bases": {"s_base_mva": (_NUM, False), "v_base_kv": (_NUM, False), "f_nom_hz": (_NUM, True)},
    "network": {"nodes": (list, True), "branches": (list, True)},
    "node": {"id": (str, True), "kind": (str, True), "terminal": (str, False),
             "voltage": (_NUM, False), "g": (_NUM, False), "b": (_NUM, False)},
    "branch": {"name": (str, True), "from": (str, True), "to": (str, True),
               "x": (_NUM, True), "r": (_NUM, False)},
    "machine": {"H": (_NUM, False), "M": (_NUM, False), "D_m": (_NUM, False),
                "T_do": (_NUM, True), "x_d": (_NUM, True), "x_d_prime": (_NUM, True)},
    "avr": {"K_A": (_NUM, True), "T_e": (_NUM, False), "node": (str, False)},
    "dispatch": {"p_e": (_NUM, True), "terminal_voltage": (_NUM, False), "v_ref": (_NUM, False),
                 "field_voltage": (_NUM, False), "eq_prime": (_NUM, False)},
    "analysis": {"meas": (str, False), "ctrl": (str, False), "near_bus": (str, False),
                 "far_bus": (str, False), "gain_min": (_NUM, False), "gain_max": (_NUM, False),
                 "gain_points": (int, False)},
    "pod": {"bus": (str, True), "gain": ((str,) + _NUM, False)},
    "event": {"time": (_NUM, True), "kind": (str, True), "node": (str, False),
              "branch": (str, False), "value": (_NUM, False)},
    "simulation": {"horizon": (_NUM, False), "step": (_NUM, False), "variants": (list, False),
                   "field_limits": (list, False), "clearing_sweep": (list, False)},
    "output": {"dir": (str, False)},
}
_TOP = {"bases", "network", "machine", "avr", "dispatch", "analysis", "pod", "events",
        "simulation", "output"}


def _check(table: Any, kind: str, where: str) -> Dict[str, Any]:
    if not isinstance(table, dict):
        raise ScenarioError(f"{where}: expected a table")
    schema = _SCHEMA[kind]
    for k, v in table.items():
        if k not in schema:
            raise ScenarioError(f"{where}.{k}: unknown key")
        typ, _ = schema[k]
        if isinstance(v, bool) or not isinstance(v, typ):
            raise ScenarioError(f"{where}.{k}: wrong type {type(v).__name__}")
        if isinstance(v, float) and not math.isfinite(v):
            raise ScenarioError(f"{where}.{k}: must be finite")
    for k, (_, req) in schema.items():
        if req and k not in table:
            raise ScenarioError(f"{where}.{k}: required key missing")
    return table


@dataclass(frozen=True)
class ScenarioFile:
    path: Optional[Path]
    net: NetworkModel
    machine: MachineParams
    avr: AvrParams
    dispatch: Dispatch
    meas: str
    ctrl: str
    near_bus: str
    far_bus: str
    gain_min: float = 1e-3
    gain_max: float = 1e3
    gain_points: int = 200
    pod_bus: Optional[str] = None
    pod_gain: Any = "best"
    events: Tuple[Event, ...] = ()
    horizon: float = 15.0
    step: float = 1e-3
    variants: Tuple[str, ...] = VARIANTS
    field_limits: Optional[Tuple[float, float]] = None
    clearing_sweep: Tuple[float, ...] = ()
    out_dir: str = "out"
    bases: Dict[str, float] = field(default_factory=dict)

    @property
    def generator(self) -> str:
        return self.net.machines[0].id

    def with_ka(self, K_A: float) -> "ScenarioFile":
        if K_A < 0:
            raise ScenarioError("--ka: must be non-negative")
        return replace(self, avr=replace(self.avr, K_A=float(K_A)))

    def bases_line(self) -> str:
        parts = [f"{k}={v:g}" for k, v in sorted(self.bases.items())]
        return "per-unit bases: " + ", ".join(parts) + "; angles rad, speed rad/s, time s"


def parse_text(text: str, path: Optional[Path] = None) -> ScenarioFile:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path or '<text>'}: {exc}") from None
    for k in doc:
        if k not in _TOP:
            raise ScenarioError(f"{k}: unknown section")
    for req in ("bases", "network", "machine", "dispatch"):
        if req not in doc:
            raise ScenarioError(f"{req}: required section missing")

    bases = _check(doc["bases"], "bases", "bases")
    f_nom = float(bases["f_nom_hz"])
    netd = _check(doc["network"], "network", "network")
    nodes: List[Node] = []
    for i, nd in enumerate(netd["nodes"]):
        where = f"network.nodes[{i}]"
        _check(nd, "node", where)
        if nd["kind"] not in (MACHINE, ALGEBRAIC, INFINITE):
            raise ScenarioError(f"{where}.kind: must be machine, algebraic or infinite")
        shunt = complex(nd.get("g", 0.0), -nd.get("b", 0.0))
        nodes.append(Node(nd["id"], nd["kind"], shunt=shunt, terminal=nd.get("terminal"),
                          voltage=float(nd.get("voltage", 1.0))))
    branches = []
    for i, bd in enumerate(netd["branches"]):
        where = f"network.branches[{i}]"
        _check(bd, "branch", where)
        branches.append(Branch(bd["from"], bd["to"], float(bd["x"]), float(bd.get("r", 0.0)),
                               name=bd["name"]))
    names = [b.name for b in branches]
    if len(set(names)) != len(names):
        raise ScenarioError("network.branches: duplicate branch names")
    try:
        net = NetworkModel(tuple(nodes), tuple(branches), f_nom)
    except ValueError as exc:
        raise ScenarioError(f"network: {exc}") from None
    if len(net.machines) != 1:
        raise ScenarioError("network.nodes: exactly one machine node is required")

    md = _check(doc["machine"], "machine", "machine")
    try:
        if "M" in md:
            if "H" in md:
                raise ScenarioError("machine: give either H or M, not both")
            machine = MachineParams(float(md["M"]), float(md.get("D_m", 0.0)), float(md["T_do"]),
                                    float(md["x_d"]), float(md["x_d_prime"]))
        elif "H" in md:
            machine = MachineParams.from_inertia(float(md["H"]), f_nom, float(md.get("D_m", 0.0)),
                                                 float(md["T_do"]), float(md["x_d"]),
                                                 float(md["x_d_prime"]))
        else:
            raise ScenarioError("machine.H: required key missing (or give M)")
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"machine: {exc}") from None

    term = net.machines[0].terminal
    ad = _check(doc.get("avr", {"K_A": 0.0}), "avr", "avr")
    try:
        avr = AvrParams(K_A=float(ad["K_A"]), T_e=float(ad.get("T_e", 0.02)),
                        node=ad.get("node", term))
    except ValueError as exc:
        raise ScenarioError(f"avr: {exc}") from None
    if avr.node != term:
        raise ScenarioError("avr.node: the regulator must measure the machine terminal")

    dd = _check(doc["dispatch"], "dispatch", "dispatch")
    try:
        dispatch = Dispatch(float(dd["p_e"]), **{k: float(v) for k, v in dd.items() if k != "p_e"})
    except ValueError as exc:
        raise ScenarioError(f"dispatch: {exc}") from None

    alg_ids = [n.id for n in net.algebraic]
    an = _check(doc.get("analysis", {}), "analysis", "analysis")
    for k in ("meas", "ctrl", "near_bus", "far_bus"):
        if k in an and an[k] not in alg_ids:
            raise ScenarioError(f"analysis.{k}: {an[k]!r} is not an algebraic node")
    meas = an.get("meas", alg_ids[1] if len(alg_ids) > 1 else alg_ids[0])
    ctrl = an.get("ctrl", meas)
    near = an.get("near_bus", meas)
    far = an.get("far_bus", alg_ids[-1])
    gmin, gmax = float(an.get("gain_min", 1e-3)), float(an.get("gain_max", 1e3))
    gpts = int(an.get("gain_points", 200))
    if not (0 < gmin < gmax) or gpts < 2:
        raise ScenarioError("analysis: need 0 < gain_min < gain_max and gain_points >= 2")

    pod_bus, pod_gain = None, "best"
    if "pod" in doc:
        pd = _check(doc["pod"], "pod", "pod")
        pod_bus = pd["bus"]
        if pod_bus not in alg_ids:
            raise ScenarioError(f"pod.bus: {pod_bus!r} is not an algebraic node")
        pod_gain = pd.get("gain", "best")
        if isinstance(pod_gain, str) and pod_gain != "best":
            raise ScenarioError("pod.gain: number or \"best\"")
        if not isinstance(pod_gain, str) and pod_gain < 0:
            raise ScenarioError("pod.gain: must be non-negative")

    events = []
    evs = doc.get("events", [])
    if not isinstance(evs, list):
        raise ScenarioError("events: expected an array of tables")
    for i, ed in enumerate(evs):
        where = f"events[{i}]"
        _check(ed, "event", where)
        if ed["kind"] not in EVENT_KINDS:
            raise ScenarioError(f"{where}.kind: one of {', '.join(EVENT_KINDS)}")
        node = ed.get("node")
        if node is not None and node not in alg_ids:
            raise ScenarioError(f"{where}.node: {node!r} is not an algebraic node")
        if ed.get("branch") is not None and ed["branch"] not in names:
            raise ScenarioError(f"{where}.branch: no branch named {ed['branch']!r}")
        try:
            events.append(Event(float(ed["time"]), ed["kind"], node, ed.get("branch"),
                                float(ed.get("value", 0.0))))
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from None
    if [e.time for e in events] != sorted(e.time for e in events):
        raise ScenarioError("events: must be time-ordered")

    sd = _check(doc.get("simulation", {}), "simulation", "simulation")
    horizon, step = float(sd.get("horizon", 15.0)), float(sd.get("step", 1e-3))
    if not (horizon > 0 and step > 0):
        raise ScenarioError("simulation: horizon and step must be positive")
    variants = tuple(sd.get("variants", VARIANTS))
    for v in variants:
        if v not in VARIANTS:
            raise ScenarioError(f"simulation.variants: unknown variant {v!r}")
    if "avr_pod" in variants and pod_bus is None:
        raise ScenarioError("simulation.variants: avr_pod needs a [pod] section")
    limits = sd.get("field_limits")
    if limits is not None:
        if len(limits) != 2 or not all(isinstance(x, _NUM) for x in limits) or limits[0] >= limits[1]:
            raise ScenarioError("simulation.field_limits: [min, max] with min < max")
        limits = (float(limits[0]), float(limits[1]))
    sweep = tuple(float(x) for x in sd.get("clearing_sweep", []))
    if any(x <= 0 for x in sweep):
        raise ScenarioError("simulation.clearing_sweep: clearing times must be positive")

    od = _check(doc.get("output", {}), "output", "output")
    return ScenarioFile(
        path=path, net=net, machine=machine, avr=avr, dispatch=dispatch, meas=meas, ctrl=ctrl,
        near_bus=near, far_bus=far, gain_min=gmin, gain_max=gmax, gain_points=gpts,
        pod_bus=pod_bus, pod_gain=pod_gain, events=tuple(events), horizon=horizon, step=step,
        variants=variants, field_limits=limits, clearing_sweep=sweep,
        out_dir=od.get("dir", "out"), bases={k: float(v) for k, v in bases.items()},
    )


def load(path) -> ScenarioFile:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"{p}: {exc.strerror}") from None
    return parse_text(text, p)


def reference_path() -> Path:
    return Path(__file__).with_name("reference.scenario")
