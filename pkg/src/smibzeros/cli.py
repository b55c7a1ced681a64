"""Command-line front end.

Every command reads a scenario file, writes plot-ready CSV/JSON artifacts
to the output directory and prints a one-screen summary.  Exit codes:
0 success, 2 input error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import validate as _validate
from .netmodel import NetworkError, SingularNetworkError
from .podctl import LOWPASS, WASHOUT_T, ResidueError, TuningError
from .scenario import ScenarioError, ScenarioFile, load
from .serialize import complex_list, csv_text, dumps
from .timesim import (
    InsufficientRingdown,
    classify,
    simulate,
    survives,
)
from .workflow import design_pod, linear_model, pod_gain, sim_scenario, smib
from .zeroanalysis import (
    LOOPS,
    DegenerateChannel,
    catalog,
    damping_ratio,
    poles,
    stability_check,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

_NUMERIC = (SingularNetworkError, RuntimeError, ResidueError, DegenerateChannel,
            InsufficientRingdown, np.linalg.LinAlgError, ArithmeticError)
_INPUT = (ScenarioError, NetworkError, KeyError, ValueError, OSError)

_LOOP_RE = re.compile(r"^(theta|V)([^_]*)_(upss|Pm|P)(.*)$")


def parse_loop(loop_id: str, sf: ScenarioFile):
    """``theta2_P3`` -> (``theta_P``, meas ``2``, ctrl ``3``).

    Bus numbers may be omitted to fall back on the scenario's analysis
    section; ``upss`` and ``Pm`` loops take no control bus.
    """
    m = _LOOP_RE.match(loop_id)
    if not m:
        raise KeyError(f"unknown loop id {loop_id!r}; expected e.g. theta2_P3, V2_upss, theta2_Pm")
    kind, meas, src, ctrl = m.groups()
    if src != "P" and ctrl:
        raise KeyError(f"loop id {loop_id!r}: only P loops take a control bus")
    known = set(sf.net.order)
    for b in (meas, ctrl):
        if b and b not in known:
            raise KeyError(f"loop id {loop_id!r}: unknown bus {b!r}")
    return f"{kind}_{src}", meas or sf.meas, ctrl or sf.ctrl


class _Out:
    def __init__(self, root: Path, sf: ScenarioFile):
        self.root = root
        self.sf = sf
        root.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []

    def json(self, name: str, obj) -> None:
        p = self.root / name
        p.write_text(dumps(obj))
        self.written.append(p)

    def csv(self, name: str, header, rows, comments=()) -> None:
        p = self.root / name
        p.write_text(csv_text(header, rows, (self.sf.bases_line(),) + tuple(comments)))
        self.written.append(p)


def _bases(sf: ScenarioFile) -> dict:
    return {"per_unit_bases": dict(sorted(sf.bases.items())),
            "units": {"angle": "rad", "speed": "rad/s", "time": "s", "frequency": "rad/s"}}


# --------------------------------------------------------------------------
# commands


def cmd_linearize(sf: ScenarioFile, out: _Out, args) -> int:
    model = linear_model(sf)
    s = smib(sf, op=model.op)
    eig = poles(model)
    out.json("statespace.json", {**_bases(sf), "model": model.to_dict()})
    out.csv("eigenvalues.csv", ["re_rad_per_s", "im_rad_per_s", "zeta"],
            [[float(l.real), float(l.imag), float(damping_ratio(l))] for l in eig])
    rep = stability_check(s)
    out.json("stability.json", {**_bases(sf), "K_A": sf.avr.K_A, **rep.to_dict()})
    print(f"K_A={sf.avr.K_A:g}  eigenvalues: " + ", ".join(f"{l:.6g}" for l in eig))
    print(f"destab_cond holds: {rep.destab_cond}  hurwitz: {rep.hurwitz}")
    return EXIT_OK


def cmd_zeros(sf: ScenarioFile, out: _Out, args) -> int:
    model = linear_model(sf)
    if args.loop:
        loop, meas, ctrl = parse_loop(args.loop, sf)
        loops = [loop]
    else:
        loops, meas, ctrl = list(LOOPS), sf.meas, sf.ctrl
    # the closed forms need an algebraic measurement bus; the catalog marks
    # infinite-bus measurements itself
    smib_meas = meas if meas != sf.net.infinite.id else sf.meas
    s = smib(sf, smib_meas, ctrl, op=model.op)
    cat = catalog(model, s, loops, meas=meas)
    out.json("zeros.json", {**_bases(sf), "meas": meas, "ctrl": ctrl, **cat.to_dict()})
    (out.root / "zeros.csv").write_text(
        "# " + sf.bases_line() + "\n" + cat.to_csv())
    out.written.append(out.root / "zeros.csv")
    for e in cat.entries:
        zs = e.numeric or e.analytic
        print(f"{e.loop:<11} {e.output:<9} <- {e.input:<7} {e.status:<12} nmp={e.nmp!s:<5} "
              + ", ".join(f"{z:.6g}" for z in zs))
    return EXIT_OK


def cmd_rootlocus(sf: ScenarioFile, out: _Out, args) -> int:
    bus = args.bus or sf.pod_bus or sf.near_bus
    if bus not in {n.id for n in sf.net.algebraic}:
        raise KeyError(f"--bus: {bus!r} is not an algebraic bus")
    model = linear_model(sf)
    try:
        d = design_pod(sf, bus, model, jobs=args.jobs)
    except TuningError as exc:
        out.json("rootlocus_summary.json", {**_bases(sf), "bus": bus, "error": str(exc),
                                            "required_phase_rad": exc.required_phase})
        print(f"tuning failed at bus {bus}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    tr = d.trace
    rows = [[float(k), float(p.real), float(p.imag), float(z)]
            for k, p, z in zip(tr.gains, tr.path, tr.zeta)]
    out.csv(f"rootlocus_bus{bus}.csv", ["gain_pu", "re_rad_per_s", "im_rad_per_s", "zeta"], rows,
            ["tracked electromechanical branch of the closed loop"])
    ep = d.endpoint_distance
    summary = {
        **_bases(sf),
        "bus": bus,
        "open_loop_mode": complex_list([d.mode])[0],
        "residue": complex_list([d.residue])[0],
        "controller": {"T1": d.controller.T1, "T2": d.controller.T2,
                       "washout_T": WASHOUT_T, "lowpass_rad_per_s": LOWPASS},
        "zeros": complex_list(d.zeros),
        "nearest_zero": None if d.nearest_zero is None else complex_list([d.nearest_zero])[0],
        "stabilizing": tr.stabilizing,
        "no_stabilizing_gain": not tr.stabilizing,
        "crossing_gain": tr.crossing_gain,
        "best_gain": tr.best_gain,
        "best_zeta": tr.best_zeta,
        "endpoint_relative_distance_to_zero": ep,
        "grid": {"min": float(tr.gains[0]), "max": float(tr.gains[-1]), "points": len(tr.gains)},
    }
    out.json("rootlocus_summary.json", summary)
    flag = "stabilizing" if tr.stabilizing else "no stabilizing gain"
    print(f"bus {bus}: mode {d.mode:.6g}, {flag}; best gain {tr.best_gain:.6g} "
          f"zeta {tr.best_zeta:.4g}; crossing gain {tr.crossing_gain}")
    return EXIT_OK


def _sweep_point(job):
    sc, tc = job
    return survives(sc, tc)


def cmd_simulate(sf: ScenarioFile, out: _Out, args) -> int:
    variants = sf.variants
    pod = None
    if "avr_pod" in variants:
        d = design_pod(sf, sf.pod_bus or sf.near_bus, jobs=args.jobs)
        pod = d.controller.with_gain(pod_gain(sf, d))
    summary = {**_bases(sf), "events": [e.describe() for e in sf.events], "variants": {}}
    failed = False
    for v in variants:
        sc = sim_scenario(sf, v, pod)
        tr = simulate(sc)
        names, cols = tr.columns()
        out.csv(f"trace_{v}.csv", names, np.column_stack(cols).tolist(),
                [f"variant {v}"] + [f"event t={t:.17g} {m}" for t, m in tr.markers])
        info = classify(tr)
        if v == "avr_pod":
            info["pod"] = {"bus": sf.pod_bus, "T1": pod.T1, "T2": pod.T2, "K_POD": pod.K_POD}
            info["peak_injection_pu"] = float(np.max(np.abs(tr.p_inj)))
        summary["variants"][v] = info
        failed |= tr.error is not None
        print(f"{v:<12} {info['verdict']:<18} loss of synchrony: {info['loss_of_synchrony_s']}  "
              f"ringdown zeta: {info.get('ringdown_zeta')}")
    if sf.clearing_sweep:
        sweep = {}
        for v in variants:
            sc = sim_scenario(sf, v, pod)
            jobs = [(sc, tc) for tc in sf.clearing_sweep]
            if args.jobs > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                    ok = list(ex.map(_sweep_point, jobs))
            else:
                ok = [_sweep_point(j) for j in jobs]
            boundary = next((tc for tc, s in zip(sf.clearing_sweep, ok) if not s), None)
            monotone = all(not ok[i + 1] or ok[i] for i in range(len(ok) - 1))
            sweep[v] = {"clearing_s": list(sf.clearing_sweep), "survives": ok,
                        "first_failing_clearing_s": boundary, "monotone": monotone}
        summary["clearing_sweep"] = sweep
    out.json("summary.json", summary)
    if failed:
        print("a run ended early; partial traces were written", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_validate(sf: ScenarioFile, out: _Out, args) -> int:
    checks = _validate.run_all(sf, fault=args.inject_fault)
    ok = all(c.passed for c in checks)
    out.json("validate.json", {"passed": ok, "injected_fault": args.inject_fault,
                               "checks": [c.to_dict() for c in checks]})
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<34} {c.value:.3e} <= {c.tolerance:.0e}")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"linearize": cmd_linearize, "zeros": cmd_zeros, "rootlocus": cmd_rootlocus,
            "simulate": cmd_simulate, "validate": cmd_validate}


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smibzeros", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("scenario", type=Path)
        sp.add_argument("--out", type=Path, help="output directory (overrides the file)")
        sp.add_argument("--ka", type=float, help="override the regulator gain K_A")
        sp.add_argument("--jobs", type=int, default=1, help="worker count for sweeps")
        if name == "zeros":
            sp.add_argument("--loop", help="loop id such as theta2_P3, V2_upss or theta2_Pm")
        if name in ("rootlocus", "simulate"):
            sp.add_argument("--gain-min", type=float)
            sp.add_argument("--gain-max", type=float)
            sp.add_argument("--gain-points", type=int)
        if name == "rootlocus":
            sp.add_argument("--bus", help="bus for the POD measurement and injection")
        if name == "simulate":
            sp.add_argument("--step", type=float, help="integration step, s")
            sp.add_argument("--horizon", type=float, help="simulated time, s")
        if name == "validate":
            sp.add_argument("--inject-fault", choices=_validate.FAULT_HOOKS,
                            help="deliberately corrupt a model quantity (test hook)")
    return p


def _apply_overrides(sf: ScenarioFile, args) -> ScenarioFile:
    if args.ka is not None:
        sf = sf.with_ka(args.ka)
    if args.jobs < 1:
        raise ScenarioError("--jobs: must be at least 1")
    ch = {}
    for flag, key in (("gain_min", "gain_min"), ("gain_max", "gain_max"),
                      ("gain_points", "gain_points"), ("step", "step"), ("horizon", "horizon")):
        v = getattr(args, flag, None)
        if v is not None:
            ch[key] = v
    if ch:
        sf = replace(sf, **ch)
    if not 0 < sf.gain_min < sf.gain_max or sf.gain_points < 2:
        raise ScenarioError("gain grid: need 0 < gain_min < gain_max and at least 2 points")
    if not 0 < sf.step < sf.horizon:
        raise ScenarioError("simulation: need 0 < step < horizon")
    return sf


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sf = _apply_overrides(load(args.scenario), args)
        root = args.out if args.out is not None else Path(sf.out_dir)
        out = _Out(root, sf)
    except _INPUT as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](sf, out, args)
    except _NUMERIC as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _INPUT as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
