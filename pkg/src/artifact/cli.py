"""Command-line interface: ``elastica-lab <command> ...`` or ``python3 -m artifact``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 failed check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import elastic_flow as ef
from . import elastica_spectrum as es
from . import quat_hopf as qh
from .curve import DiscreteCurveS2, load_curve, perturbed_great_circle, save_curve
from .errors import ArtifactError, CheckFailedError, InvalidInputError, StiffnessError
from .special_fn import SeriesConfig

PRESET_SEED = 7
PRESET_ENERGY = 7.5


@dataclass
class RunManifest:
    command: str
    parameters: dict
    version: str = __version__
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    python: str = platform.python_version()
    numpy: str = np.__version__

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _finish(manifest: RunManifest, t0: float, anchor) -> None:
    manifest.wall_time = time.perf_counter() - t0
    if anchor is not None:
        path = _manifest_path(anchor)
        manifest.outputs.append(str(path))
        manifest.write(path)


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _series(args) -> SeriesConfig:
    return SeriesConfig(args.max_terms, args.tail_tol)


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(args) -> int:
    t0 = time.perf_counter()
    pair = es.AdmissiblePair(args.m, args.n)
    entry = es.spectrum_entry(pair, _series(args), args.lattice)
    print(f"(m, n) = ({pair.m}, {pair.n})  p = {entry.inv.p:.10f}")
    print(f"energy = {entry.energy:.10f}")
    print(f"length = {entry.length:.10f}")
    manifest = RunManifest("spectrum", _params(args),
                           results={"energy": entry.energy, "length": entry.length})
    if args.out:
        if args.csv:
            es.write_entries_csv([entry], args.out)
        else:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(entry.to_dict(), fh, indent=2)
        manifest.outputs.append(str(args.out))
    else:
        if args.csv:
            w = csv.writer(sys.stdout)
            w.writerow(es.CSV_COLUMNS)
            w.writerow(entry.csv_row())
        elif args.json:
            print(json.dumps(entry.to_dict(), indent=2))
    _finish(manifest, t0, args.out)
    return 0


def read_reference(path) -> dict:
    """Reference CSV with columns m, n, energy, length."""
    ref = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ref[(int(row["m"]), int(row["n"]))] = (float(row["energy"]), float(row["length"]))
    return ref


def grid_text(entries, n_max: int) -> str:
    """Energy and length laid out on an n (rows) by m (columns) grid."""
    by = {(e.pair.m, e.pair.n): e for e in entries}
    lines = []
    for title, attr in (("energy", "energy"), ("length", "length")):
        lines.append(f"{title} (rows n, columns m)")
        lines.append("n\\m " + "".join(f"{m:>10d}" for m in range(1, n_max)))
        for n in range(2, n_max + 1):
            cells = []
            for m in range(1, n_max):
                e = by.get((m, n))
                cells.append(f"{getattr(e, attr):10.2f}" if e else " " * 10)
            lines.append(f"{n:<4d}" + "".join(cells))
        lines.append("")
    return "\n".join(lines)


def compare_reference(entries, ref: dict, tol: float) -> list:
    rows = []
    for e in entries:
        key = (e.pair.m, e.pair.n)
        if key not in ref:
            continue
        ref_e, ref_l = ref[key]
        de = abs(e.energy - ref_e) / abs(ref_e)
        dl = abs(e.length - ref_l) / abs(ref_l)
        rows.append({"m": key[0], "n": key[1], "energy": e.energy, "ref_energy": ref_e,
                     "rel_energy": de, "length": e.length, "ref_length": ref_l,
                     "rel_length": dl, "within_tol": bool(de <= tol and dl <= tol)})
    return rows


def cmd_table(args) -> int:
    t0 = time.perf_counter()
    entries = es.spectrum_table(args.nmax, _series(args), args.lattice)
    manifest = RunManifest("table", _params(args), results={"rows": len(entries)})
    if args.out:
        es.write_entries_csv(entries, args.out)
        grid_path = Path(args.out).with_suffix(".txt")
        grid_path.write_text(grid_text(entries, args.nmax), encoding="utf-8")
        manifest.outputs += [str(args.out), str(grid_path)]
    else:
        w = csv.writer(sys.stdout)
        w.writerow(es.CSV_COLUMNS)
        for e in entries:
            w.writerow(e.csv_row())
    print(grid_text(entries, args.nmax), file=sys.stderr if not args.out else sys.stdout)
    if args.reference:
        rows = compare_reference(entries, read_reference(args.reference), args.tol)
        flagged = [r for r in rows if not r["within_tol"]]
        for r in rows:
            mark = "ok" if r["within_tol"] else "FLAG"
            print(f"({r['m']},{r['n']}) energy {r['energy']:.4f} vs {r['ref_energy']:.4f} "
                  f"({100 * r['rel_energy']:.2f}%), length {r['length']:.4f} vs "
                  f"{r['ref_length']:.4f} ({100 * r['rel_length']:.2f}%) {mark}")
        manifest.results["reference_comparison"] = rows
        manifest.results["flagged"] = len(flagged)
    _finish(manifest, t0, args.out)
    return 0


def cmd_gap(args) -> int:
    t0 = time.perf_counter()
    report = es.energy_gap_check(args.nmax, args.samples, _series(args), args.lattice)
    doc = report.to_dict()
    print(f"threshold 8 sqrt(pi/3) = {report.threshold:.6f}")
    print(f"min energy = {report.min_energy:.6f} at (m, n) = {report.min_energy_pair}")
    print(f"min Re G2 on boundary = {report.min_re_g2:.12f} at tau = "
          f"{report.min_re_g2_tau.real:.6f} + {report.min_re_g2_tau.imag:.6f}i")
    print(f"min g(omega) = {report.g_min:.12f} at omega = {report.omega_star:.12f}")
    print("PASS" if report.passed else "FAIL: " + "; ".join(report.failures))
    manifest = RunManifest("gap", _params(args), results=doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, default=_json_default)
        manifest.outputs.append(str(args.out))
    _finish(manifest, t0, args.out)
    if not report.passed:
        raise CheckFailedError("; ".join(report.failures))
    return 0


def cmd_synthesize(args) -> int:
    t0 = time.perf_counter()
    pair = es.AdmissiblePair(args.m, args.n)
    points = args.points if args.points is not None else 128 * pair.n
    syn = es.synthesize_elastica(pair, points, closure_tol=args.closure_tol)
    print(f"closure defect = {syn.closure_defect:.3e}")
    print(f"winding number = {syn.winding}")
    print(f"length = {syn.length:.10f}")
    manifest = RunManifest("synthesize", _params(args),
                           results={"closure_defect": syn.closure_defect,
                                    "winding": syn.winding, "p": syn.p, "length": syn.length})
    if args.out:
        save_curve(syn.curve, args.out)
        manifest.outputs.append(str(args.out))
    _finish(manifest, t0, args.out)
    return 0


def _load_or_preset(args) -> DiscreteCurveS2:
    if args.input and args.preset:
        raise InvalidInputError("give either --input or --preset, not both")
    if args.input:
        return load_curve(args.input)
    if args.preset == "subthreshold":
        return perturbed_great_circle(args.points, seed=args.seed, target_energy=PRESET_ENERGY)
    if args.preset == "great-circle":
        from .curve import great_circle
        return great_circle(args.points)
    raise InvalidInputError("one of --input or --preset is required")


def cmd_flow(args) -> int:
    t0 = time.perf_counter()
    curve = _load_or_preset(args)
    if args.steps == 0:
        diag = ef.curve_diagnostics(curve)
        for k, v in diag.items():
            print(f"{k} = {v}")
        manifest = RunManifest("flow", _params(args), results=diag)
        if args.out:
            ef.run_flow(curve, ef.FlowConfig(max_steps=0)).write_csv(args.out)
            manifest.outputs.append(str(args.out))
        _finish(manifest, t0, args.out)
        return 0
    cfg = ef.FlowConfig(dt=args.dt, max_steps=args.steps, reparam_interval=args.reparam,
                        grad_tol=args.grad_tol, scheme=args.scheme,
                        sample_interval=args.snapshot_interval)
    status = 0
    try:
        traj = ef.run_flow(curve, cfg)
    except StiffnessError as exc:
        traj = exc.trajectory
        print(f"stiffness failure: {exc}", file=sys.stderr)
        status = 3
    final = traj.samples[-1]
    manifest = RunManifest("flow", _params(args), results={
        "status": traj.status, "steps": len(traj.records) - 1, "time": final.time,
        "initial_energy": traj.samples[0].energy, "final_energy": final.energy,
        "final_grad_norm": final.grad_norm, "final_length": final.length})
    if args.out:
        traj.write_csv(args.out)
        manifest.outputs.append(str(args.out))
        if args.snapshots:
            snap_dir = Path(args.out).with_suffix("")
            snap_dir = snap_dir.with_name(snap_dir.name + "_snapshots")
            snap_dir.mkdir(parents=True, exist_ok=True)
            for st in traj.samples:
                p = snap_dir / f"step_{st.step:07d}.json"
                save_curve(st.curve, p)
                manifest.outputs.append(str(p))
        if args.final_curve:
            save_curve(final.curve, args.final_curve)
            manifest.outputs.append(str(args.final_curve))
    print(f"status = {traj.status}")
    print(f"steps = {len(traj.records) - 1}, time = {final.time:.6g}")
    print(f"energy {traj.samples[0].energy:.10f} -> {final.energy:.10f} (2 pi = {2 * math.pi:.10f})")
    print(f"grad norm = {final.grad_norm:.3e}")
    _finish(manifest, t0, args.out)
    return status


def cmd_lift_mesh(args) -> int:
    t0 = time.perf_counter()
    curve = load_curve(args.input)
    unit = curve if curve.speed_tag == "unit" else ef.reparametrize_arclength(curve)
    lift = qh.horizontal_lift(qh.to_speed_two(unit), loops=args.loops)
    tg = qh.build_hopf_torus(lift, args.nphi)
    willmore = qh.willmore_energy(unit)
    mesh_w = qh.mesh_willmore_energy(tg)
    check = qh.hopf_willmore_check(unit)
    results = {
        "willmore_energy": willmore,
        "mesh_willmore_energy": mesh_w,
        "elastic_energy": willmore / math.pi,
        "holonomy_phase": lift.holonomy_phase,
        "projection_residual": qh.projection_residual(lift),
        "hopf_willmore_pointwise": check.pointwise,
        "hopf_willmore_integrated": check.integrated,
        "hopf_willmore_residual": check.residual,
    }
    manifest = RunManifest("lift-mesh", _params(args), results=results)
    if args.out:
        results["projection_center"] = qh.write_obj(tg, args.out).tolist()
        lift_path = Path(args.out).with_suffix(".lift.json")
        qh.write_lift_json(lift, lift_path)
        manifest.outputs += [str(args.out), str(lift_path)]
    for k, v in results.items():
        print(f"{k} = {v}")
    _finish(manifest, t0, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_series(p):
    p.add_argument("--max-terms", type=int, default=64, help="q-series term cap")
    p.add_argument("--tail-tol", type=float, default=1e-16, help="q-series truncation tolerance")
    p.add_argument("--lattice", choices=es.LATTICE_MODES, default="real",
                   help="tau representative used in the energy formula")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastica-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="length and energy of one closed elastica")
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output (default)")
    fmt.add_argument("--csv", action="store_true", help="CSV output")
    p.add_argument("-o", "--out", help="output file (stdout if omitted)")
    _add_series(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("table", help="all admissible pairs up to n_max")
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("-o", "--out", help="CSV path; a grid text file is written next to it")
    p.add_argument("--reference", help="CSV (m,n,energy,length) to compare against")
    p.add_argument("--tol", type=float, default=0.02, help="relative tolerance for --reference")
    _add_series(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("gap", help="verify the energy gap above 2 pi")
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("-o", "--out", help="report JSON path")
    _add_series(p)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("synthesize", help="sample a closed elastica as a curve file")
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    p.add_argument("--points", type=int, default=None, help="default 128 n")
    p.add_argument("--closure-tol", type=float, default=1e-4)
    p.add_argument("-o", "--out", help="curve JSON path")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("flow", help="run the elastic-energy gradient flow")
    p.add_argument("--input", help="curve JSON")
    p.add_argument("--preset", choices=("subthreshold", "great-circle"))
    p.add_argument("--points", type=int, default=32, help="samples for presets")
    p.add_argument("--seed", type=int, default=PRESET_SEED)
    p.add_argument("--dt", type=float, default=None, help="time step (explicit: capped at stability limit)")
    p.add_argument("--steps", type=int, default=20000, help="max steps; 0 prints diagnostics only")
    p.add_argument("--scheme", choices=("explicit", "semi_implicit"), default="explicit")
    p.add_argument("--reparam", type=int, default=10, help="reparametrize every k steps")
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--snapshots", action="store_true", help="write curve snapshots")
    p.add_argument("--snapshot-interval", type=int, default=500)
    p.add_argument("--final-curve", help="write the terminal curve to this JSON file")
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("lift-mesh", help="horizontal lift and Hopf torus mesh")
    p.add_argument("--input", required=True, help="curve JSON")
    p.add_argument("--nphi", type=int, default=64)
    p.add_argument("--loops", type=int, default=1)
    p.add_argument("--out", help="OBJ path; lift samples go to <out>.lift.json")
    p.set_defaults(func=cmd_lift_mesh)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
