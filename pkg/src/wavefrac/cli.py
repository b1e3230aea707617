"""Command line entry point: ``wavefrac run|pilot|verify-1d [config] [--preset NAME] [--override k=v]``."""
from __future__ import annotations

import argparse
import logging
from pathlib import Path
import re
import sys
import time

from .config import PRESETS, ConfigError, RunConfig, load_config, serialize


def _load(args) -> RunConfig:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    return load_config(text, args.preset, args.override)


def _record_value(path: Path, key: str, value: str) -> None:
    """Replace (or append) `key = value` in a config file, keeping the other lines."""
    lines = path.read_text(encoding="utf-8").splitlines() if path.exists() else []
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    new = f"{key} = {value}"
    for i, line in enumerate(lines):
        if pattern.match(line):
            lines[i] = new
            break
    else:
        lines.append(new)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    from .driver import Simulation
    cfg = _load(args)
    out = Path(args.output or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize(cfg), encoding="utf-8")
    start = time.perf_counter()
    sim = Simulation(cfg)
    _, trace = sim.run(out)
    first = trace.first_crack
    print(f"steps: {len(trace.records)}  cells: {sim.mesh.n_cells}  "
          f"wall time: {time.perf_counter() - start:.1f}s")
    print(f"energy: {trace.initial_energy:.6e} -> {trace.records[-1].energy:.6e}  "
          f"dissipation: {trace.total_dissipation:.6e}")
    if first is None:
        print("no cracked nodes")
    else:
        x = sim.mesh.vertices[first.new_cracks]
        print(f"first crack at t = {first.t:.4f}, x1 in [{x[:, 0].min():.4f}, {x[:, 0].max():.4f}]; "
              f"cracked nodes at end: {trace.records[-1].cracked_nodes}")
    print(f"trace: {out / 'trace.csv'}  snapshots: {len(trace.snapshots)}")
    return 0


def cmd_pilot(args) -> int:
    from .driver import pilot
    cfg = _load(args)
    res = pilot(cfg)
    print(f"peak principal stress {res.peak_sigma_I:.6e} at t = {res.peak_time:.4f}, "
          f"x = ({res.peak_position[0]:.4f}, {res.peak_position[1]:.4f}) with A- = {res.amplitude_used:.6e}")
    print(f"target {cfg.pilot.target_ratio} * sigma_c = {cfg.pilot.target_ratio * cfg.phase.sigma_c:g}")
    line = f"pulse.amplitude_minus = {res.amplitude_calibrated!r}"
    print(line)
    if args.write:
        if not args.config:
            print("--write needs a config file", file=sys.stderr)
            return 2
        _record_value(Path(args.config), "pulse.amplitude_minus", repr(res.amplitude_calibrated))
        print(f"recorded in {args.config}")
    return 0


def cmd_verify(args) -> int:
    from .verification import verify_1d
    cfg = _load(args)
    out = Path(args.output or cfg.output.directory)
    res = verify_1d(cfg, output_dir=out)
    print("h,l2_error,free_end_ratio")
    for r in res.levels:
        print(f"{r.h!r},{r.l2_error!r},{r.free_end_ratio!r}")
    print("observed orders: " + ", ".join(f"{o:.3f}" for o in res.orders))
    print(f"wave speed: {res.wave_speed:.5f} (exact {res.c_exact:g})")
    ex, dg = res.spall_exact, res.spall_dg
    fmt = lambda s: "none" if s is None else f"{s.distance_from_free_end:.5f} from free end at t = {s.time:.5f}"
    print(f"spall exact: {fmt(ex)}")
    print(f"spall dg:    {fmt(dg)}")
    print(f"csv: {out / 'verify_1d.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavefrac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (("run", cmd_run, "run a simulation"),
                                 ("pilot", cmd_pilot, "calibrate the pulse amplitude"),
                                 ("verify-1d", cmd_verify, "compare a strip run with the bar oracle")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", nargs="?", help="config file with 'section.key = value' lines")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--output", help="output directory (default: output.directory)")
        if name == "pilot":
            p.add_argument("--write", action="store_true",
                           help="record the calibrated amplitude in the config file")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
