"""Command-line entry point for reproducible runs.

Subcommands: ``sample-field``, ``bands``, ``dynamics``, ``verify``.  Every
command reads one JSON config (flags override fields), echoes the resolved
config into the output directory, and writes deterministic CSV/JSON artifacts:
re-running from the echoed config reproduces every output byte for byte.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bands as bd
from . import dynamics as dyn
from . import verify as vf
from .errors import NumericalError, ValidationError
from .field import (
    FieldRealization,
    FieldSpec,
    Grid1D,
    spec_from_dict,
    spec_to_dict,
    vector_potential,
    write_field_csv,
)
from .sampling import sample_field, seed_sequence
from .svgplot import line_plot_svg

DEFAULT_CONFIG = {
    "field": {"type": "constant", "b0": 1.0},
    "grid": {"x_min": -30.0, "x_max": 30.0, "n_points": 6001},
    "kgrid": None,           # null -> automatic window from range(a) + margin
    "n_k": 101,
    "n_max": 5,
    "target_energy": None,   # null -> (n_max + 1) * max(1, |mean b|)
    "tol_flat": 1e-6,
    "seed": None,
    "threads": None,
    "dynamics": {
        "packet": {"profile": "band0", "k_center": 0.0, "sigma_k": 0.5,
                   "x2_center": 0.0, "x1_center": 0.0, "x1_sigma": 1.0},
        "horizon": 200.0,
        "n_times": 64,
    },
    "out_dir": "runs/out",
}


def load_config(path: str | None, overrides: argparse.Namespace) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        loaded = json.loads(Path(path).read_text())
        for key, value in loaded.items():
            # only the dynamics block merges (each entry has a default);
            # field/grid/kgrid sub-documents replace wholesale
            if key == "dynamics" and isinstance(value, dict):
                config[key].update(value)
            else:
                config[key] = value
    if getattr(overrides, "seed", None) is not None:
        config["seed"] = overrides.seed
    if getattr(overrides, "threads", None) is not None:
        config["threads"] = overrides.threads
    if getattr(overrides, "out", None) is not None:
        config["out_dir"] = overrides.out
    return config


def resolve_run(config: dict) -> tuple[FieldSpec, Grid1D, FieldRealization, bd.KGrid, float]:
    spec = spec_from_dict(config["field"])
    g = config["grid"]
    grid = Grid1D(g["x_min"], g["x_max"], g["n_points"])
    seed = config.get("seed")
    if spec.is_random and seed is None:
        raise ValidationError("random field spec requires a seed (config or --seed)")
    field = sample_field(spec, grid, seed)
    target = config.get("target_energy")
    if target is None:
        mean_b = abs(float(np.mean(field.values)))
        target = (config["n_max"] + 1) * max(1.0, mean_b)
    kg = config.get("kgrid")
    if kg is None:
        kgrid = bd.default_kgrid(vector_potential(field), target, config.get("n_k", 101))
        config["kgrid"] = {"k_min": kgrid.k_min, "k_max": kgrid.k_max, "n_k": kgrid.n_k}
    else:
        kgrid = bd.KGrid(kg["k_min"], kg["k_max"], kg["n_k"])
    return spec, grid, field, kgrid, target


def echo_config(config: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(config, sort_keys=True, indent=2) + "\n")


def threads_of(config: dict) -> int | None:
    threads = config.get("threads")
    return os.cpu_count() if threads is None else threads


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_sample_field(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    out = Path(config["out_dir"])
    spec = spec_from_dict(config["field"])
    g = config["grid"]
    grid = Grid1D(g["x_min"], g["x_max"], g["n_points"])
    echo_config(config, out)
    if args.ensemble is not None:
        if args.ensemble < 1:
            raise ValidationError("--ensemble must be >= 1")
        base = config.get("seed")
        if base is None:
            raise ValidationError("ensemble sampling requires a seed")
        for i, seed in enumerate(seed_sequence(base, args.ensemble)):
            member = sample_field(spec, grid, seed)
            write_field_csv(member, out / f"field_{i:03d}.csv", spec)
        print(f"wrote {args.ensemble} realizations to {out}")
    else:
        field = sample_field(spec, grid, config.get("seed"))
        write_field_csv(field, out / "field.csv", spec)
        print(f"wrote {out / 'field.csv'}")
    return 0


def _write_bands_csv(path: Path, funcs: list[bd.BandFunction]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k", "energy", "velocity"])
        for f in funcs:
            for k, e, v in zip(f.kgrid.values, f.energies, f.velocities):
                writer.writerow([f.n, repr(float(k)), repr(float(e)), repr(float(v))])


def cmd_bands(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    spec, grid, field, kgrid, target = resolve_run(config)
    out = Path(config["out_dir"])
    echo_config(config, out)
    funcs = bd.sweep(field, kgrid, config["n_max"], threads=threads_of(config))
    structure = bd.assemble_bands(funcs, config["tol_flat"], metadata={
        "field": spec_to_dict(spec), "seed": config.get("seed"),
        "grid": config["grid"], "n_max": config["n_max"],
        "target_energy": target,
    })
    classes = bd.spectrum_sets(structure)
    vbands = bd.velocity_bands(funcs)

    _write_bands_csv(out / "bands.csv", funcs)
    summary = {
        "metadata": structure.metadata,
        "tol_flat": structure.tol_flat,
        "bands": [dataclasses.asdict(b) for b in structure.intervals],
        "velocity_bands": [list(v) for v in vbands],
        "ac_intervals": [list(iv) for iv in classes.ac_intervals],
        "pp_points": list(classes.pp_points),
    }
    (out / "bands_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    if args.svg:
        line_plot_svg(out / "bands.svg", funcs[0].kgrid.values,
                      [(f"n = {f.n}", f.energies) for f in funcs],
                      x_label="k", y_label="energy", title="energy bands")
    print(f"wrote {out / 'bands.csv'} and {out / 'bands_summary.json'}")
    if args.verify_shift is not None:
        dev = bd.verify_shift_covariance(field, args.verify_shift, kgrid,
                                         config["n_max"], threads=threads_of(config))
        print(f"shift-covariance deviation at z = {args.verify_shift:g}: {dev:.6e}")
    return 0


def cmd_dynamics(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    spec, grid, field, kgrid, target = resolve_run(config)
    out = Path(config["out_dir"])
    echo_config(config, out)
    dyn_cfg = config["dynamics"]
    packet_spec = dyn.PacketSpec(**dyn_cfg["packet"])
    sweep = bd.sweep_fibers(field, kgrid, config["n_max"],
                            threads=threads_of(config), keep_vectors=True)
    packet = dyn.prepare_packet(sweep, packet_spec)
    series = dyn.simulate(packet, horizon=dyn_cfg["horizon"],
                          n_times=dyn_cfg["n_times"])
    with (out / "dynamics.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "norm", "q1_moment", "q2_mean", "ballistic_residual"])
        for row in zip(series.times, series.norm, series.q1_moment,
                       series.q2_mean, series.ballistic_residual):
            writer.writerow([repr(float(v)) for v in row])
    summary = {
        "packet": dataclasses.asdict(packet_spec),
        "capture": packet.capture,
        "localization_bound": dyn.localization_bound(packet),
        "sup_q1_moment": float(series.q1_moment.max()),
        "final_ballistic_residual": float(series.ballistic_residual[-1]),
        "final_q2_mean": float(series.q2_mean[-1]),
    }
    (out / "dynamics_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    if args.svg:
        line_plot_svg(out / "dynamics.svg", series.times,
                      [("||Q1 psi||", series.q1_moment),
                       ("<Q2>", series.q2_mean),
                       ("residual", series.ballistic_residual)],
                      x_label="t", title="transport observables")
    print(f"wrote {out / 'dynamics.csv'} and {out / 'dynamics_summary.json'}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    names = args.criteria.split(",") if args.criteria else None
    results = vf.run_all(names, threads=args.threads)
    if args.report == "json":
        print(json.dumps([dataclasses.asdict(r) for r in results], indent=2))
    else:
        for r in results:
            status = "PASS" if r.passed else ("SOFT-FAIL" if r.soft else "FAIL")
            print(f"{status:9s} {r.name}: {r.details}")
    hard_failures = [r.name for r in results if not r.passed and not r.soft]
    if hard_failures:
        print(f"failing checks: {', '.join(hard_failures)}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="umfband",
        description="Band structure and transport for unidirectionally "
                    "constant magnetic fields")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override the seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: machine parallelism)")
        p.add_argument("--out", type=str, default=None, help="output directory")

    p_sample = sub.add_parser("sample-field", help="draw field realizations")
    common(p_sample)
    p_sample.add_argument("--ensemble", type=int, default=None,
                          help="number of realizations (seeds enumerated from --seed)")
    p_sample.set_defaults(func=cmd_sample_field)

    p_bands = sub.add_parser("bands", help="sweep fibers and assemble bands")
    common(p_bands)
    p_bands.add_argument("--svg", action="store_true", help="also write bands.svg")
    p_bands.add_argument("--verify-shift", type=float, default=None, metavar="Z",
                         help="print the shift-covariance deviation at shift Z")
    p_bands.set_defaults(func=cmd_bands)

    p_dyn = sub.add_parser("dynamics", help="evolve a wave packet")
    common(p_dyn)
    p_dyn.add_argument("--svg", action="store_true", help="also write dynamics.svg")
    p_dyn.set_defaults(func=cmd_dynamics)

    p_verify = sub.add_parser("verify", help="run the acceptance checks")
    p_verify.add_argument("--report", choices=("text", "json"), default="text")
    p_verify.add_argument("--criteria", type=str, default=None,
                          help="comma-separated subset of checks to run")
    p_verify.add_argument("--threads", type=int, default=None)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
