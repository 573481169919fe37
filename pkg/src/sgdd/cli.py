"""Command-line entry point: `sgdd solve|verify|study <file> [--threads k] [--out dir]`.

Exit codes: 0 on success/convergence, 1 on numerical failure
(non-convergence or verification band violations), 2 on usage errors
(bad arguments, malformed configs).  Artifacts carry the resolved
configuration: CSV files as comment headers, reports as JSON fields, and
every output directory gets a config.txt with the exact resolved file.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path


from .bench import STUDY_KINDS, StudySpec, run_study
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .mcs import DEFAULT_PROBES, run_mcs, verify_against_mcs
from .mesh import unit_square, write_vtk
from .solvers import (
    moments,
    solve_deterministic,
    solve_linear_stochastic,
    solve_nonlinear_stochastic,
)

__all__ = ["main", "console_main"]

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


def _write_config(outdir: Path, config: RunConfig):
    (outdir / "config.txt").write_text(serialize_config(config))


def _csv_with_config(path, config, header, rows):
    with open(path, "w", newline="") as fh:
        for line in serialize_config(config).strip().splitlines():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def cmd_solve(config: RunConfig, outdir: Path) -> int:
    """Run the configured solve; writes solution VTK, moments CSV, report JSON."""
    outdir.mkdir(parents=True, exist_ok=True)
    _write_config(outdir, config)
    title = f"sgdd solve ({config.problem}); full config in config.txt"
    if config.is_stochastic:
        if config.is_nonlinear:
            sol, report = solve_nonlinear_stochastic(config)
        else:
            sol, report = solve_linear_stochastic(config)
        mean, std = moments(sol)
        mesh = sol.mesh
        write_vtk(outdir / "solution.vtk", mesh, {"mean": mean, "std": std}, title=title)
        rows = [
            (f"{x:.17g}", f"{y:.17g}", repr(float(m)), repr(float(s)))
            for (x, y), m, s in zip(mesh.vertices, mean, std)
        ]
        _csv_with_config(outdir / "moments.csv", config, ["x", "y", "mean", "std"], rows)
    else:
        u, report = solve_deterministic(config)
        mesh = unit_square(config.mesh_n)
        write_vtk(outdir / "solution.vtk", mesh, {"u": u}, title=title)
        rows = [
            (f"{x:.17g}", f"{y:.17g}", repr(float(v)), "0.0")
            for (x, y), v in zip(mesh.vertices, u)
        ]
        _csv_with_config(outdir / "moments.csv", config, ["x", "y", "mean", "std"], rows)

    payload = json.loads(report.to_json())
    payload["config"] = {k: (v if v is not None else "auto") for k, v in config.__dict__.items()}
    with open(outdir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return EXIT_OK if report.converged else EXIT_NUMERICAL


def cmd_verify(config: RunConfig, outdir: Path) -> int:
    """Solve with the coupled system and with Monte Carlo; compare probes.

    Exit 0 iff every probe mean and std lies inside the Monte Carlo 3-sigma
    band; violating probes are listed on stderr.
    """
    if not config.is_stochastic:
        print("verify requires a stochastic problem", file=sys.stderr)
        return EXIT_USAGE
    outdir.mkdir(parents=True, exist_ok=True)
    _write_config(outdir, config)
    if config.is_nonlinear:
        sol, report = solve_nonlinear_stochastic(config)
    else:
        sol, report = solve_linear_stochastic(config)
    if not report.converged:
        print("coupled solve did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    mcs = run_mcs(config, probe_points=DEFAULT_PROBES)
    rows = verify_against_mcs(config, sol, mcs)
    header = ["x", "y", "sg_mean", "mcs_mean", "mean_band", "mean_ok",
              "sg_std", "mcs_std", "std_band", "std_ok", "ks_distance"]
    _csv_with_config(outdir / "verify.csv", config, header,
                     [[row[k] for k in header] for row in rows])
    mcs.probe_csv(outdir / "probe_samples.csv")
    bad = [row for row in rows if not (row["mean_ok"] and row["std_ok"])]
    for row in bad:
        print(
            f"probe ({row['x']}, {row['y']}) outside 3-sigma band: "
            f"mean {row['sg_mean']:.6g} vs {row['mcs_mean']:.6g} (band {row['mean_band']:.3g}), "
            f"std {row['sg_std']:.6g} vs {row['mcs_std']:.6g} (band {row['std_band']:.3g})",
            file=sys.stderr,
        )
    return EXIT_OK if not bad else EXIT_NUMERICAL


def _parse_study_file(text: str) -> StudySpec:
    study_kind = None
    sweep_raw = None
    config_lines = []
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key = stripped.split("=", 1)[0].strip() if "=" in stripped else None
        if key == "study":
            study_kind = stripped.split("=", 1)[1].strip()
        elif key == "sweep":
            sweep_raw = stripped.split("=", 1)[1].strip()
        else:
            config_lines.append(line)
    if study_kind is None:
        raise ConfigError("study file needs a 'study = <kind>' line")
    if study_kind not in STUDY_KINDS:
        raise ConfigError(f"unknown study kind {study_kind!r}; pick one of {STUDY_KINDS}")
    if not sweep_raw:
        raise ConfigError("study file needs a non-empty 'sweep = ...' line")
    sweep = []
    for item in sweep_raw.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:  # weak-scaling pairs mesh_n:nsub
            a, b = item.split(":")
            sweep.append((int(a), int(b)))
        else:
            sweep.append(int(item))
    if not sweep:
        raise ConfigError("study sweep is empty")
    base = parse_config("\n".join(config_lines))
    return StudySpec(study_kind, sweep, base)


def cmd_study(spec: StudySpec, outdir: Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    _write_config(outdir, spec.base)
    spec.output_csv = str(outdir / f"study_{spec.kind}.csv")
    run_study(spec)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sgdd",
        description="Stochastic Galerkin solves, Monte Carlo verification, and solver studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("solve", "run one configured solve"),
        ("verify", "compare the coupled solve against Monte Carlo"),
        ("study", "run a parameter study from a study spec file"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file", help="configuration file")
        p.add_argument("--threads", type=int, default=None, help="worker threads/processes")
        p.add_argument("--out", default=None, help="output directory (default from config)")

    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code else EXIT_OK

    try:
        text = Path(args.file).read_text()
    except OSError as err:
        print(f"cannot read {args.file}: {err}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "study":
            spec = _parse_study_file(text)
            config = spec.base
        else:
            config = parse_config(text)
        if args.threads is not None:
            config = replace(config, threads=args.threads).validate()
        outdir = Path(args.out) if args.out else Path(config.output_dir)
        if args.command == "study":
            spec.base = config
            return cmd_study(spec, outdir)
        if args.command == "solve":
            return cmd_solve(config, outdir)
        return cmd_verify(config, outdir)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as err:
        print(f"invalid study/config value: {err}", file=sys.stderr)
        return EXIT_USAGE


def console_main():
    sys.exit(main())
