"""Desk-scale solver studies: strong/weak subdomain sweeps, coarse-grid
ratio, condition-number growth, and random-parameter scaling.

Iteration-count columns are the reproducible surface; timing columns are
reported for orientation but are environment-dependent and never asserted.
"processes" from cluster experiments map to logical subdomains here.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import BCSpec, assemble_deterministic, assemble_stochastic_linear
from .chaos import enumerate_basis, triple_tensor
from .config import RunConfig
from .mesh import unit_square
from .randomfield import ExpKernel, kle_2d, lognormal_pce
from .solvers import (
    build_stochastic_problem,
    solve_deterministic,
    solve_linear_stochastic,
    solve_nonlinear_stochastic,
)
from .sparsela import condition_number

__all__ = [
    "StudySpec",
    "run_strong",
    "run_weak",
    "run_coarse_ratio",
    "run_cond_ratio",
    "run_param_scaling",
    "run_study",
    "write_study_csv",
]

STUDY_KINDS = ("strong", "weak", "coarse-ratio", "cond-ratio", "random-vars", "order")


@dataclass
class StudySpec:
    """One study: a sweep applied on top of a fixed base configuration."""

    kind: str
    sweep: list
    base: RunConfig = field(default_factory=RunConfig)
    output_csv: str = None

    def validate(self):
        if self.kind not in STUDY_KINDS:
            raise ValueError(f"unknown study kind {self.kind!r}; pick one of {STUDY_KINDS}")
        if not self.sweep:
            raise ValueError("study sweep is empty")
        self.base.validate()
        return self


def _solve_point(config: RunConfig):
    if not config.is_stochastic:
        _, report = solve_deterministic(config)
    elif config.is_nonlinear:
        _, report = solve_nonlinear_stochastic(config)
    else:
        _, report = solve_linear_stochastic(config)
    return report


def _point_row(config, report):
    return {
        "outer_iterations": report.outer_iterations,
        "coarse_iterations": round(report.coarse_iterations, 2),
        "picard_iterations": report.picard_iterations,
        "pc_setup_seconds": round(report.pc_setup_seconds, 4),
        "solve_seconds": round(report.solve_seconds, 4),
        "converged": report.converged,
    }


def _solver_time(row):
    return row["pc_setup_seconds"] + row["solve_seconds"]


def run_strong(spec: StudySpec):
    """Fixed problem, growing subdomain counts; speedup against the first
    sweep point (nsub = 1 if present)."""
    spec.validate()
    rows = []
    for nsub in spec.sweep:
        config = replace(spec.base, nsub=int(nsub)).validate()
        report = _solve_point(config)
        row = {"nsub": int(nsub), "dof": _system_dof(config)}
        row.update(_point_row(config, report))
        rows.append(row)
    t_base = _solver_time(rows[0])
    np_base = rows[0]["nsub"]
    for row in rows:
        t = _solver_time(row)
        row["speedup"] = round(t_base / t, 3) if t > 0 else float("nan")
        row["efficiency"] = round(row["speedup"] * np_base / row["nsub"], 3)
    return rows


def run_weak(spec: StudySpec):
    """Paired (mesh_n, nsub) sweep holding dof per subdomain roughly fixed."""
    spec.validate()
    rows = []
    for mesh_n, nsub in spec.sweep:
        config = replace(spec.base, mesh_n=int(mesh_n), nsub=int(nsub)).validate()
        report = _solve_point(config)
        row = {"mesh_n": int(mesh_n), "nsub": int(nsub), "dof": _system_dof(config)}
        row.update(_point_row(config, report))
        row["dof_per_subdomain"] = round(row["dof"] / row["nsub"], 1)
        rows.append(row)
    t_base = _solver_time(rows[0])
    for row in rows:
        t = _solver_time(row)
        row["weak_efficiency"] = round(t_base / t, 3) if t > 0 else float("nan")
    return rows


def _system_dof(config):
    nv = (config.mesh_n + 1) ** 2
    if not config.is_stochastic:
        return nv
    return nv * len(enumerate_basis(config.M, config.p_out))


def run_coarse_ratio(spec: StudySpec):
    """Fixed fine mesh, shrinking coarse grids (growing fine:coarse ratio)."""
    spec.validate()
    rows = []
    for ratio in spec.sweep:
        config = replace(spec.base, coarse_ratio=int(ratio)).validate()
        report = _solve_point(config)
        r = config.refinement_factor
        actual = ((config.mesh_n + 1) / (config.mesh_n // r + 1)) ** 2
        row = {
            "coarse_ratio": int(ratio),
            "vertex_ratio": round(actual, 2),
        }
        row.update(_point_row(config, report))
        rows.append(row)
    return rows


def run_cond_ratio(spec: StudySpec):
    """Condition-number growth of the coupled system over the deterministic
    one on the same (small) mesh, penalty boundary conditions.

    The deterministic baseline uses the sigma = 0 coefficient exp(g0) so a
    single number anchors the whole sweep.
    """
    spec.validate()
    base = spec.base
    mesh = unit_square(base.mesh_n)
    bc = BCSpec(
        dirichlet={"left": 0.0, "right": 0.0, "bottom": 0.0, "top": 0.0},
        mode="penalty",
        penalty_weight=1e7,
    )
    A_det, _ = assemble_deterministic(mesh, math.exp(base.g0), 1.0, bc)
    cond_det = condition_number(A_det)
    rows = []
    for M in spec.sweep:
        M = int(M)
        kle = kle_2d(ExpKernel(base.sigma, base.bx, base.by), M, g0=base.g0)
        input_basis = enumerate_basis(M, base.p_in)
        output_basis = enumerate_basis(M, base.p_out)
        pce = lognormal_pce(kle, input_basis, mesh)
        m = triple_tensor(input_basis, output_basis)
        sys_ = assemble_stochastic_linear(mesh, pce, m, output_basis, 1.0, bc)
        cond_sto = condition_number(sys_.matrix)
        rows.append({
            "M": M,
            "terms": len(output_basis),
            "dof": sys_.dim,
            "cond_deterministic": cond_det,
            "cond_stochastic": cond_sto,
            "ratio": round(cond_sto / cond_det, 4),
        })
    return rows


def run_param_scaling(spec: StudySpec):
    """Sweep the number of random variables ('random-vars') or the output
    expansion order ('order') on a fixed mesh."""
    spec.validate()
    rows = []
    for value in spec.sweep:
        value = int(value)
        if spec.kind == "random-vars":
            config = replace(spec.base, M=value).validate()
        else:
            config = replace(spec.base, p_out=value).validate()
        report = _solve_point(config)
        row = {
            "sweep_value": value,
            "M": config.M,
            "p_out": config.p_out,
            "terms": len(enumerate_basis(config.M, config.p_out)),
            "dof": _system_dof(config),
        }
        row.update(_point_row(config, report))
        rows.append(row)
    return rows


_RUNNERS = {
    "strong": run_strong,
    "weak": run_weak,
    "coarse-ratio": run_coarse_ratio,
    "cond-ratio": run_cond_ratio,
    "random-vars": run_param_scaling,
    "order": run_param_scaling,
}


def run_study(spec: StudySpec):
    """Dispatch on the study kind and optionally write CSV + manifest."""
    spec.validate()
    rows = _RUNNERS[spec.kind](spec)
    if spec.output_csv:
        write_study_csv(spec.output_csv, spec, rows)
    return rows


def write_study_csv(path, spec: StudySpec, rows):
    """Schema-stable CSV plus a JSON manifest embedding the full config."""
    from .config import serialize_config

    header = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        for line in serialize_config(spec.base).strip().splitlines():
            fh.write(f"# {line}\n")
        fh.write(f"# study = {spec.kind}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[k] for k in header])
    manifest = {
        "study": spec.kind,
        "sweep": [list(s) if isinstance(s, (tuple, list)) else s for s in spec.sweep],
        "config": {k: (v if v is not None else "auto") for k, v in spec.base.__dict__.items()},
        "rows": [{k: _jsonable(v) for k, v in row.items()} for row in rows],
    }
    with open(str(path) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v
