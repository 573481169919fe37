"""Desk-scale solver studies: the programmable counterparts of the CLI's
`study` subcommand.

Runs a strong sweep, a coarse-grid-ratio sweep, and the condition-number
growth study, writing schema-stable CSVs plus JSON manifests.
"""

from sgdd.bench import StudySpec, run_study
from sgdd.config import RunConfig


def show(rows, cols):
    print("  " + "  ".join(f"{c:>18}" for c in cols))
    for r in rows:
        print("  " + "  ".join(f"{r[c]!s:>18}" for c in cols))


# strong scaling: fixed problem, growing subdomain counts
base = RunConfig(mesh_n=48, M=3, p_in=2, p_out=3, sigma=0.3,
                 preconditioner="2gv3", seed=0).validate()
rows = run_study(StudySpec("strong", [1, 2, 4, 8], base, output_csv="study_strong.csv"))
print("strong scaling (2GV3):")
show(rows, ["nsub", "outer_iterations", "coarse_iterations", "speedup", "efficiency"])

# coarse-grid ratio: the optimum sits at the largest affordable coarse grid
base = RunConfig(problem="nonlinear-stochastic", mesh_n=40, M=3, sigma=0.3,
                 nsub=4, preconditioner="2gv3", seed=0).validate()
rows = run_study(StudySpec("coarse-ratio", [4, 16, 64, 100], base,
                           output_csv="study_ratio.csv"))
print("\ncoarse-grid ratio (nonlinear):")
show(rows, ["coarse_ratio", "vertex_ratio", "outer_iterations", "picard_iterations"])

# condition-number growth with the stochastic dimension (penalty BCs)
base = RunConfig(mesh_n=4, p_in=2, p_out=3, sigma=0.3,
                 preconditioner="ras1", seed=0).validate()
rows = run_study(StudySpec("cond-ratio", [2, 3, 5, 7], base,
                           output_csv="study_cond.csv"))
print("\ncondition-number growth with the number of random variables:")
show(rows, ["M", "terms", "dof", "ratio"])

print("\nwrote study_strong.csv, study_ratio.csv, study_cond.csv (+ .manifest.json each)")
