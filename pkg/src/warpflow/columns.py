"""Column schema of every CSV the CLI writes.

Per-fiber columns use the suffix ``_a`` in the schema and ``_1``, ``_2``, ...
in the files. ``python3 -m warpflow.columns`` prints the Markdown table
shipped as COLUMNS.md.
"""

import re

SCHEMA = {
    "monitors.csv": {
        "t": "time",
        "vmin_a": "minimum of v_a over the circle",
        "vmax_a": "maximum of v_a over the circle",
        "grad_sq_max_a": "maximum of |∇v_a|²",
        "chi_max_a": "maximum of χ_a = |∇²v_a|² (full Hessian norm)",
        "Z_max_a": "maximum of the reaction term Z_a = (μ_a + |∇v_a|²)/v_a",
        "Q": "spatial minimum of log Π v_a^{2n_a}",
        "P": "exp(Q/2)",
        "Qcal": "spatial minimum of 2 Σ n_a log v_a (equals Q on a circle base)",
        "Pcal": "exp(Qcal/2)",
        "F_max": "maximum of F = Σ_b (B + |∇v_b|²) χ_b",
        "B_const": "B = 32 max_a sup |∇v_a|²",
        "L_min_on_Omega": "minimum of L = v_1 (v_1)_ss log v_1 on Ω (0 when Ω is empty)",
        "Omega_extent": "arclength measure of Ω = {(v_1)_ss log(v_1/δ) < 0}",
        "rm_max": "maximum of |Rm|",
        "sigma_fl_max": "maximum of the flat-block sum of |Rm|² over fibers 2..A",
        "v_neck": "v_1 at its minimum",
        "kappa0": "-(v_1)_ss / v_1 at the neck",
        "kappa1": "(λ̂_1 - (v_1)_s²) / v_1² at the neck",
        "neck_halfwidth_cells": "grid cells from the neck to where v_1 doubles",
        "typeI_ratio": "(T̂ - t) max |Rm| (NaN without T̂)",
        "vmin_sq_over_Tt": "min v² / (T̂ - t)",
        "kappa0_rescaled": "(T̂ - t) kappa0",
        "kappa1_rescaled": "(T̂ - t) kappa1",
        "Sigma_fl_rescaled": "(T̂ - t)² sigma_fl_max",
    },
    "series.csv": {
        "t": "time",
        "area": "area of the base",
        "area_rate": "∫ (p - Ř) dA, the predicted d(area)/dt",
        "gauss_bonnet": "∫ Ř dA (zero on the torus)",
        "f_upper_max": "maximum of Ř + 2p, p = Σ n_a |∇w_a|²",
        "f_lower_min": "minimum of Ř - p",
        "R_check_min": "minimum of the base scalar curvature Ř",
        "vmin_a": "minimum of v_a over the torus",
        "C0_needed": "f_upper_max when it exceeds 2μ_1/(3 v_1,min²), else 0",
        "C1_needed": "max(-Ř v_1²)_+",
    },
    "profiles.csv": {
        "r": "distance from the axis",
        "rho": "base warping ρ(r)",
        "drho": "ρ'(r)",
        "v": "fiber radius v(r)",
        "dv": "v'(r)",
        "f": "soliton potential f(r), f(0) = 0",
        "df": "f'(r)",
        "R_check": "base scalar curvature -2ρ''/ρ (NaN on the axis)",
    },
    "sweep.csv": {
        "v0": "axis value v(0)",
        "classification": "Cylinder, Incomplete or IdentityViolated",
        "r_reached": "radius where integration stopped",
        "reason": "r_max, singular:<cause> or step_underflow",
        "max_lemma_residual": "largest of the four lemma residuals",
        "normalization_residual": "max |R + |∇f|² - f - c| with fitted c",
    },
}


def schema_key(column):
    """Map a file column (``vmin_2``) to its schema entry (``vmin_a``)."""
    return re.sub(r"_\d+$", "_a", column)


def undocumented(csv_name, header):
    doc = SCHEMA[csv_name]
    return [c for c in header if c not in doc and schema_key(c) not in doc]


def markdown():
    lines = ["# CSV columns", "",
             "Per-fiber columns are written as `name_1`, `name_2`, ...; the table lists them as `name_a`.", ""]
    for name, cols in SCHEMA.items():
        lines += [f"## {name}", "", "| column | meaning |", "|---|---|"]
        lines += [f"| `{c}` | {d} |" for c, d in cols.items()]
        lines.append("")
    return "\n".join(lines)


if __name__ == "__main__":
    print(markdown())
