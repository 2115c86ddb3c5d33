"""CSV, summary, and figure emission for experiment results.

Files are byte-reproducible from the same config on the same platform:
floats are written with shortest round-trip repr, summary keys in fixed
order, and figures with pinned SVG hashing.  Wall time is deliberately
kept out of the files (it is reported on the console instead).
"""

from __future__ import annotations

import csv
import math

import numpy as np

from . import __version__
from .experiments import ExperimentResult
from .plots import plot_curves


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(result: ExperimentResult, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_fmt(v) for v in row])


def write_summary(result: ExperimentResult, path: str) -> None:
    lines = [
        f"experiment = {result.experiment}",
        f"tool = qctl {__version__}",
        f"partial = {_fmt(result.partial)}",
    ]
    for key, value in result.config.describe().items():
        lines.append(f"config.{key} = {value}")
    for i, warning in enumerate(result.warnings, start=1):
        lines.append(f"warning_{i} = {warning}")
    for key, value in result.summary.items():
        lines.append(f"{key} = {_fmt(value)}")
    verdicts = result.verdicts()
    lines.append(f"verdicts_evaluated = {len(verdicts)}")
    lines.append(f"pass = {_fmt(result.passed)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _column(result: ExperimentResult, name: str) -> np.ndarray:
    idx = result.columns.index(name)
    return np.array([row[idx] for row in result.rows], dtype=float)


def _per_eps_sup(result: ExperimentResult, value_col: str) -> tuple[np.ndarray, np.ndarray]:
    eps = _column(result, "epsilon")
    vals = _column(result, value_col)
    uniq = sorted(set(eps), reverse=True)
    sups = [np.max(vals[eps == e]) for e in uniq]
    return np.array(uniq), np.array(sups)


def write_plot(result: ExperimentResult, path: str) -> None:
    name = result.experiment
    s = result.summary
    if name == "transfer":
        plot_curves(path, "tau", "fidelity with e2", "Population transfer",
                    [("", _column(result, "tau"), _column(result, "fidelity_e2"))])
    elif name == "rwa-gap":
        eps = _column(result, "epsilon")
        uniq = sorted(set(eps), reverse=True)
        if len(uniq) == 1:
            mask = eps == uniq[0]
            plot_curves(path, "tau", "squared norm difference",
                        f"Real vs complex control gap (eps={uniq[0]:g})",
                        [("", _column(result, "tau")[mask],
                          _column(result, "sq_norm_diff")[mask])])
        else:
            xs, sups = _per_eps_sup(result, "sq_norm_diff")
            fit = None
            if s.get("slope_sup_diff") is not None:
                # stored slope is for the sup of the norm; square the line
                fit = (2.0 * s["slope_sup_diff"], 0.0)
            curves = [("sup over tau", xs, sups)]
            plot_curves(path, "epsilon", "sup squared norm difference",
                        "Real vs complex control gap", curves, logx=True, logy=True)
    elif name == "scaling":
        alphas = _column(result, "alpha")
        curves = []
        for a in sorted(set(alphas), reverse=True):
            mask = alphas == a
            label = f"alpha={a:g}"
            slope = s.get(f"slope_alpha_{a:g}")
            if slope is not None:
                label += f" (slope {slope:.3f})"
            curves.append((label, _column(result, "epsilon")[mask],
                           _column(result, "sup_flow_diff")[mask]))
        plot_curves(path, "epsilon", "sup flow difference",
                    "Perturbed vs unperturbed flows", curves, logx=True, logy=True)
    elif name == "delta-sweep":
        plot_curves(path, "delta", "final fidelity with e2",
                    "Robustness to amplitude inhomogeneity",
                    [("", _column(result, "delta"), _column(result, "fidelity_e2"))])
    elif name == "e-sweep":
        plot_curves(path, "E", "final fidelity with e2",
                    "Sensitivity to the drift splitting",
                    [("", _column(result, "E"), _column(result, "fidelity_e2"))])
    elif name == "frame-check":
        plot_curves(path, "tau", "residual",
                    "Rotating-frame trajectory identity",
                    [("", _column(result, "tau"), _column(result, "frame_residual"))])
    elif name == "variation-check":
        plot_curves(path, "tau", "residual",
                    "Flow factorization residual",
                    [("", _column(result, "tau"), _column(result, "residual"))])
    elif name == "lemma-fast":
        xs, sups = _per_eps_sup(result, "abs_integral")
        label = "sup over tau"
        if s.get("slope_sup_integral") is not None:
            label += f" (slope {s['slope_sup_integral']:.3f})"
        plot_curves(path, "epsilon", "sup |integral|",
                    "Oscillatory integral magnitude", [(label, xs, sups)],
                    logx=True, logy=True)
    elif name == "adiabatic-order":
        eps = _column(result, "epsilon")
        curves = []
        for col, key in (("dist_endpoint", "slope_endpoint_dist"),
                         ("sup_deviation", "slope_sup_deviation")):
            label = col.replace("_", " ")
            if s.get(key) is not None:
                label += f" (slope {s[key]:.3f})"
            curves.append((label, eps, _column(result, col)))
        plot_curves(path, "epsilon", "error", "Slow-flow reference accuracy",
                    curves, logx=True, logy=True)
    else:  # pragma: no cover - dispatch is total over EXPERIMENTS
        raise ValueError(f"no plot defined for {name!r}")


def emit(result: ExperimentResult, prefix: str) -> dict[str, str]:
    """Write <prefix>.csv, <prefix>.svg, <prefix>.summary.json-like."""
    paths = {
        "csv": f"{prefix}.csv",
        "svg": f"{prefix}.svg",
        "summary": f"{prefix}.summary.json-like",
    }
    write_csv(result, paths["csv"])
    write_plot(result, paths["svg"])
    write_summary(result, paths["summary"])
    return paths
