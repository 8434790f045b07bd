"""Rendering study reports: delimited tables, figures, and a JSON digest.

Every study lands as one CSV with the grid in the rows, one PNG plotting
the metric decay next to it, and (for the equilibria study) a second CSV
with the per-branch table.  CSV content is a pure function of the report,
with every float printed at full precision, so identical runs produce
byte-identical files.
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

BRANCH_TABLE_COLUMNS = ("epsilon", "branch", "residual", "morse_index",
                        "lambda_1", "lambda_2", "lambda_3", "lambda_4",
                        "dist_l2", "dist_h1")


def _cell(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_report_csv(report, path):
    """One row per grid point: epsilon, every metric, the study verdict."""
    verdict = "pass" if report.passed else "fail"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", *report.metric_names, "verdict"])
        for eps, row in zip(report.epsilons, report.metrics):
            writer.writerow([_cell(eps), *(_cell(float(row[name]))
                                           for name in report.metric_names), verdict])


def write_branch_table_csv(report, path):
    """Per-branch equilibrium table, one row per (epsilon, branch) pair."""
    table = report.metadata.get("branch_table")
    if table is None:
        raise ValueError(f"study {report.study} carries no branch table")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BRANCH_TABLE_COLUMNS)
        for row in table:
            writer.writerow([_cell(row[name]) for name in BRANCH_TABLE_COLUMNS])


def render_figure(report, path):
    """Log-log decay plot of every positive metric series against the grid.

    Series that touch zero or negative values (counters, signed spectra)
    go on a second linear axis so the log axis never sees them.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    positive = [name for name in report.metric_names
                if all(v > 0.0 for v in report.series(name))]
    other = [name for name in report.metric_names if name not in positive]
    for name in positive:
        ax.loglog(report.epsilons, report.series(name), marker="o", label=name)
    if not positive:
        ax.set_xscale("log")
    if other:
        twin = ax.twinx()
        for name in other:
            twin.plot(report.epsilons, report.series(name), marker="s",
                      linestyle="--", label=name)
        twin.set_ylabel("signed / counter metrics")
        twin.legend(fontsize=8, loc="lower right")
    ax.invert_xaxis()
    ax.set_xlabel("oscillation parameter")
    ax.set_ylabel("metric value")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8, loc="best")
    verdict = "pass" if report.passed else "fail"
    ax.set_title(f"{report.study} study ({verdict})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_summary_json(reports, path):
    """Digest of all rendered studies: per-verdict booleans plus the gate."""
    digest = {
        "pass": all(rep.passed for rep in reports),
        "studies": {
            rep.study: {
                "pass": rep.passed,
                "epsilons": list(rep.epsilons),
                "verdicts": dict(sorted(rep.verdicts.items())),
            }
            for rep in reports
        },
    }
    with open(path, "w", newline="") as fh:
        json.dump(digest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return digest


def render_report(report, out_dir):
    """Write the CSV, figure, and any side tables; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{report.study}.csv",
             "figure": out / f"{report.study}.png"}
    write_report_csv(report, paths["csv"])
    render_figure(report, paths["figure"])
    if "branch_table" in report.metadata:
        paths["branches"] = out / f"{report.study}_branches.csv"
        write_branch_table_csv(report, paths["branches"])
    return paths
