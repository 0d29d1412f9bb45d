"""Figure builders over the summary-CSV schema.

Charts are derived from the CSV alone; nothing is recomputed from market
data, so the delimited files stay the single source of truth.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

__all__ = [
    "REQUIRED_COLUMNS",
    "METRIC_COLUMNS",
    "SchemaError",
    "load_summary",
    "metrics_table",
    "build_metrics_figure",
    "build_cost_profit_figure",
    "plot_metrics",
    "plot_cost_profit",
]

REQUIRED_COLUMNS = (
    "strategy",
    "config_id",
    "mean_std",
    "var95",
    "cvar95",
    "mean_cost",
    "premium_income",
    "n_episodes",
    "seed",
)

METRIC_COLUMNS = ("mean_std", "var95", "cvar95")
METRIC_LABELS = {"mean_std": "Mean-STD", "var95": "VaR-95%", "cvar95": "CVaR-95%"}


class SchemaError(ValueError):
    """The input CSV does not carry the summary schema."""


def load_summary(path: str | Path) -> pd.DataFrame:
    """Read and validate a summary CSV; empty or malformed input is an error."""
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path} is empty") from exc
    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path} is missing required columns: {', '.join(missing)}")
    if df.empty:
        raise SchemaError(f"{path} contains no data rows")
    return df


def metrics_table(df: pd.DataFrame) -> pd.DataFrame:
    """Mean of each risk metric per strategy (averaging over seeds)."""
    return df.groupby("strategy", sort=True)[list(METRIC_COLUMNS)].mean()


def build_metrics_figure(df: pd.DataFrame, title: str) -> plt.Figure:
    """Grouped bar chart: one group per strategy, one bar per risk metric."""
    table = metrics_table(df)
    strategies = list(table.index)
    n_metrics = len(METRIC_COLUMNS)
    width = 0.8 / n_metrics
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(strategies), 3.6))
    for j, metric in enumerate(METRIC_COLUMNS):
        xs = [i + (j - (n_metrics - 1) / 2) * width for i in range(len(strategies))]
        ax.bar(xs, table[metric].to_numpy(), width=width, label=METRIC_LABELS[metric])
    ax.set_xticks(range(len(strategies)))
    ax.set_xticklabels(strategies)
    ax.set_ylabel("loss metric (currency)")
    ax.set_xlabel("strategy")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    return fig


def build_cost_profit_figure(df: pd.DataFrame, group_by: str) -> plt.Figure:
    """Premium income (line) against mean hedging cost (bars) over a grid key.

    With group_by = 'config_id' the x axis is categorical; numeric keys are
    sorted numerically so the income line is monotone in the key.
    """
    if group_by not in df.columns:
        raise SchemaError(f"column {group_by!r} not present in the summary")
    grouped = df.groupby(group_by, sort=True)[["premium_income", "mean_cost"]].mean()
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    xs = range(len(grouped))
    ax.bar(xs, grouped["mean_cost"].to_numpy(), width=0.5, alpha=0.7,
           label="mean hedging cost")
    ax.plot(xs, grouped["premium_income"].to_numpy(), marker="o", color="C3",
            label="premium income")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([str(v) for v in grouped.index], rotation=30, ha="right",
                       fontsize=8)
    ax.set_xlabel(group_by)
    ax.set_ylabel("currency per episode")
    ax.set_title("premium income vs hedging cost")
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    return fig


def _slug(value) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "-" for ch in str(value))


def plot_metrics(summary_csv: str | Path, out_dir: str | Path,
                 group_by: str = "config_id", fmt: str = "png") -> list[Path]:
    """One grouped bar chart per distinct group_by value; returns the files."""
    df = load_summary(summary_csv)
    if group_by not in df.columns:
        raise SchemaError(f"column {group_by!r} not present in the summary")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for value, group in df.groupby(group_by, sort=True):
        fig = build_metrics_figure(group, title=f"{group_by} = {value}")
        path = out_dir / f"metrics_{_slug(value)}.{fmt}"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def plot_cost_profit(summary_csv: str | Path, out_dir: str | Path,
                     group_by: str = "config_id", fmt: str = "png") -> Path:
    """Cost-vs-profit chart across the group_by key; returns the file."""
    df = load_summary(summary_csv)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig = build_cost_profit_figure(df, group_by)
    path = out_dir / f"cost_profit_{_slug(group_by)}.{fmt}"
    fig.savefig(path)
    plt.close(fig)
    return path
