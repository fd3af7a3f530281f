"""Deterministic table emission in CSV, Markdown, and LaTeX.

Numbers are rounded half-to-even at emission only (2 decimals for
percents, 3 for test statistics, 4 for p-values and CKA); aggregation
upstream stays at full precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Optional

FORMATS = ("csv", "markdown", "latex")

DATASET_DISPLAY = {
    "eurosat": "EuroSAT",
    "pets": "Oxford-IIIT Pets",
    "oxford_iiit_pets": "Oxford-IIIT Pets",
    "cifar100": "CIFAR-100",
    "flowers102": "Flowers102",
}

METHOD_BASE_DISPLAY = {
    "pretrained": "Pretrained",
    "full_ft": "Full FT",
    "lora": "LoRA",
}


def dataset_display(name: str) -> str:
    return DATASET_DISPLAY.get(name, name)


def method_display(method: str) -> str:
    base, _, variant = method.partition(":")
    shown = METHOD_BASE_DISPLAY.get(base, base)
    return f"{shown} {variant}" if variant else shown


def format_number(x, decimals: int, signed: bool = False) -> str:
    """Round half-to-even at ``decimals`` places; '' for missing values."""
    if x is None:
        return ""
    quantum = Decimal(1).scaleb(-decimals)
    d = Decimal(repr(float(x))).quantize(quantum, rounding=ROUND_HALF_EVEN)
    if d == 0:
        d = abs(d)  # avoid '-0.00'
    text = str(d)
    if signed and d > 0:
        text = "+" + text
    return text


@dataclass
class Column:
    header: str
    key: str
    decimals: Optional[int] = None  # None => text column
    signed: bool = False

    @property
    def align(self) -> str:
        return "l" if self.decimals is None else "r"

    def render(self, row: dict) -> str:
        value = row.get(self.key)
        if self.decimals is None:
            return "" if value is None else str(value)
        return format_number(value, self.decimals, self.signed)


def emit_table(columns: list[Column], rows: list[dict], fmt: str) -> str:
    """Render rows (list of dicts) as csv | markdown | latex text."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    if not rows:
        raise ValueError("emit_table requires at least one row")
    cells = [[c.render(r) for c in columns] for r in rows]

    if fmt == "csv":
        lines = [",".join(c.key for c in columns)]
        lines += [",".join(row) for row in cells]
        return "\n".join(lines) + "\n"

    if fmt == "markdown":
        lines = ["| " + " | ".join(c.header for c in columns) + " |"]
        lines.append("|" + "|".join(" ---: " if c.align == "r" else " --- " for c in columns) + "|")
        lines += ["| " + " | ".join(row) + " |" for row in cells]
        return "\n".join(lines) + "\n"

    spec = "".join(c.align for c in columns)
    lines = [f"\\begin{{tabular}}{{{spec}}}", "\\toprule"]
    lines.append(" & ".join(c.header for c in columns) + r" \\")
    lines.append("\\midrule")
    lines += [" & ".join(r if r != "" else "---" for r in row) + r" \\" for row in cells]
    lines += ["\\bottomrule", "\\end{tabular}"]
    return "\n".join(lines) + "\n"


def method_summary_columns(fmt: str) -> list[Column]:
    """Aggregate-means layout: dataset, method, mean entropy/ERF drift,
    mean best validation accuracy, mean CIFAR-100 zero-shot."""
    if fmt == "csv":
        return [
            Column("Dataset", "dataset"),
            Column("Method", "method"),
            Column("Mean dEntropy (%)", "mean_dentropy_pct", decimals=2),
            Column("Mean dERF (%)", "mean_derf_pct", decimals=2),
            Column("Mean Best Val Acc (%)", "mean_best_val_acc", decimals=2),
            Column("Mean CIFAR-100 ZS (%)", "mean_cifar100_zs", decimals=2),
        ]
    entropy_h = r"Mean $\Delta$Entropy (\%)" if fmt == "latex" else "Mean ΔEntropy (%)"
    erf_h = r"Mean $\Delta$ERF (\%)" if fmt == "latex" else "Mean ΔERF (%)"
    acc_h = r"Mean Best Val Acc (\%)" if fmt == "latex" else "Mean Best Val Acc (%)"
    zs_h = r"Mean CIFAR-100 ZS (\%)" if fmt == "latex" else "Mean CIFAR-100 ZS (%)"
    return [
        Column("Dataset", "dataset_display"),
        Column("Method", "method_display"),
        Column(entropy_h, "mean_dentropy_pct", decimals=2, signed=True),
        Column(erf_h, "mean_derf_pct", decimals=2, signed=True),
        Column(acc_h, "mean_best_val_acc", decimals=2),
        Column(zs_h, "mean_cifar100_zs", decimals=2),
    ]


def emit_method_summary(rows: list[dict], fmt: str) -> str:
    return emit_table(method_summary_columns(fmt), rows, fmt)


def stat_rows_columns(fmt: str) -> list[Column]:
    """Corrected-inferential-statistics layout: comparison, test,
    statistic, p-value (plus adjusted p when a Holm family was applied)."""
    return [
        Column("Comparison", "comparison" if fmt == "csv" else "comparison"),
        Column("Test", "test"),
        Column("Statistic", "statistic", decimals=3),
        Column(r"$p$-value" if fmt == "latex" else "p-value", "p_value", decimals=4),
        Column(r"Holm $p$" if fmt == "latex" else "Holm p", "p_holm", decimals=4),
    ]


def emit_stat_rows(rows: list[dict], fmt: str) -> str:
    return emit_table(stat_rows_columns(fmt), rows, fmt)


def auxiliary_validation_columns(fmt: str) -> list[Column]:
    """Structural-triangulation layout: rollout metrics, patch-to-patch
    entropy, mean layerwise CKA, and subset-stability CV per model row."""
    return [
        Column("Model", "model"),
        Column("Rollout Entropy (bits)", "rollout_entropy_bits", decimals=3),
        Column("Rollout ERF@0.95", "rollout_erf95", decimals=3),
        Column("Rollout Gini", "rollout_gini", decimals=3),
        Column("Patch-to-Patch Entropy (bits)", "p2p_entropy_bits", decimals=3),
        Column("Mean Layerwise CKA", "mean_cka", decimals=4),
        Column("Entropy CV", "entropy_cv", decimals=4),
    ]


def emit_auxiliary_validation(rows: list[dict], fmt: str) -> str:
    return emit_table(auxiliary_validation_columns(fmt), rows, fmt)


def correlation_columns(fmt: str) -> list[Column]:
    """Correlation-table layout: analysis, n, Pearson r/p, Spearman rho/p."""
    return [
        Column("Analysis", "analysis"),
        Column("$n$" if fmt == "latex" else "n", "n", decimals=0),
        Column("Pearson $r$" if fmt == "latex" else "Pearson r",
               "pearson_r", decimals=3),
        Column("Pearson $p$" if fmt == "latex" else "Pearson p",
               "pearson_p", decimals=4),
        Column(r"Spearman $\rho$" if fmt == "latex" else "Spearman rho",
               "spearman_rho", decimals=3),
        Column("Spearman $p$" if fmt == "latex" else "Spearman p",
               "spearman_p", decimals=4),
    ]


def emit_correlation_rows(rows: list[dict], fmt: str) -> str:
    return emit_table(correlation_columns(fmt), rows, fmt)


def multiseed_columns(fmt: str) -> list[Column]:
    """Multi-seed contrast layout: comparison, seeds, group means, Welch
    t/p, Cohen's d."""
    entropy_h = (
        r"Mean $\Delta$Entropy (\%)" if fmt == "latex" else "Mean ΔEntropy (%)"
    )
    return [
        Column("Comparison", "comparison"),
        Column("Seeds", "seeds"),
        Column(entropy_h, "mean_dentropy"),
        Column("Welch $t$" if fmt == "latex" else "Welch t",
               "welch_t", decimals=3),
        Column("Welch $p$" if fmt == "latex" else "Welch p",
               "welch_p", decimals=4),
        Column("Cohen's $d$" if fmt == "latex" else "Cohen's d",
               "cohens_d", decimals=3),
    ]


def emit_multiseed_rows(rows: list[dict], fmt: str) -> str:
    return emit_table(multiseed_columns(fmt), rows, fmt)
