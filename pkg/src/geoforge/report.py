"""Figures for corpus statistics."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .pipeline import CorpusStats  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 150,
}

# published solving success rates by iteration level, drawn for comparison
REFERENCE_SR = {1: 78.5, 2: 76.2, 3: 68.8, 4: 62.0, 5: 53.4}


def success_rate_figure(stats: CorpusStats, path: str | Path, reference: dict[int, float] | None = REFERENCE_SR) -> Path:
    its = sorted(stats.iterations)
    with plt.rc_context(_RC):
        fig, (ax_sr, ax_lit) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        ax_sr.plot(its, [stats.iterations[k].success_rate for k in its], "o-", color="#d62728", label="measured")
        if reference:
            ref = sorted(k for k in reference if k in stats.iterations) or sorted(reference)
            ax_sr.plot(ref, [reference[k] for k in ref], "s--", color="0.5", label="reference")
        ax_sr.set_xlabel("generation iterations")
        ax_sr.set_ylabel("solving SR (%)")
        ax_sr.set_ylim(0, 100)
        ax_sr.set_xticks(its)
        ax_sr.legend(loc="lower left")

        for cat, color in zip(("points", "lines", "circles", "constraints"), ("k", "#d62728", "#1f77b4", "#2ca02c")):
            ax_lit.plot(its, [stats.iterations[k].mean_literals[cat] for k in its], "o-", color=color, label=cat)
        ax_lit.set_xlabel("generation iterations")
        ax_lit.set_ylabel("mean literals per program")
        ax_lit.set_xticks(its)
        ax_lit.legend(loc="best", fontsize=7)
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
        plt.close(fig)
    return path


def write_stats_report(stats: CorpusStats, out_dir: str | Path, stem: str = "stats") -> dict[str, Path]:
    """Write the per-iteration table as TSV next to its figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv = out / f"{stem}.tsv"
    tsv.write_text(stats.table(), encoding="utf-8")
    png = success_rate_figure(stats, out / f"{stem}_sr.png")
    return {"table": tsv, "figure": png}
