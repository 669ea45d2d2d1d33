"""Batch experiments on top of the training loop.

Three studies: redaction ablation (no redaction vs spatial vs spectral,
across tasks), frequency band sweep for depth, and shared-attention width
scaling. Each writes its runs under one experiment directory and emits a
CSV with a fixed column order; the ablation also renders a plain-text
table, the sweep a line plot.
"""

import csv
from pathlib import Path

import numpy as np

from ..core import ConfigError
from ..sa import sa_macs
from .train import make_state, train

TASK_METRIC = {"segmentation": "miou", "depth": "a_err", "normals": "m_err_deg"}
REDACTIONS = ("none", "spatial", "spectral")

# single-task results at full dataset scale, for the report footer
# (mIoU up / aErr down / mErr down): published reference, not a target
REFERENCE_ROWS = {
    "none": (37.25, 59.70, 26.30),
    "spatial": (38.38, 58.34, 26.07),
    "spectral": (38.21, 56.76, 25.75),
}


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _ablation_overrides(redaction):
    if redaction == "none":
        return {"loss.gamma": 0.0}
    if redaction == "spatial":
        return {"redaction.domain": "spatial", "redaction.variant": "random_blocks"}
    if redaction == "spectral":
        return {"redaction.domain": "spectral", "redaction.variant": "bandstop"}
    raise ConfigError(f"unknown redaction arm {redaction!r}")


def ablate_redaction(cfg, out_dir, seeds=3):
    """Train every (task, redaction, seed) cell and tabulate final metrics.

    Tasks are trained single-task; the no-redaction arm sets gamma to 0 so
    it is the plain supervised baseline with the identical architecture.
    All runs land under out_dir (one experiment id), and the summary table
    reports seed means per cell.

    Returns {"rows": [(task, redaction, metric, value, seed)], "table":
    {(task, redaction): mean}, "report": text}.
    """
    if cfg["loss.gamma"] <= 0:
        raise ConfigError("ablation base config needs loss.gamma > 0 for the redacted arms")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, table = [], {}
    for task, metric in TASK_METRIC.items():
        for redaction in REDACTIONS:
            overrides = dict(_ablation_overrides(redaction))
            overrides["task"] = task
            run_cfg = cfg.with_overrides(overrides)
            values = []
            for s in range(seeds):
                seed = cfg["seed"] + s
                run_dir = out / f"{task}_{redaction}_s{seed}"
                record = train(run_cfg, run_dir, seed=seed)
                value = record.final_metrics()[task][metric]
                rows.append((task, redaction, metric, value, seed))
                values.append(value)
            table[(task, redaction)] = float(np.mean(values))
    _write_csv(out / "ablation.csv", ("task", "redaction", "metric", "value", "seed"), rows)
    report = _ablation_report(table, seeds)
    (out / "ablation_report.txt").write_text(report)
    return {"rows": rows, "table": table, "report": report}


def _ablation_report(table, seeds):
    lines = [
        f"redaction ablation, single-task training, mean over {seeds} seed(s)",
        "",
        f"{'redaction':<12} {'seg mIoU':>10} {'depth aErr':>12} {'normals mErr':>14}",
    ]
    for redaction in REDACTIONS:
        cells = [
            table[("segmentation", redaction)],
            table[("depth", redaction)],
            table[("normals", redaction)],
        ]
        lines.append(f"{redaction:<12} {cells[0]:>10.4f} {cells[1]:>12.4f} {cells[2]:>14.4f}")
    lines += [
        "",
        "reference values at full dataset scale (NYUD-v2, mIoU/aErr/mErr):",
    ]
    for redaction in REDACTIONS:
        a, b, c = REFERENCE_ROWS[redaction]
        lines.append(f"  {redaction:<10} {a:.2f} / {b:.2f} / {c:.2f}")
    return "\n".join(lines) + "\n"


def band_sweep(cfg, centers, out_dir, seeds=1, width=0.2):
    """Train a spectral bandstop model per band center on the depth task.

    The stopped band is [center - width/2, center + width/2] clipped to
    [0, 1]. Emits band_sweep.csv (center, a_err, seed) and band_sweep.png
    with the seed-mean error curve. The expectation that a middle band
    gives the lowest error is annotated on the plot for reference, not
    asserted. Returns {"centers", "mean_a_err", "argmin_center", ...}.
    """
    if cfg["task"] != "depth":
        raise ConfigError("band sweep is defined for the depth task")
    if cfg["loss.gamma"] <= 0:
        raise ConfigError("band sweep needs loss.gamma > 0")
    centers = [float(c) for c in centers]
    if not centers:
        raise ConfigError("band sweep needs at least one center")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    means = []
    for c in centers:
        lo = max(0.0, c - width / 2)
        hi = min(1.0, c + width / 2)
        run_cfg = cfg.with_overrides({
            "redaction.domain": "spectral",
            "redaction.variant": "bandstop",
            "redaction.band_lo": lo,
            "redaction.band_hi": hi,
        })
        vals = []
        for s in range(seeds):
            seed = cfg["seed"] + s
            record = train(run_cfg, out / f"center{c:.2f}_s{seed}", seed=seed)
            err = record.final_metrics()["depth"]["a_err"]
            rows.append((c, err, seed))
            vals.append(err)
        means.append(float(np.mean(vals)))
    _write_csv(out / "band_sweep.csv", ("center", "a_err", "seed"), rows)
    best = centers[int(np.argmin(means))]
    _sweep_plot(out / "band_sweep.png", centers, means, best)
    return {"centers": centers, "mean_a_err": means, "argmin_center": best, "width": width}


def _sweep_plot(path, centers, means, best):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(centers, means, marker="o")
    ax.axvline(best, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("stopped band center (normalized frequency)")
    ax.set_ylabel("depth a_err (val)")
    ax.set_title(f"bandstop center sweep; argmin = {best:.2f}")
    ax.text(
        0.5,
        0.95,
        "reference expectation: error is lowest for a middle band",
        transform=ax.transAxes,
        ha="center",
        va="top",
        fontsize=8,
        color="gray",
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sa_scaling(cfg, dims, out_dir, seeds=1):
    """Scale the shared-attention embedding width and measure cost/quality.

    Per dim: parameter count of the attention module, the closed-form
    multiply-accumulate estimate for one enhancement pass, and the final
    val mIoU after training. Emits sa_scaling.csv (dim, params, macs,
    miou, seed).
    """
    if not cfg["sa.enabled"]:
        raise ConfigError("sa scaling needs sa.enabled = true")
    if cfg["task"] not in ("segmentation", "multitask"):
        raise ConfigError("sa scaling reports mIoU; use a segmentation-capable task")
    dims = [int(d) for d in dims]
    if not dims:
        raise ConfigError("sa scaling needs at least one dim")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    size = cfg["data.image_size"]
    rows = []
    for dim in dims:
        run_cfg = cfg.with_overrides({"sa.dim": dim})
        bn_cfg = run_cfg.basenet_config()
        sa_cfg = run_cfg.sa_config()
        macs = sa_macs(size, size, sa_cfg, bn_cfg.condition_channels)
        params = make_state(run_cfg, cfg["seed"]).sa.num_parameters()
        for s in range(seeds):
            seed = cfg["seed"] + s
            record = train(run_cfg, out / f"dim{dim}_s{seed}", seed=seed)
            miou = record.final_metrics()["segmentation"]["miou"]
            rows.append((dim, params, macs, miou, seed))
    _write_csv(out / "sa_scaling.csv", ("dim", "params", "macs", "miou", "seed"), rows)
    return rows
