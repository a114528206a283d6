"""CSV and figure output for the CLI run paths."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _ensure(outdir) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def episode_report(record: list[dict], outcome, dt: float, outdir) -> list[Path]:
    """Per-tick trajectory CSV plus an altitude/approach figure."""
    out = _ensure(outdir)
    csv_path = out / "episode.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tick", "time_s", "obj_x", "obj_y", "obj_z",
                    "palm_x", "palm_y", "palm_z", "grasped", "hold_ticks"])
        for r in record:
            w.writerow([r["tick"], r["tick"] * dt, *r["obj_pos"], *r["palm_pos"],
                        int(r["grasped"]), r["hold_ticks"]])

    t = np.array([r["tick"] for r in record]) * dt
    obj = np.array([r["obj_pos"] for r in record])
    palm = np.array([r["palm_pos"] for r in record])
    reach = np.linalg.norm(palm - obj, axis=1)
    grasped = np.array([r["grasped"] for r in record], dtype=bool)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(t, obj[:, 2], label="object z")
    ax1.plot(t, palm[:, 2], label="palm z", alpha=0.7)
    if grasped.any():
        ax1.axvspan(t[grasped].min(), t[grasped].max(), alpha=0.15,
                    color="tab:green", label="grasped")
    ax1.set_ylabel("height [m]")
    ax1.legend(loc="upper left")
    ax1.set_title(f"episode: {'success' if outcome.success else 'timeout'}"
                  f" in {outcome.steps} ticks")
    ax2.plot(t, reach, color="tab:red")
    ax2.set_ylabel("palm-object distance [m]")
    ax2.set_xlabel("time [s]")
    fig.tight_layout()
    fig_path = out / "episode.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return [csv_path, fig_path]


def binpack_report(result, outdir) -> list[Path]:
    """Attempt log CSV plus cycle-time / running-success figure."""
    out = _ensure(outdir)
    csv_path = out / "binpack.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["attempt", "success", "start_s", "end_s", "duration_s"])
        for i, (success, start, end) in enumerate(result.attempt_log):
            w.writerow([i, int(success), start, end, end - start])

    wins = np.array([a[0] for a in result.attempt_log], dtype=float)
    durations = np.array([a[2] - a[1] for a in result.attempt_log])
    running_sr = np.cumsum(wins) / np.arange(1, len(wins) + 1)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    colors = ["tab:green" if s else "tab:red" for s in wins]
    ax1.bar(np.arange(len(wins)), durations, color=colors)
    ax1.set_ylabel("attempt duration [s]")
    m = result.metrics
    ax1.set_title(f"bin packing: SR {m.sr:.0%}, CS {m.cs_mean:.2f}±{m.cs_std:.2f},"
                  f" CT {m.ct_mean:.2f}±{m.ct_std:.2f} s")
    ax2.plot(running_sr, marker="o")
    ax2.set_ylim(0, 1.05)
    ax2.set_ylabel("running success rate")
    ax2.set_xlabel("attempt")
    fig.tight_layout()
    fig_path = out / "binpack.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return [csv_path, fig_path]


def distill_report(history, outdir) -> list[Path]:
    """Loss-curve CSV and semilog figure for a distillation run."""
    out = _ensure(outdir)
    csv_path = out / "distill.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "l_action", "l_aux", "total"])
        for i, m in enumerate(history):
            w.writerow([i, m.l_action, m.l_aux, m.total])

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy([m.l_action for m in history], label="action loss")
    ax.semilogy([m.l_aux for m in history], label="aux loss")
    ax.semilogy([m.total for m in history], label="total", linestyle="--")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig_path = out / "distill.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return [csv_path, fig_path]


def adr_report(rows: list[dict], outdir) -> list[Path]:
    out = _ensure(outdir)
    csv_path = out / "adr_ranges.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    return [csv_path]
