#  Copyright (c) Michele De Stefano 2026.

import sys

import pandas as pd
import seaborn as sns
from matplotlib import pyplot as plt

sns.set()

report_dir = sys.argv[1] if len(sys.argv) > 1 else "results/report"

data = pd.read_csv(f"{report_dir}/plot_data.csv")

metrics = {
    "tracking_error": "Tracking error [rad$^2$ s]",
    "max_tip_speed_mps": "Max tail tip speed [m/s]",
    "effort_saturation": "Effort saturation [-]",
}

fig, axes = plt.subplots(1, len(metrics), figsize=(5 * len(metrics), 4))
for ax, (metric, label) in zip(axes, metrics.items(), strict=True):
    sns.boxplot(
        data[data["metric"] == metric],
        x="n_links",
        y="value",
        hue="mode",
        ax=ax,
    )
    ax.set_xlabel("Number of vertebrae")
    ax.set_ylabel(label)
fig.tight_layout()

efforts = data[data["metric"].str.startswith("effort_j")]
if not efforts.empty:
    plt.figure()
    ax = sns.boxplot(efforts, x="metric", y="value", hue="n_links")
    ax.set_title("Control effort per joint")
    ax.set_ylabel("Effort [N$^2$ m$^2$ s]")

try:
    history = pd.read_csv(f"{report_dir}/constraint_history.csv")
except FileNotFoundError:
    history = None
if history is not None:
    trial = history["trial_id"].iloc[-1]
    sample = history[history["trial_id"] == trial]
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(6, 8))
    for ax, column in zip(
        axes,
        ["angle_rad", "velocity_rad_s", "torque_nm", "effort"],
        strict=True,
    ):
        sns.lineplot(sample, x="t", y=column, hue="dof", ax=ax, legend=False)
    axes[0].set_title(f"Constraint history of {trial}")

plt.show()
