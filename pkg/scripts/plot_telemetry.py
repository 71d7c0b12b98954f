#!/usr/bin/env python3
"""Plot a telemetry CSV produced by `swivelsim simulate`.

Usage: python scripts/plot_telemetry.py out/telemetry.csv [-o figure.png]
"""
import argparse

import numpy as np


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="telemetry CSV file")
    ap.add_argument("-o", "--output", default="telemetry.png")
    args = ap.parse_args()

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = np.genfromtxt(args.csv, delimiter=",", names=True)
    t = data["t"]
    deg = np.rad2deg

    fig, axes = plt.subplots(5, 1, figsize=(10, 14), sharex=True)

    ax = axes[0]
    for name, ref in (("eul_psi", "eul_psi_d"), ("eul_phi", "eul_phi_d"),
                      ("eul_theta", "eul_theta_d")):
        line, = ax.plot(t, deg(data[name]), label=name)
        ax.plot(t, deg(data[ref]), "--", color=line.get_color(), alpha=0.6)
    ax.set_ylabel("attitude [deg]")
    ax.legend(ncol=3, fontsize=8)
    ax.set_title("312 Euler angles (solid: vehicle, dashed: reference)")

    ax = axes[1]
    ax.plot(t, deg(data["delta"]), label="delta")
    ax.plot(t, data["ddelta"], label="ddelta [rad/s]", alpha=0.7)
    ax.set_ylabel("swivel [deg]")
    ax.legend(fontsize=8)

    ax = axes[2]
    for axis in "xyz":
        line, = ax.plot(t, data[f"M{axis}"], label=f"M{axis}")
        ax.plot(t, data[f"Md{axis}"], "--", color=line.get_color(), alpha=0.6)
    ax.set_ylabel("moment [N m]")
    ax.legend(ncol=3, fontsize=8)

    ax = axes[3]
    for i in range(1, 5):
        ax.plot(t, data[f"f{i}_act"], label=f"f{i}", lw=0.8)
    ax.axhline(6.74, color="k", ls=":", lw=0.8)
    ax.set_ylabel("motor thrust [N]")
    ax.legend(ncol=4, fontsize=8)

    ax = axes[4]
    ax.semilogy(t, np.maximum(data["psi_err"], 1e-12), label="psi")
    ax.semilogy(t, np.maximum(data["V"], 1e-12), label="V", alpha=0.7)
    ax.axhline(0.01, color="k", ls=":", lw=0.8)
    ax.set_ylabel("error")
    ax.set_xlabel("t [s]")
    ax.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(args.output, dpi=130)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
