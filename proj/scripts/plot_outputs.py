#!/usr/bin/env python3
# Copyright 2026 The realclock Authors
# SPDX-License-Identifier: Apache-2.0
"""Quick-look plots of realclock output directories.

Usage: plot_outputs.py OUTPUT_DIR [--save FILE]

Recognizes comparison.csv (dephasing_compare), trajectory.csv
(master_trajectory), snapshots.csv (classical_diffusion) and spectrum.csv
(bath_spectrum). Needs pandas and matplotlib.
"""

import argparse
import pathlib

import matplotlib.pyplot as plt
import pandas as pd


def plot_comparison(ax, df):
    ax.errorbar(df["t"], df["|rho01|_mc"], yerr=df["stderr"], fmt=".", ms=3, label="Monte Carlo")
    ax.plot(df["t"], df["|rho01|_exact_gauss"], label="Gaussian factor")
    ax.plot(df["t"], df["|rho01|_markov"], "--", label="master equation")
    ax.set_xlabel("clock time t")
    ax.set_ylabel("|rho_01|")


def plot_trajectory(ax, df):
    ax.plot(df["t"], df["S"])
    ax.set_xlabel("clock time t")
    ax.set_ylabel("von Neumann entropy")


def plot_snapshots(ax, df):
    ax.semilogy(df["t"], df["mode1_spectral"], label="spectral")
    if "mode1_grid" in df:
        ax.semilogy(df["t"], df["mode1_grid"], "--", label="grid")
    ax.set_xlabel("clock time t")
    ax.set_ylabel("|p_1|")


def plot_spectrum(ax, df):
    ax.loglog(df["omega"].iloc[1:], df["S"].iloc[1:])
    ax.set_xlabel("omega")
    ax.set_ylabel("S(omega)")


PLOTTERS = {
    "comparison.csv": plot_comparison,
    "trajectory.csv": plot_trajectory,
    "snapshots.csv": plot_snapshots,
    "spectrum.csv": plot_spectrum,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output_dir", type=pathlib.Path)
    parser.add_argument("--save", type=pathlib.Path, help="write the figure instead of showing it")
    args = parser.parse_args()

    found = [(name, fn) for name, fn in PLOTTERS.items() if (args.output_dir / name).exists()]
    if not found:
        parser.error(f"no recognized CSV in {args.output_dir}")
    fig, axes = plt.subplots(1, len(found), figsize=(5 * len(found), 4), squeeze=False)
    for ax, (name, fn) in zip(axes[0], found):
        fn(ax, pd.read_csv(args.output_dir / name))
        ax.set_title(name)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=120)
    else:
        plt.show()


if __name__ == "__main__":
    main()
