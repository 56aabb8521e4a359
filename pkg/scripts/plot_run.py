"""Plot agent trajectories and the residual from a CSV written by ``dpds run``.

The CSV needs the per-agent columns (``"output": {"agents": true}``).

    python3 scripts/plot_run.py run.csv --out run.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("--out", default="run.png")
    ap.add_argument("--max-index", type=float, default=None, help="truncate the x axis")
    args = ap.parse_args()

    data = np.genfromtxt(args.csv, delimiter=",", names=True)
    names = data.dtype.names
    k = data["t"] if "t" in names else data["index"]
    keep = slice(None) if args.max_index is None else k <= args.max_index

    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    for prefix, ax, label in (("x", axes[0], "primal"), ("v", axes[1], "dual")):
        cols = [c for c in names if c.startswith(prefix) and c[1:].replace("_", "").isdigit()]
        for c in cols:
            ax.plot(k[keep], data[c][keep], lw=1)
        ax.set_title(f"{label} variables")
        ax.set_xlabel("k")
    res = np.clip(data["residual"], 1e-300, None)
    axes[2].semilogy(k[keep], res[keep])
    axes[2].set_title("residual")
    axes[2].set_xlabel("k")
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
