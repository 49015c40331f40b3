"""Plot the CSVs written by ``amber`` (needs the ``plot`` extra).

    python3 scripts/plot_results.py results/ --out figures/
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return rows


def plot_pdf(path, out):
    rows = read_csv(path)
    t = [float(r["t"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(t, [float(r["simulated_hist"]) for r in rows], width=t[1] - t[0], color="0.85", label="simulated")
    for col, style in (("exact", "k-"), ("gauss1", "r--"), ("gauss2", "b:")):
        ax.plot(t, [float(r[col]) for r in rows], style, label=col)
    ax.set_xlabel("t")
    ax.set_ylabel("density of Y")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / f"{path.stem}.png", dpi=120)
    plt.close(fig)


def plot_ber(path, out, x_key):
    rows = read_csv(path)
    curves = defaultdict(list)
    for r in rows:
        other = "n" if x_key == "snr_db" else "snr_db"
        curves[(r["receiver"], r["strategy"], r[other])].append(r)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for (receiver, strategy, other), pts in sorted(curves.items()):
        x = [float(p[x_key]) for p in pts]
        label = f"{receiver} {strategy} {'N' if x_key == 'snr_db' else 'SNR'}={other}"
        (line,) = ax.semilogy(x, [float(p["ber_analytic"]) for p in pts], label=label)
        mc = [float(p["ber_mc"]) for p in pts]
        if any(v == v for v in mc):
            ax.semilogy(x, mc, "o", color=line.get_color(), mfc="none")
    ax.set_xlabel("SNR (dB)" if x_key == "snr_db" else "N")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(out / f"{path.stem}.png", dpi=120)
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("results", type=Path)
    parser.add_argument("--out", type=Path, default=Path("figures"))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for path in sorted(args.results.glob("*.csv")):
        header = path.read_text().split("\n", 1)[0]
        if path.name.startswith("pdf"):
            plot_pdf(path, args.out)
        elif "ber_vs_n" in header:
            plot_ber(path, args.out, "n")
        elif "ber_vs_snr" in header:
            plot_ber(path, args.out, "snr_db")
        else:
            continue
        print(args.out / f"{path.stem}.png")


if __name__ == "__main__":
    main()
