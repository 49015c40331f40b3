"""Run every shipped experiment config and collect the CSVs in one directory.

    python3 scripts/run_figures.py --out results [--only pdf_n150 ber_vs_snr]

The BER sweeps with 1e7 Monte Carlo bits take a while on one core; pass
``--quick`` to cut Monte Carlo and channel counts by 100x for a dry run.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from amber import cli
from amber.config import parse_text

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
QUICK = {"mc_bits": 100_000, "n_channels": 1000, "n_windows": 100_000}


def _quick_copy(path, tmp):
    values = parse_text(path.read_text())
    lines = [line for line in path.read_text().splitlines() if line.split("=")[0].strip() not in QUICK]
    lines += [f"{k} = {v}" for k, v in QUICK.items() if k in values]
    out = Path(tmp) / path.name
    out.write_text("\n".join(lines) + "\n")
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results")
    parser.add_argument("--only", nargs="*", help="config stems to run (default: all except smoke)")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args(argv)

    stems = args.only or sorted(p.stem for p in CONFIGS.glob("*.cfg") if p.stem != "smoke")
    status = 0
    with tempfile.TemporaryDirectory() as tmp:
        for stem in stems:
            path = CONFIGS / f"{stem}.cfg"
            if args.quick:
                path = _quick_copy(path, tmp)
            experiment = parse_text(path.read_text())["experiment"]
            cfg_args = [experiment, "--config", str(path), "--out", args.out]
            if args.threads:
                cfg_args += ["--threads", str(args.threads)]
            print(f"== {stem}", flush=True)
            status = max(status, cli.main(cfg_args))
    return status


if __name__ == "__main__":
    sys.exit(main())
