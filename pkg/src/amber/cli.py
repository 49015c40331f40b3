"""Command-line experiment runner.

    amber <experiment> --config <path> [--out <dir>] [--seed <u64>] [--threads <k>]

Exit status: 0 on success, 1 on a numeric failure (including failed
validation checks), 2 on a usage or configuration error.
"""

import argparse
import csv
import itertools
import math
import os
import sys

import numpy as np

from . import detection, energy_stats, simkit
from .ber import ReceiverKind, avg_ber, conditional_ber
from .config import ConfigError, Experiment, load_config
from .energy_stats import LinkParams
from .errors import AmberError
from .fading import ChannelPair
from .simkit import semi_analytic_avg_ber

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2

BER_COLUMNS = ("snr_db", "n", "receiver", "strategy", "ber_analytic", "ber_semianalytic", "ber_mc", "mc_ci_halfwidth")


class UsageError(Exception):
    pass


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def _progress(message):
    print(message, file=sys.stderr, flush=True)


def write_csv(path, config, columns, rows):
    """Write ``rows`` under a comment header holding the resolved config."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, text in config.resolved_items():
            fh.write(f"# {key} = {text}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _stem(config):
    return config.output or config.experiment.value


def _tag(value):
    return ("%g" % value).replace("-", "m").replace(".", "p")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def run_pdf_compare(config, out_dir):
    """Exact and approximate densities of Y next to a simulated histogram."""
    paths = []
    fixtures = itertools.product(config.n, config.snr_db, config.mu, config.nu)
    for n, snr, mu, nu in fixtures:
        link = LinkParams.from_snr_db(n, snr, config.e_bar)
        channel = ChannelPair.from_magnitudes(mu, nu)
        for label, bit, g in (("H0", 0, mu), ("H1", 1, nu)):
            _progress(f"pdf_compare n={n} snr_db={snr:g} mu={mu:g} nu={nu:g} {label}")
            y = simkit.simulate_y_many(
                bit, channel, link, config.n_windows, seed=config.seed + bit, ambient=config.ambient,
                threads=config.threads,
            )
            mean = float(energy_stats.cond_mean_y(g, link))
            sd = math.sqrt(float(energy_stats.cond_var_y(g, link)))
            lo, hi = max(mean - 6.0 * sd, 0.0), mean + 6.0 * sd
            hist, edges = np.histogram(y, bins=config.bins, range=(lo, hi))
            width = edges[1] - edges[0]
            t = 0.5 * (edges[:-1] + edges[1:])
            exact = energy_stats.cond_pdf_y(t, g, link)
            gauss1 = energy_stats.cond_pdf_y_gauss1(t, g, link)
            gauss2 = energy_stats.cond_pdf_y_gauss2(t, g, link)
            simulated = hist / (y.size * width)
            name = f"{_stem(config)}_n{n}_snr{_tag(snr)}_mu{_tag(mu)}_nu{_tag(nu)}_{label}.csv"
            rows = zip(t, exact, gauss1, gauss2, simulated)
            paths.append(
                write_csv(os.path.join(out_dir, name), config, ("t", "exact", "gauss1", "gauss2", "simulated_hist"), rows)
            )
    return paths, True


def _mc_plan(config, receiver, seed):
    r2 = receiver is ReceiverKind.R2_NOCSI
    return simkit.TrialPlan(
        n_bits=config.mc_bits,
        seed=seed,
        channel_mode=simkit.ChannelMode.BLOCK_FADING,
        coherence_bits=config.r2_coherence_bits if r2 else config.coherence_bits,
        max_errors=config.mc_max_errors or None,
        ambient=config.ambient,
        pilot_windows=config.pilot_windows,
        r2_threshold=config.r2_threshold,
        threads=config.threads,
    )


def _ber_point(config, n, snr, receiver, strategy, index):
    link = LinkParams.from_snr_db(n, snr, config.e_bar)
    fading_params = config.fading_params()
    analytic = avg_ber(receiver, strategy, link, fading_params, config.quadrature())
    semi = None
    if config.n_channels:
        semi = semi_analytic_avg_ber(receiver, strategy, link, fading_params, config.n_channels, seed=config.seed + index)
    mc = None
    if config.mc_bits:
        plan = _mc_plan(config, receiver, config.seed + index)
        mc = simkit.run_receiver(receiver, plan, strategy, link, fading_params)
    return analytic, semi, mc


def _ber_sweep(config, out_dir, n_outer):
    grid = list(itertools.product(config.n, config.snr_db)) if n_outer else [
        (n, s) for s in config.snr_db for n in config.n
    ]
    rows = []
    points = [(n, s, r, st) for n, s in grid for r in config.receivers() for st in config.strategies()]
    for index, (n, snr, receiver, strategy) in enumerate(points):
        _progress(f"[{index + 1}/{len(points)}] n={n} snr_db={snr:g} {receiver.value} {strategy.value}")
        analytic, semi, mc = _ber_point(config, n, snr, receiver, strategy, index)
        rows.append(
            (
                float(snr), n, receiver.value, strategy.value, analytic.value,
                semi.value if semi else math.nan,
                mc.value if mc else math.nan,
                mc.ci_halfwidth if mc else math.nan,
            )
        )
    path = os.path.join(out_dir, f"{_stem(config)}.csv")
    return [write_csv(path, config, BER_COLUMNS, rows)], True


def run_ber_vs_snr(config, out_dir):
    return _ber_sweep(config, out_dir, n_outer=True)


def run_ber_vs_n(config, out_dir):
    return _ber_sweep(config, out_dir, n_outer=False)


def run_threshold_table(config, out_dir):
    """Thresholds of every strategy and the conditional BER they give."""
    columns = ["mu", "nu", "n", "snr_db"]
    strategies = list(detection.DetectionStrategy)
    columns += [f"t_{s.value.lower()}" for s in strategies]
    columns += [f"ber_{s.value.lower()}" for s in strategies]
    rows = []
    for mu, nu, n, snr in itertools.product(config.mu, config.nu, config.n, config.snr_db):
        link = LinkParams.from_snr_db(n, snr, config.e_bar)
        ts, bers = [], []
        for s in strategies:
            if mu == nu and s is not detection.DetectionStrategy.MT:
                ts.append(math.nan)
                bers.append(0.5)
                continue
            ts.append(float(detection.threshold_values(s, mu, nu, link)))
            bers.append(conditional_ber(ReceiverKind.R1_CSI, s, mu, nu, link))
        rows.append([mu, nu, n, float(snr)] + ts + bers)
    path = os.path.join(out_dir, f"{_stem(config)}.csv")
    return [write_csv(path, config, columns, rows)], True


def run_validate(config, out_dir):
    """Pairwise agreement of the quadrature, channel-sampled and Monte Carlo routes."""
    columns = ("snr_db", "n", "receiver", "strategy", "route_a", "route_b", "value_a", "value_b",
               "difference", "tolerance", "passed")
    rows = []
    ok = True
    points = [
        (n, s, r, st) for n in config.n for s in config.snr_db for r in config.receivers() for st in config.strategies()
    ]
    for index, (n, snr, receiver, strategy) in enumerate(points):
        _progress(f"[{index + 1}/{len(points)}] validate n={n} snr_db={snr:g} {receiver.value} {strategy.value}")
        analytic, semi, mc = _ber_point(config, n, snr, receiver, strategy, index)
        routes = [("analytic", analytic)]
        routes += [("semi_analytic", semi)] if semi else []
        routes += [("monte_carlo", mc)] if mc else []
        for (name_a, a), (name_b, b) in itertools.combinations(routes, 2):
            spread = math.hypot(a.std_error, b.std_error)
            tol = config.sigmas * spread + a.error_estimate + b.error_estimate
            diff = abs(a.value - b.value)
            passed = diff <= tol
            ok &= passed
            rows.append((float(snr), n, receiver.value, strategy.value, name_a, name_b, a.value, b.value, diff, tol,
                         "true" if passed else "false"))
    path = os.path.join(out_dir, f"{_stem(config)}.csv")
    return [write_csv(path, config, columns, rows)], ok


RUNNERS = {
    Experiment.PDF_COMPARE: run_pdf_compare,
    Experiment.BER_VS_N: run_ber_vs_n,
    Experiment.BER_VS_SNR: run_ber_vs_snr,
    Experiment.THRESHOLD_TABLE: run_threshold_table,
    Experiment.VALIDATE: run_validate,
}


def run_experiment(config, out_dir="."):
    """Run one experiment; returns ``(exit_status, written_paths)``."""
    os.makedirs(out_dir, exist_ok=True)
    paths, ok = RUNNERS[config.experiment](config, out_dir)
    return (EXIT_OK if ok else EXIT_NUMERIC), paths


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser():
    parser = _Parser(prog="amber", description="Ambient backscatter BER experiments.")
    parser.add_argument("experiment", choices=[e.value for e in Experiment])
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--seed", type=_u64, help="override the configured seed")
    parser.add_argument("--threads", type=_positive, help="worker threads (default: $AMBER_THREADS or config)")
    return parser


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("AMBER_THREADS")
    if env:
        try:
            return _positive(env)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"AMBER_THREADS: {exc}") from exc
    return None


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config, args.experiment, seed=args.seed, threads=_threads(args))
    except (UsageError, ConfigError) as exc:
        print(f"amber: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        status, paths = run_experiment(config, args.out)
    except AmberError as exc:
        detail = getattr(exc, "diagnostics", None)
        suffix = f" {detail}" if detail else ""
        print(f"amber: numeric failure: {exc}{suffix}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in paths:
        print(path)
    if status != EXIT_OK:
        print("amber: validation checks failed", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
