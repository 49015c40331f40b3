"""Symbol-level Monte Carlo of the backscatter link.

Every energy sample is built from ``y(n) = h x(n) + w(n)``: an ambient
waveform, the fading gain of the transmitted bit and complex Gaussian noise.
Nothing here draws from the analytic law of Y, so the simulation is an
independent check on the rest of the library.

Randomness is organised in trial blocks.  Each block owns one generator per
purpose (channel, bits, ambient, noise, pilot), all derived from the plan
seed and the block index, so a block produces the same numbers whichever
thread runs it.  Blocks are merged in index order and the stopping rule is
applied in that order too, which makes results independent of the thread
count.
"""

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from . import detection
from .ber import BerEstimate, BerMethod, ReceiverKind, conditional_ber
from .fading import ChannelPair, FadingParams, sample_channel
from .errors import InvalidParameterError

Z95 = 1.959963984540054

_PURPOSES = ("channel", "bits", "ambient", "noise", "pilot")


class AmbientModel(str, enum.Enum):
    """Ambient waveform with exactly ``e_bar`` energy per sample on average.

    ``constant_envelope``: unit-modulus samples with uniform phase, scaled by
    ``sqrt(e_bar)``.  ``complex_gaussian_normalized``: i.i.d. complex
    Gaussian samples rescaled per window so their mean energy is ``e_bar``.
    """

    CONSTANT_ENVELOPE = "constant_envelope"
    COMPLEX_GAUSSIAN_NORMALIZED = "complex_gaussian_normalized"


class ChannelMode(str, enum.Enum):
    FIXED = "fixed"
    BLOCK_FADING = "block_fading"


class R2Threshold(str, enum.Enum):
    """How the receiver without CSI sets its threshold.

    ``pilot``: midpoint of the mean energies over a known alternating
    preamble.  ``oracle``: the exact threshold of the chosen strategy, for
    comparisons with analytic values.
    """

    PILOT = "pilot"
    ORACLE = "oracle"


@dataclass(frozen=True)
class TrialPlan:
    """How many bits to simulate and how.

    ``n_bits`` caps the number of message bits; ``max_errors`` (if set) stops
    the run at the end of the first block where that many errors have
    accumulated.  The channel is redrawn every ``coherence_bits`` symbols.
    """

    n_bits: int
    seed: int = 0
    channel_mode: ChannelMode = ChannelMode.BLOCK_FADING
    coherence_bits: int = 2
    max_errors: int | None = None
    block_bits: int = 1 << 14
    ambient: AmbientModel = AmbientModel.CONSTANT_ENVELOPE
    pilot_windows: int = 16
    r2_threshold: R2Threshold = R2Threshold.PILOT
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "channel_mode", ChannelMode(self.channel_mode))
        object.__setattr__(self, "ambient", AmbientModel(self.ambient))
        object.__setattr__(self, "r2_threshold", R2Threshold(self.r2_threshold))
        if self.n_bits < 1:
            raise InvalidParameterError("n_bits must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must fit in 64 unsigned bits")
        if self.coherence_bits < 1 or self.block_bits < 1:
            raise InvalidParameterError("coherence_bits and block_bits must be positive")
        if self.max_errors is not None and self.max_errors < 1:
            raise InvalidParameterError("max_errors must be positive")
        if self.pilot_windows < 2 or self.pilot_windows % 2:
            raise InvalidParameterError("pilot_windows must be a positive even number")

    def resolved_threads(self):
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("AMBER_THREADS")
        return max(1, int(env)) if env else 1


def block_streams(seed, block):
    """Independent generators for every purpose of trial block ``block``."""
    return {
        name: np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block, i))))
        for i, name in enumerate(_PURPOSES)
    }


# ---------------------------------------------------------------------------
# Waveform kernel
# ---------------------------------------------------------------------------


@numba.njit(nogil=True, cache=True)
def _window_energies(rng_ambient, rng_noise, h_re, h_im, n, e_bar, sigma2, gaussian, out):
    amp = math.sqrt(e_bar)
    s = math.sqrt(0.5 * sigma2)
    x_re = np.empty(n)
    x_im = np.empty(n)
    for i in range(h_re.size):
        if gaussian:
            energy = 0.0
            for k in range(n):
                x_re[k] = rng_ambient.standard_normal()
                x_im[k] = rng_ambient.standard_normal()
                energy += x_re[k] * x_re[k] + x_im[k] * x_im[k]
            scale = amp / math.sqrt(energy / n)
        else:
            for k in range(n):
                # uniform phase: normalise a point drawn uniformly in the unit disc
                while True:
                    u = 2.0 * rng_ambient.random() - 1.0
                    v = 2.0 * rng_ambient.random() - 1.0
                    r2 = u * u + v * v
                    if 0.0 < r2 <= 1.0:
                        break
                r = math.sqrt(r2)
                x_re[k] = u / r
                x_im[k] = v / r
            scale = amp
        hr = h_re[i] * scale
        hi = h_im[i] * scale
        acc = 0.0
        for k in range(n):
            yr = hr * x_re[k] - hi * x_im[k] + s * rng_noise.standard_normal()
            yi = hr * x_im[k] + hi * x_re[k] + s * rng_noise.standard_normal()
            acc += yr * yr + yi * yi
        out[i] = acc / n


def window_energies(gains, link, ambient, rng_ambient, rng_noise):
    """Y for one window per entry of the complex array ``gains``."""
    gains = np.ascontiguousarray(np.asarray(gains, dtype=complex).ravel())
    out = np.empty(gains.size)
    gaussian = AmbientModel(ambient) is AmbientModel.COMPLEX_GAUSSIAN_NORMALIZED
    _window_energies(
        rng_ambient,
        rng_noise,
        np.ascontiguousarray(gains.real),
        np.ascontiguousarray(gains.imag),
        link.n_samples,
        link.e_bar,
        link.sigma2,
        gaussian,
        out,
    )
    return out


def simulate_y(b, channel, link, ambient=AmbientModel.CONSTANT_ENVELOPE, rng=None):
    """One realisation of Y for bit ``b`` over ``channel``."""
    if b not in (0, 1):
        raise InvalidParameterError("b must be 0 or 1")
    rng = np.random.default_rng() if rng is None else rng
    gain = complex(channel.h1 if b else channel.h0)
    return float(window_energies([gain], link, ambient, rng, rng)[0])


def _run_blocks(task, n_blocks, threads, stop):
    """Evaluate ``task(block)`` in index order, ``threads`` at a time.

    ``stop(results)`` is checked after every block in order; blocks computed
    beyond the stopping point are discarded.
    """
    results = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, n_blocks, threads):
            batch = range(start, min(start + threads, n_blocks))
            for res in pool.map(task, batch) if threads > 1 else map(task, batch):
                results.append(res)
                if stop(results):
                    return results
    return results


def simulate_y_many(b, channel, link, n_windows, seed=0, ambient=AmbientModel.CONSTANT_ENVELOPE,
                    block_windows=1 << 16, threads=1):
    """``n_windows`` independent realisations of Y for a fixed channel and bit."""
    gain = complex(channel.h1 if b else channel.h0)
    n_blocks = -(-n_windows // block_windows)

    def task(block):
        rngs = block_streams(seed, block)
        size = min(block_windows, n_windows - block * block_windows)
        return window_energies(np.full(size, gain), link, ambient, rngs["ambient"], rngs["noise"])

    return np.concatenate(_run_blocks(task, n_blocks, threads, lambda r: False))


# ---------------------------------------------------------------------------
# Receivers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _BlockTally:
    bits: int
    errors: int
    cluster_sq: float
    clusters: int
    symbols: int = 0
    flips: int = 0


def _wilson_halfwidth(p, n):
    if n <= 0:
        return 0.5
    z2 = Z95 * Z95
    return Z95 / (1.0 + z2 / n) * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))


def _merge(tallies, method_diag):
    bits = sum(t.bits for t in tallies)
    errors = sum(t.errors for t in tallies)
    clusters = sum(t.clusters for t in tallies)
    p = errors / bits
    # cluster-robust standard error: errors within one coherence interval
    # share a channel and are not independent
    per_cluster = bits / clusters
    sq = sum(t.cluster_sq for t in tallies)
    var_cluster = max(sq / clusters - (errors / clusters) ** 2, 0.0)
    if clusters > 1:
        var_cluster *= clusters / (clusters - 1)
    se = math.sqrt(var_cluster / clusters) / per_cluster
    design = max(1.0, se * se * bits / max(p * (1.0 - p), 1e-300)) if 0 < p < 1 else 1.0
    half = _wilson_halfwidth(p, bits / design)
    diagnostics = dict(method_diag, clusters=clusters, design_effect=design)
    symbols = sum(t.symbols for t in tallies)
    if symbols:
        diagnostics.update(symbols=symbols, symbol_flips=sum(t.flips for t in tallies))
    return BerEstimate(
        p, BerMethod.MONTE_CARLO, ci_halfwidth=half, std_error=se, n_trials=bits, n_errors=errors,
        diagnostics=diagnostics,
    )


def _resolve_channel(plan, channel):
    if isinstance(channel, FadingParams):
        if plan.channel_mode is not ChannelMode.BLOCK_FADING:
            raise InvalidParameterError("fading statistics given but the plan asks for a fixed channel")
        return None
    if isinstance(channel, ChannelPair):
        if plan.channel_mode is not ChannelMode.FIXED:
            raise InvalidParameterError("a fixed channel was given but the plan asks for block fading")
        return channel
    raise InvalidParameterError("channel must be FadingParams or ChannelPair")


def _interval_channels(plan, channel, fading_params, rng, count):
    if channel is not None:
        return np.full(count, complex(channel.h0)), np.full(count, complex(channel.h1))
    pair = sample_channel(rng, fading_params, size=count)
    return pair.h0, pair.h1


def _stop_rule(plan):
    def stop(results):
        bits = sum(t.bits for t in results)
        if bits >= plan.n_bits:
            return True
        return plan.max_errors is not None and sum(t.errors for t in results) >= plan.max_errors

    return stop


def _blocks_needed(plan, bits_per_block):
    return -(-plan.n_bits // bits_per_block)


def run_receiver_r1(plan, strategy, link, channel):
    """Monte Carlo BER of the receiver with CSI.

    ``channel`` is a :class:`FadingParams` for block fading or a
    :class:`ChannelPair` for a fixed channel.  Equal-prior random bits; the
    threshold per coherence interval comes from ``strategy`` with the true
    gains.
    """
    strategy = detection.DetectionStrategy.parse(strategy)
    fixed = _resolve_channel(plan, channel)
    span = plan.coherence_bits
    intervals = max(1, plan.block_bits // span)
    bits_per_block = intervals * span

    def task(block):
        rngs = block_streams(plan.seed, block)
        count = min(intervals, -(-(plan.n_bits - block * bits_per_block) // span))
        h0, h1 = _interval_channels(plan, fixed, channel, rngs["channel"], count)
        mu, nu = np.abs(h0) ** 2, np.abs(h1) ** 2
        # ties are only allowed under MT; other strategies raise here
        t = detection.threshold_values(strategy, mu, nu, link)
        bits = rngs["bits"].integers(0, 2, size=(count, span), dtype=np.int8)
        gains = np.where(bits == 1, h1[:, None], h0[:, None])
        y = window_energies(gains, link, plan.ambient, rngs["ambient"], rngs["noise"]).reshape(count, span)
        up = (nu >= mu)[:, None]
        decided = np.where(up, y > t[:, None], y < t[:, None])
        wrong = (decided != (bits == 1)).sum(axis=1)
        return _BlockTally(count * span, int(wrong.sum()), float(np.sum(wrong.astype(float) ** 2)), count)

    results = _run_blocks(task, _blocks_needed(plan, bits_per_block), plan.resolved_threads(), _stop_rule(plan))
    return _merge(results, {"receiver": ReceiverKind.R1_CSI.value, "strategy": strategy.value})


def run_receiver_r2(plan, link, channel, strategy=detection.DetectionStrategy.MT):
    """Monte Carlo message-bit BER of the differential receiver without CSI.

    Each coherence interval carries ``coherence_bits`` symbols: a random
    reference symbol followed by ``coherence_bits - 1`` differentially
    encoded message bits, ``b(n) = b(n-1) XOR m(n)``.  The receiver slices
    at its threshold and decodes ``m(n) = b(n) XOR b(n-1)``, which does not
    need to know which symbol carries more energy.  With the pilot threshold
    a known alternating preamble of ``pilot_windows`` windows precedes the
    data under the same channel.
    """
    strategy = detection.DetectionStrategy.parse(strategy)
    if plan.coherence_bits < 2:
        raise InvalidParameterError("differential decoding needs coherence_bits >= 2")
    if plan.r2_threshold is R2Threshold.PILOT and strategy is not detection.DetectionStrategy.MT:
        raise InvalidParameterError("a pilot-estimated threshold is only defined for MT")
    fixed = _resolve_channel(plan, channel)
    span = plan.coherence_bits
    per_interval = span - 1
    intervals = max(1, plan.block_bits // per_interval)
    bits_per_block = intervals * per_interval

    def task(block):
        rngs = block_streams(plan.seed, block)
        count = min(intervals, -(-(plan.n_bits - block * bits_per_block) // per_interval))
        h0, h1 = _interval_channels(plan, fixed, channel, rngs["channel"], count)
        mu, nu = np.abs(h0) ** 2, np.abs(h1) ** 2

        ref = rngs["bits"].integers(0, 2, size=(count, 1), dtype=np.int8)
        msg = rngs["bits"].integers(0, 2, size=(count, per_interval), dtype=np.int8)
        sym = np.bitwise_xor.accumulate(np.concatenate([ref, msg], axis=1), axis=1)
        gains = np.where(sym == 1, h1[:, None], h0[:, None])
        y = window_energies(gains, link, plan.ambient, rngs["ambient"], rngs["noise"]).reshape(count, span)

        if plan.r2_threshold is R2Threshold.PILOT:
            pattern = np.arange(plan.pilot_windows) % 2
            pilot_gains = np.where(pattern == 1, h1[:, None], h0[:, None])
            yp = window_energies(pilot_gains, link, plan.ambient, rngs["pilot"], rngs["pilot"])
            yp = yp.reshape(count, plan.pilot_windows)
            t = 0.5 * (yp[:, pattern == 0].mean(axis=1) + yp[:, pattern == 1].mean(axis=1))
        else:
            t = detection.threshold_values(strategy, mu, nu, link)

        raw = y > t[:, None]
        decoded = raw[:, 1:] ^ raw[:, :-1]
        wrong = (decoded != (msg == 1)).sum(axis=1)
        # symbol flips relative to the orientation a receiver with CSI would use
        up = (nu >= mu)[:, None]
        flips = int(np.sum(np.where(up, raw, ~raw) != (sym == 1)))
        return _BlockTally(
            count * per_interval, int(wrong.sum()), float(np.sum(wrong.astype(float) ** 2)), count,
            symbols=count * span, flips=flips,
        )

    results = _run_blocks(task, _blocks_needed(plan, bits_per_block), plan.resolved_threads(), _stop_rule(plan))
    return _merge(
        results,
        {"receiver": ReceiverKind.R2_NOCSI.value, "strategy": strategy.value, "threshold": plan.r2_threshold.value},
    )


def run_receiver(receiver, plan, strategy, link, channel):
    if ReceiverKind.parse(receiver) is ReceiverKind.R1_CSI:
        return run_receiver_r1(plan, strategy, link, channel)
    return run_receiver_r2(plan, link, channel, strategy)


# ---------------------------------------------------------------------------
# Channel-sampled average of the conditional BER
# ---------------------------------------------------------------------------


def semi_analytic_avg_ber(receiver, strategy, link, fading_params, n_channels, seed=0, chunk=1 << 16):
    """Mean of the conditional BER over ``n_channels`` sampled channel pairs.

    Draws come from the ``channel`` stream of consecutive blocks of ``chunk``
    pairs, so a run with more channels extends a shorter one.
    """
    if n_channels < 1:
        raise InvalidParameterError("n_channels must be positive")
    total = 0.0
    total_sq = 0.0
    for block in range(-(-n_channels // chunk)):
        size = min(chunk, n_channels - block * chunk)
        pair = sample_channel(block_streams(seed, block)["channel"], fading_params, size=size)
        p = conditional_ber(receiver, strategy, pair.mu, pair.nu, link)
        total += float(np.sum(p))
        total_sq += float(np.sum(p * p))
    mean = total / n_channels
    var = max(total_sq / n_channels - mean * mean, 0.0) * (n_channels / max(n_channels - 1, 1))
    se = math.sqrt(var / n_channels) if n_channels > 1 else 0.0
    return BerEstimate(
        min(max(mean, 0.0), 1.0), BerMethod.SEMI_ANALYTIC, ci_halfwidth=Z95 * se, std_error=se,
        n_trials=n_channels,
        diagnostics={"receiver": ReceiverKind.parse(receiver).value,
                     "strategy": detection.DetectionStrategy.parse(strategy).value},
    )
