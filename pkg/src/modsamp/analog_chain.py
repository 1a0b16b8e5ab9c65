"""Analog front end: centred modulo folding, comb mixing, low-pass filtering, sampling.

Two evaluation routes are provided for the band-limited channels.

``method="analytic"`` (default) works in continuous time.  Writing the folded
signal as ``x(t) - 2*lam*k(t)`` with an integer step function ``k``, mixing with a
comb of ``N`` harmonics and low-passing at ``pi/Ts`` keeps every spectral copy
``|l| <= N`` of the folded spectrum in baseband, which is the same as low-passing
the folded signal at ``W = (2N + 1) * pi / Ts``.  The bandlimited part ``x`` passes
untouched and each fold edge at time ``tau`` becomes the step response
``1/2 + Si(W * (t - tau)) / pi``.  Fold instants are located by bracketing and
bisection, so the result holds for any ``N`` without a time grid.

``method="spectral"`` and ``method="mix"`` render the signal on a dense grid and
apply the alias sum in the DFT domain or the literal multiply-then-filter chain.
They are limited to ``2N + 1 <= refine`` and serve as cross-checks.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import sici

from ._validation import as_flag_array, check_count, check_positive, frozen
from .exceptions import CapacityError, ParameterError
from .signal_core import (
    MAX_DENSE_POINTS,
    DenseWaveform,
    SampleSequence,
    brickwall,
    evaluate,
    ideal_lowpass,
    render_dense,
    sample_times,
)

CHANNEL_KINDS = ("classical", "ideal_modulo", "direct_lpf_modulo", "comb_modulo")

_MATRIX_CHUNK = 1 << 22


@dataclass(frozen=True)
class ModuloSpec:
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "lam", check_positive(self.lam, "lambda"))


@dataclass(frozen=True)
class CombSpec:
    """Comb ``p(t) = sum_{|k| <= harmonics} exp(2j*pi*k*t/period)``."""

    harmonics: int
    period: float

    def __post_init__(self):
        object.__setattr__(self, "harmonics", check_count(self.harmonics, "harmonics", 0))
        object.__setattr__(self, "period", check_positive(self.period, "period"))


@dataclass(frozen=True)
class ChannelConfig:
    """One acquisition channel.  Use the classmethod constructors."""

    kind: str
    sample_period: float
    modulo: ModuloSpec = None
    comb: CombSpec = None
    lpf_cutoff: float = None

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ParameterError(f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}")
        ts = check_positive(self.sample_period, "sample_period")
        object.__setattr__(self, "sample_period", ts)
        wants_modulo = self.kind != "classical"
        wants_lpf = self.kind in ("direct_lpf_modulo", "comb_modulo")
        wants_comb = self.kind == "comb_modulo"
        if (self.modulo is not None) != wants_modulo:
            raise ParameterError(f"{self.kind} channel {'needs' if wants_modulo else 'takes no'} modulo spec")
        if (self.comb is not None) != wants_comb:
            raise ParameterError(f"{self.kind} channel {'needs' if wants_comb else 'takes no'} comb spec")
        if wants_comb and not math.isclose(self.comb.period, ts, rel_tol=1e-12):
            raise ParameterError("comb period must equal the sample period")
        if wants_lpf:
            cutoff = math.pi / ts if self.lpf_cutoff is None else self.lpf_cutoff
            if not math.isclose(cutoff, math.pi / ts, rel_tol=1e-9):
                raise ParameterError(f"{self.kind} channel low-pass must sit at pi/Ts = {math.pi / ts:.6g} rad/s")
            object.__setattr__(self, "lpf_cutoff", float(cutoff))
        elif self.lpf_cutoff is not None:
            raise ParameterError(f"{self.kind} channel has no low-pass filter")

    @classmethod
    def classical(cls, sample_period):
        return cls("classical", sample_period)

    @classmethod
    def ideal_modulo(cls, lam, sample_period):
        return cls("ideal_modulo", sample_period, ModuloSpec(lam))

    @classmethod
    def direct_lpf_modulo(cls, lam, sample_period):
        return cls("direct_lpf_modulo", sample_period, ModuloSpec(lam))

    @classmethod
    def comb_modulo(cls, lam, harmonics, sample_period):
        return cls("comb_modulo", sample_period, ModuloSpec(lam), CombSpec(harmonics, sample_period))

    @property
    def harmonics(self):
        """Comb harmonics N; the direct low-pass channel behaves as ``N = 0``."""
        if self.kind == "comb_modulo":
            return self.comb.harmonics
        if self.kind == "direct_lpf_modulo":
            return 0
        return None


@dataclass(frozen=True, eq=False)
class FoldEventTrace:
    """``flags[k]`` is set when the fold count changed between index k-1 and k."""

    flags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flags", frozen(np.asarray(self.flags, dtype=bool).reshape(-1)))

    def __len__(self):
        return self.flags.size


@dataclass(frozen=True, eq=False)
class PipelineOutput:
    """Samples of one channel with its fold flags and the true fold counts at each instant."""

    config: ChannelConfig
    samples: SampleSequence
    flags: np.ndarray
    fold_counts: np.ndarray


@dataclass(frozen=True, eq=False)
class FoldCrossings:
    """Instants where the fold count of ``x(t)`` steps, with step signs (+1 up, -1 down)."""

    times: np.ndarray
    signs: np.ndarray
    lam: float


def fold_decompose(x, lam):
    """Return ``(folded, counts)`` with ``x = folded + 2*lam*counts`` and folded in [-lam, lam)."""
    x = np.asarray(x, dtype=float)
    two = 2.0 * lam
    counts = np.floor((x + lam) / two)
    folded = x - two * counts
    hi = folded >= lam
    lo = folded < -lam
    counts = counts + hi - lo
    folded = np.where(hi, folded - two, np.where(lo, folded + two, folded))
    return folded, counts.astype(np.int64)


def modulo_fold(x, spec):
    """Centred modulo ``((x + lam) mod 2 lam) - lam``; scalars in, scalars out."""
    folded, _ = fold_decompose(x, spec.lam)
    return float(folded) if np.ndim(x) == 0 else folded


def fold_count(x, spec):
    counts = fold_decompose(x, spec.lam)[1]
    return int(counts) if np.ndim(x) == 0 else counts


def fold_waveform(w, spec):
    """Fold every dense sample and flag indices where the fold count changes."""
    folded, counts = fold_decompose(w.values, spec.lam)
    flags = np.zeros(counts.size, dtype=bool)
    flags[1:] = counts[1:] != counts[:-1]
    return w.with_values(folded), FoldEventTrace(flags)


def counts_from_trace(folded, trace, spec):
    """Rebuild relative fold counts from folded values and the event trace.

    At each flagged index the jump ``folded[k] - folded[k-1]`` is rounded to the
    nearest multiple of ``2*lam``; this is exact when the unfolded signal moves by
    less than ``lam`` per grid step.
    """
    v = folded.values if isinstance(folded, DenseWaveform) else np.asarray(folded, dtype=float)
    flags = as_flag_array(trace.flags, v.size)
    steps = np.zeros(v.size, dtype=np.int64)
    d = np.diff(v)
    steps[1:] = np.where(flags[1:], np.rint(-d / (2 * spec.lam)), 0).astype(np.int64)
    return np.cumsum(steps)


def _grid_ratio(period, dense_period):
    ratio = period / dense_period
    r = round(ratio)
    if r < 1 or abs(ratio - r) > 1e-9 * ratio:
        raise ParameterError(
            f"dense period {dense_period:.6g} s does not divide the comb period {period:.6g} s"
        )
    return int(r)


def comb_waveform(spec, grid):
    """Dirichlet-kernel comb ``sin((2N+1) pi t/Ts) / sin(pi t/Ts)`` on ``grid``'s time axis."""
    refine = _grid_ratio(spec.period, grid.dense_period)
    m = np.arange(len(grid))
    phase = np.mod(grid.t0 / spec.period + m / refine, 1.0)
    half = math.pi * phase
    n2 = 2 * spec.harmonics + 1
    den = np.sin(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.sin(n2 * half) / den
    near = np.abs(den) < 1e-12
    vals[near] = n2 * np.cos(n2 * half[near]) / np.cos(half[near])
    return grid.with_values(vals)


def mix(a, b):
    """Pointwise product of two waveforms on the same grid."""
    if not a.same_grid(b):
        raise ParameterError("mix needs waveforms on the same grid")
    return a.with_values(a.values * b.values)


def comb_alias_sum(folded, harmonics, sample_period):
    """Grid version of comb mixing plus low-pass at pi/Ts, done in the DFT domain.

    The spectrum is shifted by every comb harmonic ``|l| <= harmonics`` and summed,
    then bins above ``pi/Ts`` are removed.  Requires the dense grid to be an
    integer refinement of ``sample_period`` with ``2*harmonics + 1 <= refine``.
    """
    refine = _grid_ratio(sample_period, folded.dense_period)
    if 2 * harmonics + 1 > refine:
        raise ParameterError(
            f"a grid refined {refine}x cannot resolve {harmonics} comb harmonics; "
            "use method='analytic'"
        )
    m = len(folded)
    if m % refine:
        raise ParameterError("dense length must be a multiple of the refinement factor")
    shift = m // refine
    spectrum = np.fft.fft(folded.values)
    total = np.zeros_like(spectrum)
    for l in range(-harmonics, harmonics + 1):
        total += np.roll(spectrum, l * shift)
    omega = 2 * math.pi * np.abs(np.fft.fftfreq(m, folded.dense_period))
    total[omega > (math.pi / sample_period) * (1 + 1e-12)] = 0.0
    return folded.with_values(np.fft.ifft(total).real)


@lru_cache(maxsize=4096)
def _crossings_cached(signal, lam, t_lo, t_hi):
    T = signal.nyquist_period
    h = T / 32
    while True:
        n = int(math.ceil((t_hi - t_lo) / h)) + 1
        if n > MAX_DENSE_POINTS:
            raise CapacityError(f"crossing search needs {n} grid points")
        t = t_lo + np.arange(n) * h
        x = evaluate(signal, t)
        if np.max(np.abs(np.diff(x))) < 0.5 * lam:
            break
        h /= 2
    counts = fold_decompose(x, lam)[1]
    idx = np.nonzero(np.diff(counts))[0]
    if idx.size == 0:
        return np.empty(0), np.empty(0, dtype=np.int64)
    lo = t[idx].copy()
    hi = t[idx + 1].copy()
    before = counts[idx]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        same = fold_decompose(evaluate(signal, mid), lam)[1] == before
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
        if np.all(hi - lo <= 4 * np.spacing(np.maximum(np.abs(hi), T))):
            break
    return 0.5 * (lo + hi), (counts[idx + 1] - before).astype(np.int64)


def fold_crossings(signal, lam, t_start=None, t_stop=None):
    """Locate every fold event of ``signal`` for threshold ``lam``.

    The search covers ``[t_start, t_stop]`` (default: the signal duration)
    widened until the tail bound ``sum|a_i| / (pi * dist)`` drops below ``lam``,
    so no fold outside the searched span exists.  Results are cached per
    ``(signal, lam, span)``.
    """
    lam = check_positive(lam, "lambda")
    T = signal.nyquist_period
    t_start = 0.0 if t_start is None else float(t_start)
    t_stop = signal.duration if t_stop is None else float(t_stop)
    reach = sum(abs(a) for a in signal.coeffs) / (math.pi * lam) + 1.0
    t_lo = min(t_start, (1.0 - reach) * T)
    t_hi = max(t_stop, (signal.n_terms + reach) * T)
    times, signs = _crossings_cached(signal, lam, t_lo, t_hi)
    return FoldCrossings(times, signs, lam)


def edge_residual(delta, bandwidth):
    """Ideal step minus its low-passed version at offset ``delta`` from the edge.

    ``u(delta) - 1/2 - Si(bandwidth * delta) / pi`` with ``u(0) = 1``.
    """
    delta = np.asarray(delta, dtype=float)
    return (delta >= 0) - 0.5 - sici(bandwidth * delta)[0] / math.pi


def lowpassed_fold_samples(signal, lam, harmonics, times, sample_period, crossings=None):
    """Samples at ``times`` of the folded signal after comb mixing and the pi/Ts low-pass.

    ``harmonics=0`` is the plain low-pass (direct) channel.  Uses the
    continuous-time closed form described in the module docstring.
    """
    times = np.asarray(times, dtype=float)
    if crossings is None:
        crossings = fold_crossings(signal, lam, times.min(), times.max())
    folded, _ = fold_decompose(evaluate(signal, times), lam)
    if crossings.times.size == 0:
        return folded
    bandwidth = (2 * harmonics + 1) * math.pi / sample_period
    tau = crossings.times
    weights = 2.0 * lam * crossings.signs.astype(float)
    out = folded.copy()
    rows = max(1, _MATRIX_CHUNK // tau.size)
    for start in range(0, times.size, rows):
        block = times[start : start + rows]
        out[start : start + rows] += edge_residual(block[:, None] - tau[None, :], bandwidth) @ weights
    return out


def sample_rate_flags(crossings, times, sample_period):
    """Flag sample n when a fold happened in ``(t_n - Ts, t_n]``."""
    times = np.asarray(times, dtype=float)
    flags = np.zeros(times.size, dtype=bool)
    tau = crossings.times
    tau = tau[(tau > times[0] - sample_period) & (tau <= times[-1])]
    flags[np.searchsorted(times, tau, side="left")] = True
    return flags


def _downsample_trace(trace, refine, n_samples):
    flags = np.asarray(trace.flags)
    out = np.zeros(n_samples, dtype=bool)
    out[0] = flags[0]
    for n in range(1, n_samples):
        out[n] = flags[(n - 1) * refine + 1 : n * refine + 1].any()
    return out


def _run_grid(signal, cfg, refine, t0, n_samples, method):
    ts = cfg.sample_period
    dense = render_dense(signal, ts, refine, t0, n_samples)
    if cfg.kind == "classical":
        return dense.values[::refine].copy(), np.zeros(n_samples, dtype=bool)
    lam = cfg.modulo.lam
    if np.max(np.abs(np.diff(dense.values))) >= lam:
        raise ParameterError(
            f"refine={refine} is too coarse: the signal moves by lambda or more between grid points"
        )
    folded, trace = fold_waveform(dense, cfg.modulo)
    flags = _downsample_trace(trace, refine, n_samples)
    if cfg.kind == "ideal_modulo":
        return folded.values[::refine].copy(), flags
    if cfg.kind == "direct_lpf_modulo":
        return ideal_lowpass(folded, cfg.lpf_cutoff).values[::refine].copy(), flags
    harmonics = cfg.comb.harmonics
    if method == "spectral":
        return comb_alias_sum(folded, harmonics, ts).values[::refine].copy(), flags
    if 2 * harmonics + 1 > refine:
        raise ParameterError(
            f"a grid refined {refine}x cannot resolve {harmonics} comb harmonics; use method='analytic'"
        )
    mixed = mix(comb_waveform(cfg.comb, folded), folded)
    return ideal_lowpass(mixed, cfg.lpf_cutoff).values[::refine].copy(), flags


def run_channel(signal, cfg, refine=64, method="analytic", t0=0.0, n_samples=None):
    """Acquire ``signal`` through channel ``cfg``.

    Returns ``(samples, flags)`` where ``flags[n]`` marks a fold in
    ``((n-1)Ts, nTs]``.  Samples start at ``t0`` and by default cover the
    signal's duration.
    """
    ts = cfg.sample_period
    if n_samples is None:
        times = sample_times(signal.duration, ts, t0)
    else:
        times = t0 + np.arange(check_count(n_samples, "n_samples", 2)) * ts
    if method == "analytic":
        values, flags = _run_analytic(signal, cfg, times)
    elif method in ("spectral", "mix"):
        values, flags = _run_grid(signal, cfg, check_count(refine, "refine", 1), t0, times.size, method)
    else:
        raise ParameterError(f"unknown method {method!r}; expected analytic, spectral or mix")
    return SampleSequence(values, ts, t0), flags


def _run_analytic(signal, cfg, times):
    x = evaluate(signal, times)
    if cfg.kind == "classical":
        return x, np.zeros(times.size, dtype=bool)
    lam = cfg.modulo.lam
    crossings = fold_crossings(signal, lam, times[0], times[-1])
    flags = sample_rate_flags(crossings, times, cfg.sample_period)
    if cfg.kind == "ideal_modulo":
        return fold_decompose(x, lam)[0], flags
    values = lowpassed_fold_samples(
        signal, lam, cfg.harmonics, times, cfg.sample_period, crossings
    )
    return values, flags


def acquire(signal, cfg, t0=0.0, n_samples=None, method="analytic", refine=64):
    """Like :func:`run_channel` but also returns the true fold counts at each instant."""
    samples, flags = run_channel(signal, cfg, refine=refine, method=method, t0=t0, n_samples=n_samples)
    if cfg.kind == "classical":
        counts = np.zeros(len(samples), dtype=np.int64)
    else:
        counts = fold_decompose(evaluate(signal, samples.times), cfg.modulo.lam)[1]
    return PipelineOutput(cfg, samples, flags, counts)
