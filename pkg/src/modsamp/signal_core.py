"""Bandlimited test signals, dense-grid surrogates and brick-wall low-pass filters.

A :class:`BandlimitedSignal` is the finite sinc series

    x(t) = sum_{i=1}^{n} a_i * sinc((t - i*T) / T),   sinc(u) = sin(pi u) / (pi u)

whose spectrum is confined to [-pi/T, pi/T].  ``T`` is the Nyquist *period*.
A :class:`DenseWaveform` stands in for continuous time on a fine uniform grid and a
:class:`SampleSequence` holds ADC-rate samples.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize_scalar

from ._validation import (
    as_float_array,
    check_count,
    check_positive,
    frozen,
)
from .exceptions import CapacityError, ParameterError

#: Upper bound on the number of points a dense rendering may allocate.
MAX_DENSE_POINTS = 2**27

_EVAL_CHUNK = 1 << 22  # matrix elements per evaluation block


@dataclass(frozen=True)
class BandlimitedSignal:
    """Sinc series with coefficients ``coeffs`` centred at ``T, 2T, ..., nT``.

    ``duration`` is the observation window used by the experiments; it defaults to
    ``(n_terms + 1) * nyquist_period`` so the window spans every sinc centre and
    ends on a zero of the series.
    """

    coeffs: tuple
    nyquist_period: float
    duration: float = None

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.asarray(self.coeffs, dtype=float).reshape(-1))
        if len(coeffs) < 1:
            raise ParameterError("a bandlimited signal needs at least one coefficient")
        if not all(math.isfinite(c) for c in coeffs):
            raise ParameterError("coefficients must be finite")
        check_positive(self.nyquist_period, "nyquist_period")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "nyquist_period", float(self.nyquist_period))
        if self.duration is None:
            object.__setattr__(self, "duration", (len(coeffs) + 1) * self.nyquist_period)
        else:
            object.__setattr__(self, "duration", check_positive(self.duration, "duration"))

    @property
    def n_terms(self):
        return len(self.coeffs)

    @property
    def bandwidth(self):
        """Highest angular frequency present, pi/T in rad/s."""
        return math.pi / self.nyquist_period

    def scaled(self, factor):
        return BandlimitedSignal(
            tuple(factor * c for c in self.coeffs), self.nyquist_period, self.duration
        )

    def __add__(self, other):
        if not isinstance(other, BandlimitedSignal):
            return NotImplemented
        if other.nyquist_period != self.nyquist_period:
            raise ParameterError("can only add signals that share a Nyquist period")
        n = max(self.n_terms, other.n_terms)
        a = np.zeros(n)
        a[: self.n_terms] += self.coeffs
        a[: other.n_terms] += other.coeffs
        return BandlimitedSignal(tuple(a), self.nyquist_period, max(self.duration, other.duration))


@dataclass(frozen=True, eq=False)
class DenseWaveform:
    """Uniform fine-grid samples ``values[k]`` at ``t0 + k * dense_period``."""

    values: np.ndarray
    dense_period: float
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", frozen(as_float_array(self.values, "values", 2)))
        object.__setattr__(self, "dense_period", check_positive(self.dense_period, "dense_period"))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self):
        return self.values.size

    @property
    def times(self):
        return self.t0 + np.arange(self.values.size) * self.dense_period

    def with_values(self, values):
        return DenseWaveform(values, self.dense_period, self.t0)

    def same_grid(self, other):
        return (
            len(self) == len(other)
            and math.isclose(self.dense_period, other.dense_period, rel_tol=1e-12)
            and math.isclose(self.t0, other.t0, rel_tol=1e-12, abs_tol=1e-15 * self.dense_period)
        )


@dataclass(frozen=True, eq=False)
class SampleSequence:
    """ADC-rate samples ``values[n]`` taken at ``t0 + n * period``."""

    values: np.ndarray
    period: float
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", frozen(as_float_array(self.values, "values", 1)))
        object.__setattr__(self, "period", check_positive(self.period, "period"))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self):
        return self.values.size

    @property
    def times(self):
        return self.t0 + np.arange(self.values.size) * self.period

    def with_values(self, values):
        return SampleSequence(values, self.period, self.t0)


def generate_random_bl_signal(n_terms, nyquist_period, amp_low, amp_high, seed, duration=None):
    """Draw ``n_terms`` i.i.d. uniform coefficients on ``[amp_low, amp_high]``.

    The generator is ``numpy.random.default_rng(seed)`` so equal arguments give
    bit-identical signals.
    """
    n_terms = check_count(n_terms, "n_terms", 1)
    check_positive(nyquist_period, "nyquist_period")
    if not (math.isfinite(amp_low) and math.isfinite(amp_high)) or not amp_low < amp_high:
        raise ParameterError(f"need amp_low < amp_high, got [{amp_low}, {amp_high}]")
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(amp_low, amp_high, n_terms)
    return BandlimitedSignal(tuple(coeffs), nyquist_period, duration)


def evaluate(signal, t):
    """Exact series value at ``t`` (scalar in, float out; array in, array out)."""
    scalar = np.ndim(t) == 0
    u = np.asarray(t, dtype=float).reshape(-1) / signal.nyquist_period
    a = np.asarray(signal.coeffs)
    centres = np.arange(1, a.size + 1, dtype=float)
    out = np.empty(u.size)
    rows = max(1, _EVAL_CHUNK // a.size)
    for start in range(0, u.size, rows):
        block = u[start : start + rows]
        # row-wise sum rather than a BLAS product: each value must not depend
        # on which other points share its block
        out[start : start + rows] = (np.sinc(block[:, None] - centres[None, :]) * a).sum(axis=1)
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(t))


def render_dense(signal, sample_period, refine, t0, n_samples):
    """Evaluate ``signal`` on ``n_samples * refine`` points spaced ``sample_period / refine``.

    Point ``k`` sits at ``t0 + (k / refine) * sample_period`` so that every
    ``refine``-th point coincides bit-for-bit with the ``refine=1`` rendering.
    """
    check_positive(sample_period, "sample_period")
    refine = check_count(refine, "refine", 1)
    n_samples = check_count(n_samples, "n_samples", 2)
    total = n_samples * refine
    if total > MAX_DENSE_POINTS:
        raise CapacityError(
            f"dense grid of {n_samples} x {refine} points exceeds the limit of {MAX_DENSE_POINTS}"
        )
    times = t0 + (np.arange(total) / refine) * sample_period
    return DenseWaveform(evaluate(signal, times), sample_period / refine, t0)


def _polish_peak(signal, t, values, h, start, stop, refine):
    best = float(values.max())
    slack = best * (1.0 - math.pi**2 / (8 * refine**2)) if refine > 1 else 0.0
    for k in np.nonzero(values >= slack)[0]:
        lo, hi = max(start, t[k] - h), min(stop, t[k] + h)
        if hi <= lo:
            continue
        res = minimize_scalar(
            lambda u: -abs(evaluate(signal, u)), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12 * signal.nyquist_period},
        )
        best = max(best, -float(res.fun))
    return best


def inf_norm(w, start=None, stop=None, refine=64, polish=False):
    """Largest absolute value on a grid.

    For arrays, :class:`DenseWaveform` and :class:`SampleSequence` this is the exact
    maximum of the stored values.  A :class:`BandlimitedSignal` is rendered on
    ``[start, stop]`` (default ``[0, duration]``) at spacing ``T / refine``, which
    is low by at most a relative ``pi**2 / (8 * refine**2)`` (Bernstein bound on
    the curvature).  With ``polish=True`` the grid peaks within that bound of the
    maximum are then refined by a bounded scalar search, giving the sup-norm to
    near machine precision.
    """
    if isinstance(w, BandlimitedSignal):
        start = 0.0 if start is None else float(start)
        stop = w.duration if stop is None else float(stop)
        if not stop > start:
            raise ParameterError(f"empty interval [{start}, {stop}]")
        refine = check_count(refine, "refine", 1)
        h = w.nyquist_period / refine
        n = int(math.floor((stop - start) / h + 1e-9)) + 1
        t = start + np.arange(n) * h
        values = np.abs(evaluate(w, t))
        if polish:
            return _polish_peak(w, t, values, h, start, stop, refine)
    elif isinstance(w, (DenseWaveform, SampleSequence)):
        values = w.values
    else:
        values = np.asarray(w, dtype=float).reshape(-1)
    if values.size == 0:
        raise ParameterError("inf_norm of an empty input")
    return float(np.max(np.abs(values)))


def brickwall(values, spacing, cutoff):
    """Zero every DFT bin with ``|omega| > cutoff`` (rad/s) and return the real result.

    Bins at or below the cutoff pass unchanged, so the filter is linear,
    idempotent and never increases energy.  The transform treats the input as
    one period of a periodic sequence.
    """
    values = np.asarray(values, dtype=float)
    nyquist = math.pi / spacing
    if not cutoff > 0:
        raise ParameterError(f"cutoff must be positive, got {cutoff}")
    if cutoff > nyquist * (1 + 1e-12):
        raise ParameterError(
            f"cutoff {cutoff:.6g} rad/s is above the grid Nyquist frequency {nyquist:.6g} rad/s"
        )
    n = values.size
    spectrum = np.fft.rfft(values)
    omega = 2 * math.pi * np.fft.rfftfreq(n, spacing)
    spectrum[omega > cutoff * (1 + 1e-12)] = 0.0
    return np.fft.irfft(spectrum, n)


def ideal_lowpass(w, cutoff):
    """Brick-wall low-pass of a dense waveform at ``cutoff`` rad/s."""
    return w.with_values(brickwall(w.values, w.dense_period, cutoff))


def digital_lowpass(s, cutoff):
    """Brick-wall low-pass of a sample sequence at ``cutoff`` rad/s."""
    return s.with_values(brickwall(s.values, s.period, cutoff))


def sample_times(duration, sample_period, t0=0.0):
    """Sample instants ``t0 + n * sample_period`` covering ``[t0, t0 + duration]``."""
    n = int(math.floor(duration / sample_period + 1e-9)) + 1
    return t0 + np.arange(n) * sample_period


def sample_signal(signal, sample_period, t0=0.0, n_samples=None):
    """Pointwise samples of ``signal`` over its duration (or ``n_samples`` of them)."""
    check_positive(sample_period, "sample_period")
    if n_samples is None:
        times = sample_times(signal.duration, sample_period, t0)
    else:
        times = t0 + np.arange(check_count(n_samples, "n_samples", 1)) * sample_period
    return SampleSequence(evaluate(signal, times), sample_period, t0)
