"""Theoretical and empirical error quantities for classical and modulo acquisition."""
from dataclasses import dataclass, fields
import math
import warnings

import numpy as np

from ._validation import check_count, check_positive, interior
from .exceptions import ParameterError
from .signal_core import brickwall

ERROR_FIELDS = (
    "e_classical_theory",
    "e_classical_live",
    "e_mod_q_theory",
    "e_mod_hf",
    "e_mod_live",
    "e_mod_ideal_sampler",
)

#: Relative gap above which a trial is flagged by :func:`total_mod_mse_check`.
DECOMPOSITION_TOLERANCE = 0.25


@dataclass(frozen=True)
class ErrorBreakdown:
    """One (trial, bits, oversampling) row of the error study.

    All errors are mean squared errors in squared amplitude units, measured on
    the guarded interior after the digital low-pass at the signal bandwidth.
    ``warn`` is 1 when recovery reported a problem on this trial.
    """

    trial: int
    bits: int
    of: float
    comb_n: int
    e_classical_theory: float
    e_classical_live: float
    e_mod_q_theory: float
    e_mod_hf: float
    e_mod_live: float
    e_mod_ideal_sampler: float
    warn: int = 0

    def __post_init__(self):
        for name in ERROR_FIELDS:
            value = getattr(self, name)
            if not value >= 0:
                raise ParameterError(f"{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class DecompositionCheck:
    relative_gap: float
    flagged: bool


def oversampling_factor(nyquist_period, sample_period):
    return check_positive(nyquist_period, "nyquist_period") / check_positive(sample_period, "sample_period")


def lambda_rule(inf_norm, of):
    """Folding threshold ``inf_norm / (of - 2)``.

    A zero signal yields 0 with a ``RuntimeWarning``; such a threshold cannot
    build a :class:`~modsamp.analog_chain.ModuloSpec`.
    """
    if not of > 2:
        raise ParameterError(f"the lambda rule needs an oversampling factor above 2, got {of}")
    if inf_norm < 0:
        raise ParameterError("inf_norm must be non-negative")
    if inf_norm == 0:
        warnings.warn("degenerate (all-zero) signal: lambda is 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return inf_norm / (of - 2)


def classical_mse_theory(inf_norm, bits, of):
    bits = check_count(bits, "bits", 1)
    check_positive(of, "of")
    step = inf_norm / (2**bits - 1)
    return step * step / (12.0 * of)


def modulo_q_mse_theory(inf_norm, bits, of):
    """Quantization MSE of the modulo channel with the lambda rule applied.

    ``bits`` is the amplitude resolution; pass ``b - 1`` when one bit of a
    ``b``-bit word carries the fold flag.
    """
    bits = check_count(bits, "bits", 1)
    if not of > 2:
        raise ParameterError(f"modulo quantization error needs of > 2, got {of}")
    lam = inf_norm / (of - 2)
    return (lam / (2**bits - 1)) ** 2 / (12.0 * of)


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


def mse(a, b, guard=0.1):
    """Mean squared difference over the guarded interior."""
    a, b = _values(a), _values(b)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.size} vs {b.size}")
    sl = interior(a.size, guard)
    d = a[sl] - b[sl]
    return float(np.mean(d * d))


def lowpassed_mse(error, period, cutoff, guard=0.1):
    """MSE of an error sequence after the brick-wall low-pass at ``cutoff`` rad/s.

    Filtering the error rather than the reconstruction keeps the finite-window
    edge effects of the ground-truth signal out of the measurement.
    """
    filtered = brickwall(_values(error), period, cutoff)
    sl = interior(filtered.size, guard)
    return float(np.mean(filtered[sl] ** 2))


def mod_hf_mse(comb_samples, ideal_samples, guard=0.1, cutoff=None):
    """MSE between low-passed-channel samples and ideal modulo samples.

    With ``cutoff`` (rad/s) the difference is first passed through the digital
    low-pass, putting it on the same footing as the reconstruction errors.
    """
    a, b = _values(comb_samples), _values(ideal_samples)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.size} vs {b.size}")
    if cutoff is None:
        return mse(a, b, guard)
    period = getattr(comb_samples, "period", None)
    if period is None:
        raise ParameterError("a cutoff needs SampleSequence inputs to know the sample period")
    return lowpassed_mse(a - b, period, cutoff, guard)


def total_mod_mse_check(breakdown, tolerance=DECOMPOSITION_TOLERANCE):
    """Compare live modulo error with ``e_mod_hf + e_mod_q_theory``."""
    live = breakdown.e_mod_live
    predicted = breakdown.e_mod_hf + breakdown.e_mod_q_theory
    if live == 0:
        gap = 0.0 if predicted == 0 else math.inf
    else:
        gap = abs(live - predicted) / live
    return DecompositionCheck(gap, gap > tolerance)


def loglog_slope(of_values, mse_values):
    """Least-squares slope of ``log(mse)`` against ``log(of)``."""
    x = np.asarray(of_values, dtype=float)
    y = np.asarray(mse_values, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ParameterError("need at least 3 matching (of, mse) points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError("log-log fit needs positive values")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def aggregate(rows):
    """Mean and standard error of every error field per ``(bits, of, comb_n)``.

    Rows are sorted by trial inside each group first, so the result does not
    depend on the order trials finished in.
    """
    groups = {}
    for row in sorted(rows, key=lambda r: (r.bits, r.of, r.trial)):
        groups.setdefault((row.bits, row.of, row.comb_n), []).append(row)
    out = []
    for (bits, of, comb_n), members in groups.items():
        entry = {"bits": bits, "of": of, "comb_n": comb_n, "n_trials": len(members)}
        for name in ERROR_FIELDS:
            vals = np.array([getattr(r, name) for r in members])
            entry[f"mean_{name}"] = float(vals.mean())
            entry[f"sem_{name}"] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        entry["n_warn"] = sum(r.warn for r in members)
        out.append(entry)
    return out


def breakdown_fields():
    return [f.name for f in fields(ErrorBreakdown)]
