"""Unfolding of modulo samples, delay alignment and final low-pass reconstruction."""
from dataclasses import dataclass
import math
import warnings

import numpy as np

from ._validation import as_flag_array, check_count, check_positive, interior
from .exceptions import AlignmentError, ParameterError, RecoveryWarning
from .signal_core import SampleSequence, digital_lowpass

RECOVERY_MODES = ("itoh", "extra_bit_gated")


@dataclass(frozen=True)
class RecoveryConfig:
    lam: float
    mode: str = "itoh"
    post_lpf_cutoff: float = None
    max_folds_per_step: int = 4

    def __post_init__(self):
        object.__setattr__(self, "lam", check_positive(self.lam, "lambda"))
        if self.mode not in RECOVERY_MODES:
            raise ParameterError(f"unknown recovery mode {self.mode!r}; expected one of {RECOVERY_MODES}")
        if self.post_lpf_cutoff is not None:
            check_positive(self.post_lpf_cutoff, "post_lpf_cutoff")
        check_count(self.max_folds_per_step, "max_folds_per_step", 1)


@dataclass(frozen=True, eq=False)
class UnwrapResult:
    samples: SampleSequence
    fold_counts: np.ndarray  # cumulative 2*lam multiples added, relative to sample 0
    n_clamped: int


def unwrap_detailed(folded, flags, cfg):
    """First-difference unwrapping with the per-step fold estimate exposed.

    Each difference ``d = folded[n] - folded[n-1]`` gets the correction
    ``2*lam*k`` with ``k = round(-d / (2*lam))`` clamped to
    ``+-max_folds_per_step``.  In ``extra_bit_gated`` mode ``k`` is 0 wherever
    the fold flag is clear.  Sample 0 passes through unchanged.
    """
    values = folded.values
    two = 2.0 * cfg.lam
    k = np.rint(-np.diff(values) / two)
    cap = cfg.max_folds_per_step
    n_clamped = int(np.count_nonzero(np.abs(k) > cap))
    k = np.clip(k, -cap, cap)
    if cfg.mode == "extra_bit_gated":
        if flags is None:
            raise ParameterError("extra_bit_gated unwrapping needs fold flags")
        gate = as_flag_array(flags, values.size)
        k = np.where(gate[1:], k, 0.0)
    counts = np.zeros(values.size, dtype=np.int64)
    counts[1:] = np.cumsum(k).astype(np.int64)
    out = values + two * counts
    return UnwrapResult(folded.with_values(out), counts, n_clamped)


def unwrap(folded, flags, cfg):
    """Unwrapped samples; warns with :class:`RecoveryWarning` when the clamp was hit."""
    result = unwrap_detailed(folded, flags, cfg)
    if result.n_clamped:
        warnings.warn(
            f"{result.n_clamped} step(s) needed more than {cfg.max_folds_per_step} folds",
            RecoveryWarning,
            stacklevel=2,
        )
    return result.samples


def unfold_with_counts(folded, fold_counts, lam):
    """Add known fold counts back: ``folded + 2*lam*counts``.

    Stands in for a recovery method that is guaranteed to identify every fold,
    so that only the acquisition errors remain in the output.
    """
    counts = np.asarray(fold_counts, dtype=float).reshape(-1)
    if counts.size != len(folded):
        raise ParameterError(f"fold_counts has length {counts.size}, expected {len(folded)}")
    return folded.with_values(folded.values + 2.0 * lam * counts)


def remove_fold_offset(error, lam, guard=0.1):
    """Subtract the multiple of ``2*lam`` closest to the interior mean of ``error``.

    The absolute fold count of the first sample cannot be observed from folded
    data, so recovered sequences are compared to ground truth modulo one global
    ``2*lam`` offset.
    """
    error = np.asarray(error, dtype=float)
    sl = interior(error.size, guard)
    shift = np.rint(np.mean(error[sl]) / (2.0 * lam))
    return error - 2.0 * lam * shift


def align_delay(reference, candidate, max_lag):
    """Integer lag maximising the normalised cross-correlation.

    ``candidate[n + lag]`` is matched to ``reference[n]``; a candidate delayed by
    ``d`` samples yields ``lag = d``.  Ties go to the smaller ``|lag|`` (negative
    first).  Returns ``(lag, reference_trimmed, candidate_aligned)`` restricted
    to the common support.
    """
    if not math.isclose(reference.period, candidate.period, rel_tol=1e-9):
        raise ParameterError("alignment needs sequences with the same sample period")
    max_lag = check_count(max_lag, "max_lag", 0)
    ref = reference.values
    cand = candidate.values
    if 2 * max_lag >= min(ref.size, cand.size):
        raise ParameterError(f"max_lag={max_lag} must be below half the sequence length")
    if np.ptp(ref) == 0 or np.ptp(cand) == 0:
        raise AlignmentError("cannot align a constant sequence")
    best_lag, best_score = None, -np.inf
    for lag in _lag_order(max_lag):
        lo = max(0, -lag)
        hi = min(ref.size, cand.size - lag)
        a = ref[lo:hi] - ref[lo:hi].mean()
        b = cand[lo + lag : hi + lag] - cand[lo + lag : hi + lag].mean()
        denom = math.sqrt(float(a @ a) * float(b @ b))
        if denom == 0:
            continue
        score = float(a @ b) / denom
        if score > best_score:
            best_lag, best_score = lag, score
    if best_lag is None:
        raise AlignmentError("every lag has a constant overlap")
    lo = max(0, -best_lag)
    hi = min(ref.size, cand.size - best_lag)
    ref_out = SampleSequence(ref[lo:hi], reference.period, reference.t0 + lo * reference.period)
    cand_out = SampleSequence(cand[lo + best_lag : hi + best_lag], reference.period, ref_out.t0)
    return best_lag, ref_out, cand_out


def _lag_order(max_lag):
    yield 0
    for m in range(1, max_lag + 1):
        yield -m
        yield m


def reconstruct(unwrapped, cfg):
    """Digital low-pass at ``cfg.post_lpf_cutoff``; returns ``(reconstructed, unwrapped)``."""
    if cfg.post_lpf_cutoff is None:
        raise ParameterError("reconstruction needs post_lpf_cutoff")
    if cfg.post_lpf_cutoff > math.pi / unwrapped.period * (1 + 1e-12):
        raise ParameterError(
            f"post_lpf_cutoff {cfg.post_lpf_cutoff:.6g} rad/s exceeds pi/Ts = {math.pi / unwrapped.period:.6g}"
        )
    return digital_lowpass(unwrapped, cfg.post_lpf_cutoff), unwrapped
