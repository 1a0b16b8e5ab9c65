"""scikit-learn style wrappers around the sample-domain operations.

Each row of ``X`` is one sample sequence.  The estimators compose with
:class:`sklearn.pipeline.Pipeline`, e.g. fold, quantize, unwrap, low-pass.
"""
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .adc import QuantizerSpec, dequantize, quantize_codes
from .analog_chain import fold_decompose
from .exceptions import ParameterError
from .metrics import lambda_rule
from .recovery import RecoveryConfig, unwrap_detailed
from .signal_core import SampleSequence, brickwall


def _rows(X):
    return check_array(X, dtype=float, ensure_2d=True)


class ModuloSampler(TransformerMixin, BaseEstimator):
    """Centred modulo of every sample.

    With ``lam=None`` the threshold is learned from the training peak through
    the lambda rule at oversampling factor ``of``.
    """

    def __init__(self, lam=None, of=10.0):
        self.lam = lam
        self.of = of

    def fit(self, X, y=None):
        X = _rows(X)
        if self.lam is None:
            self.lam_ = lambda_rule(float(np.max(np.abs(X))), self.of)
            if self.lam_ == 0:
                raise ParameterError("cannot learn lambda from an all-zero input")
        else:
            self.lam_ = float(self.lam)
            if not self.lam_ > 0:
                raise ParameterError(f"lam must be positive, got {self.lam}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "lam_")
        return fold_decompose(_rows(X), self.lam_)[0]

    def fold_counts(self, X):
        """Integer fold counts ``k`` with ``X = transform(X) + 2*lam*k``."""
        check_is_fitted(self, "lam_")
        return fold_decompose(_rows(X), self.lam_)[1]


class UniformQuantizer(TransformerMixin, BaseEstimator):
    """Mid-tread quantize-and-dequantize; ``half_range=None`` learns the training peak."""

    def __init__(self, bits=8, half_range=None):
        self.bits = bits
        self.half_range = half_range

    def fit(self, X, y=None):
        X = _rows(X)
        half = float(np.max(np.abs(X))) if self.half_range is None else self.half_range
        self.spec_ = QuantizerSpec(self.bits, half)
        self.half_range_ = self.spec_.half_range
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        codes, _ = quantize_codes(_rows(X), self.spec_)
        return dequantize(codes, self.spec_)


class ModuloUnwrapper(TransformerMixin, BaseEstimator):
    """Itoh first-difference unwrapping of each row.

    Rows carry no fold flags, so only the ungated mode is available here; use
    :func:`modsamp.recovery.unwrap` for extra-bit gating.
    """

    def __init__(self, lam=1.0, max_folds_per_step=4):
        self.lam = lam
        self.max_folds_per_step = max_folds_per_step

    def fit(self, X, y=None):
        X = _rows(X)
        self.config_ = RecoveryConfig(self.lam, "itoh", max_folds_per_step=self.max_folds_per_step)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = _rows(X)
        out = np.empty_like(X)
        for i, row in enumerate(X):
            out[i] = unwrap_detailed(SampleSequence(row, 1.0), None, self.config_).samples.values
        return out


class SpectralLowpass(TransformerMixin, BaseEstimator):
    """Brick-wall low-pass of each row sampled every ``period`` seconds.

    ``cutoff`` is in rad/s; ``None`` means ``pi / (of * period)``, the band
    edge of a signal oversampled by ``of``.
    """

    def __init__(self, period=1.0, cutoff=None, of=None):
        self.period = period
        self.cutoff = cutoff
        self.of = of

    def fit(self, X, y=None):
        X = _rows(X)
        if self.cutoff is not None:
            self.cutoff_ = float(self.cutoff)
        elif self.of is not None:
            self.cutoff_ = math.pi / (self.of * self.period)
        else:
            raise ParameterError("give either cutoff or of")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "cutoff_")
        X = _rows(X)
        return np.vstack([brickwall(row, self.period, self.cutoff_) for row in X])
