"""scikit-learn compatible wrappers.

These let the feature extractor, the template encoder and the Hamming
matcher sit inside a :class:`sklearn.pipeline.Pipeline` and be tuned with the
usual ``get_params``/``set_params`` machinery. Bit templates travel as
``uint8`` arrays of shape ``(n_samples, n_bits)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .biometric import BiometricSample, feature_bits
from .bitcodec import BitString
from .eval_metrics import ScoreSet, eer, far, frr
from .tier_cipher import PipelineConfig, encrypt_password, template_from_bits

__all__ = [
    "FeatureBitsExtractor",
    "ThreeTierEncoder",
    "FusedTemplateEncoder",
    "HammingVerifier",
    "check_bit_matrix",
]


def check_bit_matrix(X, n_bits: int | None = None) -> np.ndarray:
    """Validate a 2-D 0/1 matrix and return it as ``uint8``."""
    X = check_array(X, dtype=None, ensure_2d=True)
    if not np.isin(X, (0, 1)).all():
        raise ValueError("bit matrix may only contain 0 and 1")
    if n_bits is not None and X.shape[1] != n_bits:
        raise ValueError(f"expected {n_bits} bits per row, got {X.shape[1]}")
    return X.astype(np.uint8, copy=False)


def _bits_to_row(bits: BitString) -> np.ndarray:
    return np.frombuffer(bits.bits.encode("ascii"), dtype=np.uint8) - ord("0")


def _row_to_bits(row) -> BitString:
    return BitString("".join("1" if v else "0" for v in row))


class FeatureBitsExtractor(TransformerMixin, BaseEstimator):
    """Map raw sample blobs (bytes, or BiometricSample) to fixed-length bit rows."""

    def __init__(self, length: int = 256, modality: str = "fingerprint"):
        self.length = length
        self.modality = modality

    def fit(self, X, y=None):
        self.n_features_out_ = self.length
        return self

    def transform(self, X):
        rows = []
        for item in X:
            sample = item if isinstance(item, BiometricSample) else BiometricSample(self.modality, bytes(item))
            rows.append(_bits_to_row(feature_bits(sample, self.length).bits))
        return np.vstack(rows) if rows else np.zeros((0, self.length), dtype=np.uint8)


class ThreeTierEncoder(TransformerMixin, BaseEstimator):
    """Password strings to templates, one salt per row (or a shared salt).

    ``transform`` returns an object array of Python ints so no precision is
    lost; :meth:`trace` exposes the full stage trace.
    """

    def __init__(self, salt: int = 1, e=None, salt_combine_mode="multiply", radix=2, series_terms=3):
        self.salt = salt
        self.e = e
        self.salt_combine_mode = salt_combine_mode
        self.radix = radix
        self.series_terms = series_terms

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            e=self.e,
            salt_combine_mode=self.salt_combine_mode,
            radix=self.radix,
            series_terms=self.series_terms,
        )

    def fit(self, X, y=None):
        self.config_ = self._config()
        return self

    def _salts(self, n, salts):
        if salts is None:
            return [self.salt] * n
        salts = list(salts)
        if len(salts) != n:
            raise ValueError("need one salt per password")
        return salts

    def trace(self, X, salts=None):
        check_is_fitted(self, "config_")
        X = list(X)
        return [encrypt_password(p, s, self.config_) for p, s in zip(X, self._salts(len(X), salts))]

    def transform(self, X, salts=None):
        return np.array([t.template for t in self.trace(X, salts)], dtype=object)


class FusedTemplateEncoder(TransformerMixin, BaseEstimator):
    """Bit rows (already fused) to templates via substitution and the sine series."""

    def __init__(self, series_terms: int = 3):
        self.series_terms = series_terms

    def fit(self, X, y=None):
        self.config_ = PipelineConfig(series_terms=self.series_terms)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_bit_matrix(X)
        return np.array([template_from_bits(_row_to_bits(r), self.config_)[1] for r in X], dtype=object)


class HammingVerifier(ClassifierMixin, BaseEstimator):
    """Nearest-reference Hamming matcher with an acceptance threshold.

    ``fit`` stores the reference rows and their identity labels.
    ``predict`` returns the closest identity, or ``reject_label`` when no
    reference is within ``tau``.
    """

    def __init__(self, tau: float = 0.15, reject_label=None):
        self.tau = tau
        self.reject_label = reject_label

    def fit(self, X, y):
        X = check_bit_matrix(X)
        y = np.asarray(y)
        if len(y) != len(X):
            raise ValueError("X and y have different lengths")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        self.references_ = X
        self.labels_ = y
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        """Normalized distance from each probe row to each reference row."""
        check_is_fitted(self, "references_")
        X = check_bit_matrix(X, self.n_features_in_)
        return (X[:, None, :] != self.references_[None, :, :]).mean(axis=2)

    def decision_function(self, X) -> np.ndarray:
        """Smallest distance to any reference (lower is a better match)."""
        return self.transform(X).min(axis=1)

    def predict(self, X):
        D = self.transform(X)
        best = D.argmin(axis=1)
        out = self.labels_[best].astype(object)
        out[D[np.arange(len(D)), best] > self.tau] = self.reject_label
        return out

    def verify(self, X, claimed) -> np.ndarray:
        """Accept each probe iff some reference of its claimed identity is within tau."""
        D = self.transform(X)
        claimed = np.asarray(claimed)
        mask = self.labels_[None, :] == claimed[:, None]
        masked = np.where(mask, D, np.inf)
        return masked.min(axis=1) <= self.tau

    def score_set(self, X, claimed) -> ScoreSet:
        """Genuine/impostor distance sets for probes labelled with their true identity."""
        D = self.transform(X)
        claimed = np.asarray(claimed)
        same = self.labels_[None, :] == claimed[:, None]
        return ScoreSet(tuple(D[same].tolist()), tuple(D[~same].tolist()))

    def error_rates(self, X, claimed) -> dict:
        s = self.score_set(X, claimed)
        tau_star, e = eer(s)
        return {"far": far(s, self.tau), "frr": frr(s, self.tau), "eer": e, "eer_threshold": tau_star}
