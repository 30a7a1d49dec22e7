"""Decision layer: turn head outputs into a single predicted age.

For distribution heads the decoder is the minimizer of the expected
absolute error under the posterior, which is a weighted median of the
labels. A brute-force scan over all candidate labels is kept alongside as
an independent oracle; the two must agree everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import LabelSet
from .methods import THRESHOLD_FAMILIES, MethodConfig, sigmoid, softmax

__all__ = [
    "Prediction",
    "bayes_mae_predict",
    "brute_force_bayes",
    "ebc_decode",
    "regression_decode",
    "decode_output",
]

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Prediction:
    """A predicted age in years; label_index is None for continuous outputs."""

    age: float
    label_index: Optional[int]


def _as_posterior(probs, n_labels: int) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.shape != (n_labels,):
        raise ValueError(f"posterior length {p.shape} does not match {n_labels} labels")
    if np.any(p < -1e-12):
        raise ValueError("posterior has negative mass")
    if abs(p.sum() - 1.0) > _SUM_TOL:
        raise ValueError(f"posterior mass {p.sum()!r} is not normalized")
    return np.clip(p, 0.0, None)


def bayes_mae_predict(probs, label_set: LabelSet) -> Prediction:
    """Label minimizing the expected absolute error under the posterior.

    This is the lower weighted median: the smallest label whose cumulative
    mass reaches one half. Ties at exactly one half resolve to the smaller
    label.
    """
    p = _as_posterior(probs, len(label_set))
    cum = np.cumsum(p)
    idx = int(np.searchsorted(cum, 0.5, side="left"))
    idx = min(idx, len(label_set) - 1)
    return Prediction(age=float(label_set.values[idx]), label_index=idx)


def brute_force_bayes(probs, label_set: LabelSet) -> Prediction:
    """Oracle twin of bayes_mae_predict: scan every candidate label.

    Evaluates the expected absolute error of predicting each label and takes
    the smallest argmin. Quadratic in K, kept for verification.
    """
    p = _as_posterior(probs, len(label_set))
    y = label_set.as_array()
    risks = np.abs(y[:, None] - y[None, :]) @ p
    idx = int(np.argmin(risks))  # first minimum = smallest label
    return Prediction(age=float(label_set.values[idx]), label_index=idx)


def ebc_decode(threshold_probs, label_set: LabelSet) -> Prediction:
    """Rank decoding for threshold heads: count thresholds voting "above"."""
    q = np.asarray(threshold_probs, dtype=float)
    if q.shape != (len(label_set) - 1,):
        raise ValueError(
            f"expected {len(label_set) - 1} threshold probabilities, got shape {q.shape}"
        )
    if np.any((q < -1e-12) | (q > 1 + 1e-12)):
        raise ValueError("threshold probabilities must lie in [0, 1]")
    idx = int(np.sum(q > 0.5))
    return Prediction(age=float(label_set.values[idx]), label_index=idx)


def regression_decode(raw_output: float, label_set: LabelSet) -> Prediction:
    """Map a normalized scalar back to years, clamped to the label range."""
    age = label_set.denormalize(float(raw_output))
    age = float(np.clip(age, label_set.min_label, label_set.max_label))
    return Prediction(age=age, label_index=None)


def decode_output(config: MethodConfig, head_out, label_set: LabelSet) -> Prediction:
    """Dispatch a raw head output vector to the family's decoder."""
    out = np.asarray(head_out, dtype=float).reshape(-1)
    if config.family == "regression":
        if len(out) != 1:
            raise ValueError("regression head must produce exactly 1 output")
        return regression_decode(float(out[0]), label_set)
    if config.family in THRESHOLD_FAMILIES:
        return ebc_decode(sigmoid(out), label_set)
    return bayes_mae_predict(softmax(out), label_set)
