"""Loss families for ordinal heads: target encodings, loss values, and
analytic gradients with respect to the raw head outputs.

Nine families are implemented. Five of them score a categorical
distribution over the labels (cross-entropy, two soft-target variants, a
mean-variance penalty, a unimodality penalty), two reduce the problem to
binary threshold classifiers (independent or with a shared consistency
score), one regresses a normalized scalar, and the remaining soft-target
variant adds an expectation anchor. Every loss returns LossEval(value,
grad) where grad matches the head output vector elementwise; gradients are
what the trainer backpropagates, so each formula here is paired with a
finite-difference check in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import LabelSet

__all__ = [
    "FAMILIES",
    "DISTRIBUTION_FAMILIES",
    "THRESHOLD_FAMILIES",
    "MethodConfig",
    "LossEval",
    "TargetDistribution",
    "softmax",
    "log_softmax",
    "sigmoid",
    "ce_loss",
    "l1_regression_loss",
    "ebc_encode",
    "ebc_loss",
    "coral_scores",
    "one_hot_target",
    "dldl_target",
    "sord_target",
    "soft_ce_loss",
    "dldlv2_loss",
    "meanvar_loss",
    "unimodal_penalty",
    "unimodal_loss",
    "expectation",
    "variance",
    "loss_eval",
]

FAMILIES = (
    "cross-entropy",
    "regression",
    "or-cnn",
    "coral",
    "dldl",
    "dldl-v2",
    "sord",
    "mean-variance",
    "unimodal",
)
# Families whose head parameterizes a softmax over the K labels.
DISTRIBUTION_FAMILIES = ("cross-entropy", "dldl", "dldl-v2", "sord", "mean-variance", "unimodal")
# Families whose head parameterizes K-1 binary threshold scores.
THRESHOLD_FAMILIES = ("or-cnn", "coral")


@dataclass(frozen=True)
class MethodConfig:
    """One compared method: a loss family plus its hyperparameters.

    The defaults below are the settings used throughout the bundled
    experiments; they are deliberate choices of this toolkit, not tuned
    per dataset.
    """

    family: str
    sigma: float = 1.0          # dldl / dldl-v2 target width, in label units
    alpha: float = 1.0          # sord decay rate, in label units
    lambda_expect: float = 1.0  # dldl-v2 expectation anchor weight
    lambda_mean: float = 0.2    # mean-variance squared-mean weight
    lambda_var: float = 0.05    # mean-variance variance weight
    lambda_uni: float = 1.0     # unimodality hinge weight
    name: Optional[str] = None  # display name; defaults to the family

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown method family {self.family!r}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        for attr in ("lambda_expect", "lambda_mean", "lambda_var", "lambda_uni"):
            if getattr(self, attr) < 0:
                raise ValueError(f"{attr} must be non-negative")

    @property
    def display_name(self) -> str:
        return self.name if self.name else self.family

    def head_size(self, n_labels: int) -> int:
        """Width of the model head this family expects for K labels."""
        if n_labels < 1:
            raise ValueError("n_labels must be >= 1")
        if self.family in DISTRIBUTION_FAMILIES:
            return n_labels
        if self.family in THRESHOLD_FAMILIES:
            if n_labels < 2:
                raise ValueError(f"{self.family} needs at least 2 labels")
            return n_labels - 1
        return 1

    def to_dict(self) -> dict:
        out: dict = {"family": self.family}
        if self.name:
            out["name"] = self.name
        defaults = MethodConfig(family=self.family)
        for attr in ("sigma", "alpha", "lambda_expect", "lambda_mean", "lambda_var", "lambda_uni"):
            if getattr(self, attr) != getattr(defaults, attr):
                out[attr] = getattr(self, attr)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "MethodConfig":
        allowed = {
            "family", "sigma", "alpha", "lambda_expect",
            "lambda_mean", "lambda_var", "lambda_uni", "name",
        }
        unknown = set(payload) - allowed
        if unknown:
            raise ValueError(f"unknown method option(s): {sorted(unknown)}")
        if "family" not in payload:
            raise ValueError("method entry needs a 'family'")
        return cls(**payload)


@dataclass
class LossEval:
    """A loss value and its gradient with respect to the head outputs."""

    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class TargetDistribution:
    """A normalized soft label over the label set."""

    probs: np.ndarray
    origin: str
    param: Optional[float] = None

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) < 1:
            raise ValueError("target must be a 1-d probability vector")
        if np.any(p < 0):
            raise ValueError("target has negative mass")
        s = p.sum()
        if not np.isfinite(s) or s <= 0:
            raise ValueError("target mass must be positive and finite")
        p = p / s
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)


def _as_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1 or len(z) < 1:
        raise ValueError("logits must be a non-empty 1-d vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax of a logit vector."""
    z = _as_logits(logits)
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def log_softmax(logits) -> np.ndarray:
    z = _as_logits(logits)
    shifted = z - z.max()
    return shifted - np.log(np.exp(shifted).sum())


def _logsumexp(z: np.ndarray) -> float:
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def sigmoid(x):
    """Elementwise logistic function, stable for large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_index(index: int, n: int) -> int:
    index = int(index)
    if not 0 <= index < n:
        raise IndexError(f"label index {index} out of range for {n} labels")
    return index


def ce_loss(logits, true_index: int) -> LossEval:
    """Categorical cross-entropy on softmax probabilities."""
    z = _as_logits(logits)
    t = _check_index(true_index, len(z))
    value = _logsumexp(z) - z[t]
    grad = softmax(z)
    grad[t] -= 1.0
    return LossEval(value=float(value), grad=grad)


def l1_regression_loss(output: float, target: float) -> LossEval:
    """Absolute error of a scalar head against a (normalized) target age.

    The gradient is the sign of the residual; at zero residual the
    subgradient 0 is returned.
    """
    diff = float(output) - float(target)
    return LossEval(value=abs(diff), grad=np.array([float(np.sign(diff))]))


def ebc_encode(true_index: int, n_labels: int) -> np.ndarray:
    """Extended binary targets: entry k answers "is the label above rank k?"."""
    if n_labels < 2:
        raise ValueError("threshold encoding needs at least 2 labels")
    t = _check_index(true_index, n_labels)
    return (t > np.arange(n_labels - 1)).astype(float)


def _bce_with_logits(z: np.ndarray, t: np.ndarray) -> np.ndarray:
    # max(z,0) - z*t + log1p(exp(-|z|)) is exact and never overflows
    return np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))


def ebc_loss(head_logits, targets) -> LossEval:
    """Sum of binary cross-entropies over the K-1 threshold subproblems."""
    z = _as_logits(head_logits)
    t = np.asarray(targets, dtype=float)
    if t.shape != z.shape:
        raise ValueError(f"targets shape {t.shape} != logits shape {z.shape}")
    if np.any((t < 0) | (t > 1)):
        raise ValueError("threshold targets must lie in [0, 1]")
    value = float(_bce_with_logits(z, t).sum())
    grad = sigmoid(z) - t
    return LossEval(value=value, grad=grad)


def coral_scores(shared_score: float, biases) -> np.ndarray:
    """Threshold probabilities from one shared score and per-threshold biases.

    Because every threshold shares the same score, the resulting
    probabilities are ordered exactly like the biases, which makes the
    decoded rank consistent by construction.
    """
    b = np.asarray(biases, dtype=float)
    if b.ndim != 1 or len(b) < 1:
        raise ValueError("biases must be a non-empty 1-d vector")
    return sigmoid(float(shared_score) + b)


def one_hot_target(true_index: int, n_labels: int) -> TargetDistribution:
    t = _check_index(true_index, n_labels)
    p = np.zeros(n_labels)
    p[t] = 1.0
    return TargetDistribution(probs=p, origin="one-hot")


def dldl_target(true_index: int, label_set: LabelSet, sigma: float) -> TargetDistribution:
    """Discretized normal target centred on the true label (width sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = label_set.as_array()
    t = _check_index(true_index, len(y))
    expo = -((y - y[t]) ** 2) / (2.0 * sigma * sigma)
    w = np.exp(expo - expo.max())
    return TargetDistribution(probs=w, origin="normal", param=float(sigma))


def sord_target(true_index: int, label_set: LabelSet, alpha: float) -> TargetDistribution:
    """Double-exponential target decaying with label distance (rate alpha)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    y = label_set.as_array()
    t = _check_index(true_index, len(y))
    expo = -alpha * np.abs(y - y[t])
    w = np.exp(expo - expo.max())
    return TargetDistribution(probs=w, origin="double-exponential", param=float(alpha))


def _target_probs(target) -> np.ndarray:
    return np.asarray(getattr(target, "probs", target), dtype=float)


def soft_ce_loss(logits, target) -> LossEval:
    """Cross-entropy against a soft target distribution."""
    z = _as_logits(logits)
    q = _target_probs(target)
    if q.shape != z.shape:
        raise ValueError(f"target shape {q.shape} != logits shape {z.shape}")
    value = _logsumexp(z) - float(q @ z)
    grad = softmax(z) - q
    return LossEval(value=float(value), grad=grad)


def expectation(probs, label_set: LabelSet) -> float:
    """Mean label value under a posterior."""
    p = np.asarray(probs, dtype=float)
    y = label_set.as_array()
    if p.shape != y.shape:
        raise ValueError(f"posterior length {p.shape} != label count {y.shape}")
    return float(p @ y)


def variance(probs, label_set: LabelSet) -> float:
    p = np.asarray(probs, dtype=float)
    y = label_set.as_array()
    if p.shape != y.shape:
        raise ValueError(f"posterior length {p.shape} != label count {y.shape}")
    mu = float(p @ y)
    return float(p @ (y - mu) ** 2)


def dldlv2_loss(logits, target, label_set: LabelSet, true_age: float,
                lambda_expect: float = 1.0) -> LossEval:
    """Soft cross-entropy plus an absolute anchor on the expected label.

    The anchor term |E[label] - age| couples the whole distribution to the
    scalar prediction it implies; its subgradient at a zero residual is 0.
    """
    base = soft_ce_loss(logits, target)
    p = softmax(logits)
    y = label_set.as_array()
    if len(y) != len(p):
        raise ValueError("label set does not match logits length")
    e = float(p @ y)
    diff = e - float(true_age)
    value = base.value + lambda_expect * abs(diff)
    grad = base.grad + lambda_expect * float(np.sign(diff)) * p * (y - e)
    return LossEval(value=float(value), grad=grad)


def meanvar_loss(logits, true_index: int, label_set: LabelSet,
                 lambda_mean: float = 0.2, lambda_var: float = 0.05) -> LossEval:
    """Cross-entropy plus squared-mean and variance penalties.

    value = ce + (lambda_mean / 2) (E[label] - y)^2 + lambda_var Var[label].
    Both penalty gradients flow analytically through the softmax.
    """
    z = _as_logits(logits)
    y = label_set.as_array()
    if len(y) != len(z):
        raise ValueError("label set does not match logits length")
    t = _check_index(true_index, len(z))
    p = softmax(z)
    e = float(p @ y)
    var = float(p @ (y - e) ** 2)
    y_true = y[t]

    value = (_logsumexp(z) - z[t]) + 0.5 * lambda_mean * (e - y_true) ** 2 + lambda_var * var
    d_e = p * (y - e)                  # gradient of E[label] wrt logits
    d_var = p * ((y - e) ** 2 - var)   # gradient of Var[label] wrt logits
    grad = p.copy()
    grad[t] -= 1.0
    grad += lambda_mean * (e - y_true) * d_e + lambda_var * d_var
    return LossEval(value=float(value), grad=grad)


def unimodal_penalty(probs, mode_index: int) -> float:
    """Total hinge violation of unimodality around the given mode.

    Mass must be non-decreasing up to the mode and non-increasing after it;
    every adjacent pair violating that contributes its gap.
    """
    p = np.asarray(probs, dtype=float)
    t = _check_index(mode_index, len(p))
    rising = p[:-1] - p[1:]   # positive where mass drops moving right
    total = 0.0
    if t > 0:
        total += float(np.maximum(rising[:t], 0.0).sum())
    if t < len(p) - 1:
        total += float(np.maximum(-rising[t:], 0.0).sum())
    return total


def unimodal_loss(logits, true_index: int, lambda_uni: float = 1.0) -> LossEval:
    """Cross-entropy plus a hinge penalty on non-unimodal posteriors.

    The penalty is piecewise linear in the probabilities, so the returned
    gradient is a subgradient; at points where a hinge is exactly zero the
    inactive branch is used.
    """
    z = _as_logits(logits)
    t = _check_index(true_index, len(z))
    p = softmax(z)
    K = len(p)

    g = np.zeros(K)  # d(penalty)/d(probs)
    penalty = 0.0
    for k in range(t):
        gap = p[k] - p[k + 1]
        if gap > 0:
            penalty += gap
            g[k] += 1.0
            g[k + 1] -= 1.0
    for k in range(t, K - 1):
        gap = p[k + 1] - p[k]
        if gap > 0:
            penalty += gap
            g[k + 1] += 1.0
            g[k] -= 1.0

    value = (_logsumexp(z) - z[t]) + lambda_uni * penalty
    grad = p.copy()
    grad[t] -= 1.0
    grad += lambda_uni * p * (g - float(p @ g))  # softmax Jacobian applied to g
    return LossEval(value=float(value), grad=grad)


def loss_eval(config: MethodConfig, head_out, age: float, label_set: LabelSet) -> LossEval:
    """Evaluate one sample's loss for any family, given raw head outputs.

    For regression the target is the age normalized to [0, 1] over the label
    range; for every other family the integer label index is used.
    """
    family = config.family
    if family == "regression":
        out = np.asarray(head_out, dtype=float).reshape(-1)
        if len(out) != 1:
            raise ValueError("regression head must produce exactly 1 output")
        return l1_regression_loss(float(out[0]), label_set.normalize(age))

    true_index = label_set.index_of(int(age))
    if family == "cross-entropy":
        return ce_loss(head_out, true_index)
    if family in THRESHOLD_FAMILIES:
        targets = ebc_encode(true_index, len(label_set))
        return ebc_loss(head_out, targets)
    if family == "dldl":
        return soft_ce_loss(head_out, dldl_target(true_index, label_set, config.sigma))
    if family == "sord":
        return soft_ce_loss(head_out, sord_target(true_index, label_set, config.alpha))
    if family == "dldl-v2":
        target = dldl_target(true_index, label_set, config.sigma)
        return dldlv2_loss(head_out, target, label_set, float(age), config.lambda_expect)
    if family == "mean-variance":
        return meanvar_loss(head_out, true_index, label_set, config.lambda_mean, config.lambda_var)
    if family == "unimodal":
        return unimodal_loss(head_out, true_index, config.lambda_uni)
    raise ValueError(f"unknown method family {family!r}")
