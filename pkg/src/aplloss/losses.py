"""BCE, truncated Taylor-BCE and the Asymmetric Polynomial Loss (APL).

All losses take ``(batch, classes)`` arrays and reduce by the mean over
every entry. Gradients are returned with respect to the logits.

The APL per-entry terms are

    positive:  (1-p)^g+ * [-log p + (a1-1)(1-p) + (a2-1/2)(1-p)^2]
    negative:  r^g- * [-log(1-r) + (b1-1) r],    r = max(p - p_th, 0)

which are the closed forms of the series

    positive:  sum_m alpha_m (1-p)^(m+g+)     alpha = (a1, a2, 1/3, 1/4, ...)
    negative:  sum_n beta_n  r^(n+g-)         beta  = (b1, 1/2, 1/3, ...)

ASL is the special case ``alpha1=1, alpha2=0.5, beta1=1``; BCE additionally
sets both focusing exponents and the threshold to zero.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

EPS = 1e-12
# logits beyond this saturate the probability clamp
LOGIT_CLIP = float(np.log((1.0 - EPS) / EPS))


class InvalidInputError(ValueError):
    """Raised for non-finite logits, non-binary labels or mismatched shapes."""


@dataclass(frozen=True)
class APLParams:
    """Hyperparameters of the loss family.

    The defaults reproduce plain BCE.
    """

    alpha1: float = 1.0
    alpha2: float = 0.5
    beta1: float = 1.0
    gamma_plus: float = 0.0
    gamma_minus: float = 0.0
    p_th: float = 0.0
    trunc_order: int = 200

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta1", "gamma_plus", "gamma_minus", "p_th"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")
        if not self.p_th < 1:
            raise ValueError(f"p_th must be < 1, got {self.p_th!r}")
        if isinstance(self.trunc_order, bool) or int(self.trunc_order) != self.trunc_order:
            raise ValueError(f"trunc_order must be an integer, got {self.trunc_order!r}")
        if self.trunc_order < 1:
            raise ValueError(f"trunc_order must be >= 1, got {self.trunc_order!r}")
        object.__setattr__(self, "trunc_order", int(self.trunc_order))

    @classmethod
    def bce(cls) -> APLParams:
        return cls()

    @classmethod
    def asl(cls, gamma_plus=0.0, gamma_minus=4.0, p_th=0.05) -> APLParams:
        return cls(gamma_plus=gamma_plus, gamma_minus=gamma_minus, p_th=p_th)

    @classmethod
    def from_dict(cls, data: dict) -> APLParams:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown APLParams field(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> APLParams:
        return APLParams(**{**self.to_dict(), **changes})


class LossOutput(NamedTuple):
    value: float
    grad: np.ndarray


def _as_logits(logits) -> np.ndarray:
    arr = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logits must be finite")
    return arr


def _as_labels(labels, shape) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != shape:
        raise InvalidInputError(f"labels shape {y.shape} does not match predictions {shape}")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInputError("labels must be exactly 0 or 1")
    return y.astype(bool)


def _as_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidInputError("probabilities must lie in [0, 1]")
    return np.clip(p, EPS, 1.0 - EPS)


def _logistic(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, EPS, 1.0 - EPS)


def sigmoid(logits) -> np.ndarray:
    """Stable logistic function, clamped to ``[1e-12, 1 - 1e-12]``."""
    return _logistic(_as_logits(logits))


def shift_probability(p, p_th):
    """Shifted probability ``max(p - p_th, 0)`` used by the negative branch."""
    if not 0 <= p_th < 1:
        raise ValueError(f"p_th must lie in [0, 1), got {p_th!r}")
    return np.maximum(np.asarray(p, dtype=np.float64) - p_th, 0.0)


def _pow(base, exponent):
    # numpy already gives 0**0 == 1 and 0**g == 0 for g > 0
    return np.power(base, exponent)


def bce(probs, labels) -> LossOutput:
    """Mean binary cross-entropy; the gradient is w.r.t. the logits (``p - y``)."""
    p = _as_probs(probs)
    y = _as_labels(labels, p.shape)
    terms = np.where(y, -np.log(p), -np.log1p(-p))
    grad = (p - y) / p.size
    return LossOutput(float(terms.mean()), grad)


def bce_with_logits(logits, labels) -> LossOutput:
    """:func:`bce` evaluated from logits through softplus.

    Keeps full precision where ``1 - p`` would cancel (large logits), which
    the probability form cannot recover once ``p`` has been rounded.
    """
    x = _as_logits(logits)
    y = _as_labels(labels, x.shape)
    x = np.clip(x, -LOGIT_CLIP, LOGIT_CLIP)
    terms = _softplus(np.where(y, -x, x))
    grad = (_logistic(x) - y) / x.size
    return LossOutput(float(terms.mean()), grad)


def taylor_bce(probs, labels, trunc_order: int) -> float:
    """BCE with each logarithm replaced by its first ``trunc_order`` Taylor terms."""
    if trunc_order < 1:
        raise ValueError(f"trunc_order must be >= 1, got {trunc_order!r}")
    p = _as_probs(probs)
    y = _as_labels(labels, p.shape)
    base = np.where(y, 1.0 - p, p)
    total = np.zeros_like(base)
    power = np.ones_like(base)
    for m in range(1, trunc_order + 1):
        power = power * base
        total += power / m
    return float(total.mean())


def _softplus(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _positive_terms(p, q, params: APLParams, neglog_p=None):
    """Per-entry positive loss and its derivative w.r.t. ``p``; ``q = 1 - p``."""
    a = params.alpha1 - 1.0
    b = params.alpha2 - 0.5
    g = params.gamma_plus
    if neglog_p is None:
        neglog_p = -np.log(p)
    inner = neglog_p + a * q + b * q * q
    inner_dp = -1.0 / p - a - 2.0 * b * q
    loss = _pow(q, g) * inner
    if g == 0:
        dloss = inner_dp
    else:
        # d/dp q^g * inner = q^(g-1) * (q * inner' - g * inner); q >= EPS after clamping
        dloss = _pow(q, g - 1.0) * (q * inner_dp - g * inner)
    return loss, dloss


def _neglog1m_over(r):
    """``-log(1-r)/r`` with its limit 1 at ``r = 0``."""
    out = np.ones_like(r)
    nz = r > 0
    out[nz] = -np.log1p(-r[nz]) / r[nz]
    return out


def _negative_terms(p, q, params: APLParams, neglog_q=None):
    """Per-entry negative loss and its derivative w.r.t. ``p``; ``q = 1 - p``.

    ``neglog_q`` (``-log q``) may be supplied when it is known more
    accurately than ``-log(q)``; it is only used when ``p_th == 0``.
    """
    active = p > params.p_th
    r = np.where(active, p - params.p_th, 0.0)
    # 1 - r formed from q keeps precision when p is close to 1
    one_minus_r = np.where(active, q + params.p_th, 1.0)
    c = params.beta1 - 1.0
    g = params.gamma_minus
    if params.p_th == 0 and neglog_q is not None:
        neglog = neglog_q
    else:
        small = r < 0.5
        neglog = np.where(small, -np.log1p(-np.where(small, r, 0.0)), -np.log(one_minus_r))
    rg = _pow(r, g)
    loss = rg * (neglog + c * r)
    # r^g [1/(1-r) + c] + g r^(g-1) [-log(1-r) + c r]
    #   = r^g [1/(1-r) - g log(1-r)/r + c (g+1)]
    neglog_over_r = np.ones_like(r)
    np.divide(neglog, r, out=neglog_over_r, where=active)
    bracket = 1.0 / one_minus_r + g * neglog_over_r + c * (g + 1.0)
    dloss = np.where(active, rg * bracket, 0.0)
    loss = np.where(active, loss, 0.0)
    return loss, dloss


def apl_elementwise(logits, labels, params: APLParams) -> tuple[np.ndarray, np.ndarray]:
    """Unreduced APL: per-entry loss and per-entry derivative w.r.t. the logit."""
    x = _as_logits(logits)
    y = _as_labels(labels, x.shape)
    x = np.clip(x, -LOGIT_CLIP, LOGIT_CLIP)
    p = _logistic(x)
    q = _logistic(-x)
    lpos, dpos = _positive_terms(p, q, params, neglog_p=_softplus(-x))
    lneg, dneg = _negative_terms(p, q, params, neglog_q=_softplus(x))
    loss = np.where(y, lpos, lneg)
    dp_dl = p * q
    grad = np.where(y, dpos, dneg) * dp_dl
    return loss, grad


def apl_forward_backward(logits, labels, params: APLParams) -> LossOutput:
    """Mean APL over all entries and its gradient w.r.t. ``logits``.

    >>> round(apl_forward_backward([[0.0]], [[1]], APLParams()).value, 6)
    0.693147
    """
    loss, grad = apl_elementwise(logits, labels, params)
    return LossOutput(float(loss.mean()), grad / loss.size)


def alpha_coefficients(params: APLParams, order: int | None = None) -> np.ndarray:
    """Series coefficients ``alpha_1..alpha_M`` of the positive branch."""
    m = np.arange(1, (order or params.trunc_order) + 1, dtype=np.float64)
    coeffs = 1.0 / m
    coeffs[0] = params.alpha1
    if coeffs.size > 1:
        coeffs[1] = params.alpha2
    return coeffs


def beta_coefficients(params: APLParams, order: int | None = None) -> np.ndarray:
    """Series coefficients ``beta_1..beta_M`` of the negative branch."""
    n = np.arange(1, (order or params.trunc_order) + 1, dtype=np.float64)
    coeffs = 1.0 / n
    coeffs[0] = params.beta1
    return coeffs


def apl_series_elementwise(probs, labels, params: APLParams) -> np.ndarray:
    """Per-entry APL from the truncated series (``params.trunc_order`` terms).

    Serves as a consistency check on the closed form; it never touches a log.
    """
    p = _as_probs(probs)
    y = _as_labels(labels, p.shape)
    order = params.trunc_order
    q = 1.0 - p
    r = np.maximum(p - params.p_th, 0.0)
    exps = np.arange(1, order + 1, dtype=np.float64)
    pos = (alpha_coefficients(params) * _pow(q[..., None], exps + params.gamma_plus)).sum(-1)
    neg = (beta_coefficients(params) * _pow(r[..., None], exps + params.gamma_minus)).sum(-1)
    return np.where(y, pos, neg)


def apl_series_forward(probs, labels, params: APLParams) -> float:
    """Mean of :func:`apl_series_elementwise`."""
    return float(apl_series_elementwise(probs, labels, params).mean())
