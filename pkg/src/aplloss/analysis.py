"""Gradient curves, the mislabelling critical point and coefficient interactions."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .losses import APLParams, alpha_coefficients, _negative_terms, _neglog1m_over, _positive_terms

SCAN_POINTS = 10_000
SCAN_MARGIN = 1e-6
BISECT_TOL = 1e-10

FIGURES = ("poly_coeffs", "lneg_curves", "lneg_gradients")
FIGURE_NUMBERS = {1: "poly_coeffs", 2: "lneg_curves", 3: "lneg_gradients"}


class NoCriticalPoint(ValueError):
    """The negative-branch logit gradient has no interior stationary point."""


@dataclass(frozen=True)
class CriticalPoint:
    p_star: float
    residual: float
    bracket: tuple[float, float]

    def to_dict(self) -> dict:
        return {"p_star": self.p_star, "residual": self.residual, "bracket": list(self.bracket)}


@dataclass
class CurveTable:
    grid: np.ndarray
    values: np.ndarray
    series_id: str
    params_used: APLParams


def positive_gradient(p, params: APLParams):
    """``-dL+/dp`` from the closed-form positive loss.

    With ``gamma_plus = 0`` this is ``alpha1 + 2 alpha2 (1-p) + (1-p)^2 / p``.
    """
    p = np.asarray(p, dtype=np.float64)
    _, dloss = _positive_terms(p, 1.0 - p, params)
    return -dloss


def negative_gradient_wrt_logit(p, params: APLParams):
    """``dL-/dl`` for a negative entry with probability ``p``; 0 in the dead zone."""
    p = np.asarray(p, dtype=np.float64)
    _, dloss = _negative_terms(p, 1.0 - p, params)
    return p * (1.0 - p) * dloss


def negative_gradient_slope(p, params: APLParams):
    """Analytic ``d/dp`` of :func:`negative_gradient_wrt_logit`, valid for ``p > p_th``.

    Writing the negative loss as ``r^g phi(r)`` with ``phi = -log(1-r) + c r``,
    the logit gradient is ``p(1-p) H(r)`` with ``H = d/dr [r^g phi]`` and

        H' = r^g [g(g-1) phi/r^2 + 2g phi'/r + phi'']
    """
    p = np.asarray(p, dtype=np.float64)
    r = p - params.p_th
    g = params.gamma_minus
    c = params.beta1 - 1.0
    phi_over_r = _neglog1m_over(r) + c
    dphi = 1.0 / (1.0 - r) + c
    d2phi = 1.0 / (1.0 - r) ** 2
    rg = np.power(r, g)
    h = rg * (g * phi_over_r + dphi)
    if g == 0:
        dh = rg * d2phi
    else:
        dh = rg * (g * (g - 1.0) * phi_over_r / r + 2.0 * g * dphi / r + d2phi)
    return (1.0 - 2.0 * p) * h + p * (1.0 - p) * dh


def find_pstar(params: APLParams) -> CriticalPoint:
    """Locate the peak of the negative-branch logit gradient.

    Scans the analytic slope on a uniform grid over ``(p_th, 1)`` for sign
    changes, then bisects the bracket with the largest ``p``.
    """
    lo, hi = params.p_th + SCAN_MARGIN, 1.0 - SCAN_MARGIN
    grid = np.linspace(lo, hi, SCAN_POINTS)
    slope = negative_gradient_slope(grid, params)
    sign = np.sign(slope)
    changes = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(slope == 0)[0]
    if exact.size and (not changes.size or grid[exact[-1]] > grid[changes[-1]]):
        p = float(grid[exact[-1]])
        return CriticalPoint(p, 0.0, (p, p))
    if not changes.size:
        raise NoCriticalPoint(
            f"negative gradient is monotone on ({lo:g}, {hi:g}) for {params}"
        )
    i = changes[-1]
    a, b = float(grid[i]), float(grid[i + 1])
    fa = float(slope[i])
    while b - a >= BISECT_TOL:
        mid = 0.5 * (a + b)
        fm = float(negative_gradient_slope(mid, params))
        if fm == 0:
            a = b = mid
            break
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    p_star = 0.5 * (a + b)
    residual = float(negative_gradient_slope(p_star, params))
    return CriticalPoint(p_star, residual, (a, b))


def interaction_terms(trunc_order: int) -> list[Fraction]:
    """Exact coefficients of ``(1-p)^2, (1-p)^3, ...`` in the interaction difference.

    Raising ``gamma_plus`` to 1 gives ``sum_i (1/i)(1-p)^(i+1)``; zeroing
    ``alpha1`` instead leaves ``sum_{i>=2} (1/i)(1-p)^i``. Entry ``j`` is the
    difference of their coefficients on ``(1-p)^(j+2)``.
    """
    if trunc_order < 2:
        raise ValueError("trunc_order must be >= 2")
    raised = {i + 1: Fraction(1, i) for i in range(1, trunc_order + 1)}
    dropped = {i: Fraction(1, i) for i in range(2, trunc_order + 2)}
    return [raised[k] - dropped[k] for k in range(2, trunc_order + 2)]


def interaction_difference(p, trunc_order: int = 200):
    """Truncated ``sum_{i=1}^{M} (1-p)^(i+1) / (i (i+1))``."""
    if trunc_order < 2:
        raise ValueError("trunc_order must be >= 2")
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("p must lie in (0, 1]")
    i = np.arange(1, trunc_order + 1, dtype=np.float64)
    coeffs = 1.0 / (i * (i + 1.0))
    q = (1.0 - p)[..., None]
    return (coeffs * np.power(q, i + 1.0)).sum(-1)


def default_grid(n: int = 512, lo: float = 0.001, hi: float = 0.999) -> np.ndarray:
    return np.linspace(lo, hi, n)


def series_label(params: APLParams) -> str:
    return (
        f"a1={params.alpha1:g};a2={params.alpha2:g};b1={params.beta1:g};"
        f"g+={params.gamma_plus:g};g-={params.gamma_minus:g};pth={params.p_th:g}"
    )


def lneg_curve(p, params: APLParams):
    p = np.asarray(p, dtype=np.float64)
    loss, _ = _negative_terms(p, 1.0 - p, params)
    return loss


def emit_curve(
    figure_id: str,
    params_list: Iterable[APLParams],
    grid: Sequence[float] | None = None,
    labels: Sequence[str] | None = None,
) -> list[CurveTable]:
    """Tabulate the data behind the coefficient, L- loss and L- gradient figures.

    ``poly_coeffs`` ignores ``grid``: its axis is the polynomial exponent
    ``m + gamma_plus`` of each base ``(1-p)`` and its values are the
    coefficients ``alpha_m``, for ``m = 1..10``.
    """
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure {figure_id!r}; expected one of {FIGURES}")
    params_list = list(params_list)
    if labels is None:
        labels = [series_label(p) for p in params_list]
    if len(labels) != len(params_list):
        raise ValueError("labels and params_list differ in length")
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=np.float64)
    if figure_id != "poly_coeffs":
        if np.any(grid <= 0) or np.any(grid >= 1) or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing inside (0, 1)")

    tables = []
    for params, label in zip(params_list, labels):
        if figure_id == "poly_coeffs":
            x = np.arange(1, 11, dtype=np.float64) + params.gamma_plus
            tables.append(CurveTable(x, alpha_coefficients(params, 10), label, params))
        elif figure_id == "lneg_curves":
            tables.append(CurveTable(grid.copy(), lneg_curve(grid, params), label, params))
        else:
            values = negative_gradient_wrt_logit(grid, params)
            tables.append(CurveTable(grid.copy(), values, label, params))
    return tables


def curves_to_csv(tables: Sequence[CurveTable], header_comment: str | None = None) -> str:
    """CSV text with header ``p,value,series_id``, 9 significant digits, LF endings."""
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "value", "series_id"])
    for table in tables:
        for x, v in zip(table.grid, table.values):
            writer.writerow([f"{x:.9g}", f"{v:.9g}", table.series_id])
    return buf.getvalue()

