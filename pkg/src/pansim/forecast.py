"""Prediction models feeding the decision loop: an autoregressive model
for proxy inputs when live data lags, a linear outcome model over features
and decisions, and the intervention-scope selector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class ForecastError(ValueError):
    pass


@dataclass
class ARModel:
    """x_t = c + phi_1 x_{t-1} + ... + phi_p x_{t-p} + eps_t."""

    order: int
    intercept: float
    coefficients: np.ndarray
    residual_variance: float

    def to_json(self) -> str:
        return json.dumps({
            "order": self.order,
            "intercept": self.intercept,
            "coefficients": [float(v) for v in self.coefficients],
            "residual_variance": self.residual_variance,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ARModel":
        raw = json.loads(text)
        return cls(order=int(raw["order"]), intercept=float(raw["intercept"]),
                   coefficients=np.array(raw["coefficients"], dtype=float),
                   residual_variance=float(raw["residual_variance"]))


def _lag_design(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    rows = len(x) - p
    design = np.ones((rows, p + 1))
    for lag in range(1, p + 1):
        design[:, lag] = x[p - lag:len(x) - lag]
    return design, x[p:]


def fit_ar(series, p: int) -> ARModel:
    """Least-squares fit of an AR(p) with intercept.

    Needs at least 2p + 2 observations and an identifiable design; a
    constant series makes the lag columns collinear with the intercept
    and is rejected.
    """
    x = np.asarray(series, dtype=float)
    if p < 1:
        raise ForecastError(f"order must be >= 1, got {p}")
    if x.ndim != 1:
        raise ForecastError("series must be one-dimensional")
    if len(x) < 2 * p + 2:
        raise ForecastError(
            f"series of length {len(x)} too short for order {p} "
            f"(need >= {2 * p + 2})")
    design, target = _lag_design(x, p)
    rank = np.linalg.matrix_rank(design)
    if rank < p + 1:
        raise ForecastError(
            f"rank-deficient lag design (rank {rank} < {p + 1}); "
            "the series carries no identifiable dynamics (constant?)")
    coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    residuals = target - design @ coef
    dof = max(len(target) - (p + 1), 1)
    return ARModel(order=p, intercept=float(coef[0]),
                   coefficients=coef[1:].copy(),
                   residual_variance=float(residuals @ residuals / dof))


def predict_ar(model: ARModel, history, horizon: int) -> np.ndarray:
    """Iterated point forecasts (error term zeroed)."""
    h = np.asarray(history, dtype=float)
    if len(h) < model.order:
        raise ForecastError(
            f"history of length {len(h)} shorter than order {model.order}")
    if horizon < 0:
        raise ForecastError(f"horizon must be >= 0, got {horizon}")
    window = list(h[-model.order:])
    out = []
    for _ in range(horizon):
        nxt = model.intercept + sum(
            phi * window[-(lag + 1)]
            for lag, phi in enumerate(model.coefficients))
        out.append(nxt)
        window.append(nxt)
        window.pop(0)
    return np.array(out)


@dataclass
class StaticModel:
    """Linear outcome model over concatenated features and decisions."""

    coefficients: np.ndarray     # aligned with [X | D] columns
    intercept: float
    r_squared: float
    n_features: int
    n_decisions: int

    def predict(self, X, D) -> np.ndarray:
        Z = _design(X, D, self.n_features, self.n_decisions)
        return self.intercept + Z @ self.coefficients

    def to_json(self) -> str:
        return json.dumps({
            "coefficients": [float(v) for v in self.coefficients],
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_features": self.n_features,
            "n_decisions": self.n_decisions,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StaticModel":
        raw = json.loads(text)
        return cls(coefficients=np.array(raw["coefficients"], dtype=float),
                   intercept=float(raw["intercept"]),
                   r_squared=float(raw["r_squared"]),
                   n_features=int(raw["n_features"]),
                   n_decisions=int(raw["n_decisions"]))


def _design(X, D, n_features: int | None = None,
            n_decisions: int | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if X.shape[0] != D.shape[0]:
        raise ForecastError(
            f"feature rows ({X.shape[0]}) and decision rows ({D.shape[0]}) differ")
    if n_features is not None and X.shape[1] != n_features:
        raise ForecastError(f"expected {n_features} feature columns, got {X.shape[1]}")
    if n_decisions is not None and D.shape[1] != n_decisions:
        raise ForecastError(f"expected {n_decisions} decision columns, got {D.shape[1]}")
    return np.hstack([X, D])


def _first_dependent_column(M: np.ndarray) -> int:
    """Index of the first column linearly dependent on its predecessors."""
    for j in range(1, M.shape[1]):
        if np.linalg.matrix_rank(M[:, :j + 1]) == np.linalg.matrix_rank(M[:, :j]):
            return j
    return M.shape[1] - 1


def fit_static(X, D, Y) -> StaticModel:
    """Least-squares linear fit of outcomes on [X | D] with intercept.

    Exactly linear synthetic outcomes are reproduced to machine
    precision; a rank-deficient design is rejected naming the offending
    column.
    """
    Z = _design(X, D)
    y = np.asarray(Y, dtype=float).reshape(-1)
    if Z.shape[0] != len(y):
        raise ForecastError(
            f"outcome rows ({len(y)}) do not match design rows ({Z.shape[0]})")
    if Z.shape[1] < 1:
        raise ForecastError("need at least one feature or decision column")
    full = np.hstack([np.ones((Z.shape[0], 1)), Z])
    rank = np.linalg.matrix_rank(full)
    if rank < full.shape[1]:
        n_x = np.atleast_2d(np.asarray(X, dtype=float)).shape[1]
        j = _first_dependent_column(full)
        if j == 0:
            label = "intercept"
        elif j <= n_x:
            label = f"feature column {j - 1}"
        else:
            label = f"decision column {j - 1 - n_x}"
        raise ForecastError(f"rank-deficient design: {label} is linearly "
                            "dependent on earlier columns")
    coef, _, _, _ = np.linalg.lstsq(full, y, rcond=None)
    fitted = full @ coef
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    n_x = np.atleast_2d(np.asarray(X, dtype=float)).shape[1]
    return StaticModel(coefficients=coef[1:].copy(), intercept=float(coef[0]),
                       r_squared=r2, n_features=n_x,
                       n_decisions=Z.shape[1] - n_x)


def select_scope(candidates, evaluator, days: int | None = None):
    """Pick the intervention scope with the lowest mean prediction error.

    ``evaluator(N)`` returns the per-day errors e_1..e_J for candidate N;
    the argmin of their mean wins and ties go to the smaller candidate.
    """
    cands = list(candidates)
    if not cands:
        raise ForecastError("candidate list must be non-empty")
    best = None
    for n in sorted(cands):
        errors = np.asarray(list(evaluator(n)), dtype=float)
        if errors.size == 0:
            raise ForecastError(f"evaluator returned no errors for candidate {n}")
        if days is not None and errors.size != days:
            raise ForecastError(
                f"evaluator returned {errors.size} errors, expected {days}")
        if (errors < 0).any():
            raise ForecastError(f"negative prediction error for candidate {n}")
        mean = float(errors.mean())
        if best is None or mean < best[0]:
            best = (mean, n)
    return best[1]
