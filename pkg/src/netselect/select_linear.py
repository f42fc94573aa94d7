"""Partial variance, linear trace criteria, and greedy/exhaustive selection.

The linear reconstruction of turned-off sensors I from the rest is
x_hat_{I,t} = Theta x^H_{I^c,t} with Theta = beta alpha^{-1} on the
lag-stacked Gram matrices. The selection criterion
tr(Sigma_I - beta alpha^{-1} beta^T) equals the training mean squared
error of that reconstructor, which is what the greedy algorithms
minimize one sensor at a time.
"""

import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Dict, List

import numpy as np

from .errors import BudgetError, DeterminantError, InvalidInputError
from .numerics import solve_spd
from .timeseries import (
    CovarianceBlocks,
    _check_partition,
    assemble_blocks,
    lagged_design,
)

METHOD_TAGS = (
    "linear-h0",
    "linear-h",
    "kernel-h0",
    "kernel-h",
    "gcn-dropout",
    "gcn-mask",
)


@dataclass
class SelectionResult:
    method: str
    hyperparams: Dict
    order: List[int]          # turned-off sensors, first picked first
    step_values: List[float]  # criterion minimum at each greedy step

    def __post_init__(self):
        if self.method not in METHOD_TAGS:
            raise InvalidInputError(f"unknown method tag {self.method!r}")
        if len(set(self.order)) != len(self.order):
            raise InvalidInputError(f"selection order has duplicates: {self.order}")
        if len(self.step_values) != len(self.order):
            raise InvalidInputError("step_values and order lengths differ")
        if not all(math.isfinite(v) for v in self.step_values):
            raise InvalidInputError("step_values contain non-finite entries")

    def to_json(self):
        return json.dumps(
            {
                "method": self.method,
                "hyperparams": self.hyperparams,
                "order": [int(i) for i in self.order],
                "step_values": [float(v) for v in self.step_values],
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(
            method=data["method"],
            hyperparams=data["hyperparams"],
            order=[int(i) for i in data["order"]],
            step_values=[float(v) for v in data["step_values"]],
        )


def partial_variance(sigma, i, S):
    """sigma^2_{i|S} = Sigma_ii - Sigma_iS Sigma_S^{-1} Sigma_Si."""
    sigma = np.asarray(sigma, dtype=float)
    S = [int(j) for j in S]
    i = int(i)
    if i in S:
        raise InvalidInputError(f"sensor {i} cannot condition on itself")
    if not S:
        return float(sigma[i, i])
    sub = sigma[np.ix_(S, S)]
    v = sigma[i, S]
    return float(sigma[i, i] - v @ solve_spd(sub, v))


def criterion_linear_h0(sigma, I):
    """tr(Sigma_I - Sigma_II^c Sigma_I^c^{-1} Sigma_I^cI)."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    I, Ic = _check_partition(n, I)
    if not I or not Ic:
        raise InvalidInputError("I must be a nonempty proper subset")
    cross = sigma[np.ix_(Ic, I)]
    explained = cross.T @ solve_spd(sigma[np.ix_(Ic, Ic)], cross)
    return float(np.trace(sigma[np.ix_(I, I)]) - np.trace(explained))


def criterion_linear_h(sigma, alpha, beta, I):
    """tr(Sigma_I - beta alpha^{-1} beta^T) on pre-assembled lag blocks."""
    sigma = np.asarray(sigma, dtype=float)
    I = [int(i) for i in I]
    explained = beta @ solve_spd(alpha, beta.T)
    return float(np.trace(sigma[np.ix_(I, I)]) - np.trace(explained))


def _candidate_value(gammas, i, S, H):
    # one-sensor criterion of i conditioned on S over lags 0..H
    q = len(S)
    alpha = np.empty(((H + 1) * q, (H + 1) * q))
    for r in range(H + 1):
        for c in range(H + 1):
            l = c - r
            blk = gammas[l] if l >= 0 else gammas[-l].T
            alpha[r * q:(r + 1) * q, c * q:(c + 1) * q] = blk[np.ix_(S, S)]
    beta = np.concatenate([gammas[c][i, S] for c in range(H + 1)])
    return float(gammas[0][i, i] - beta @ solve_spd(alpha, beta))


def _argmin_first(values):
    # strict < keeps the lowest index on ties
    best_k = 0
    for k in range(1, len(values)):
        if values[k] < values[best_k]:
            best_k = k
    return best_k


def _map_candidates(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def greedy_select_linear(blocks: CovarianceBlocks, p, H=0, threads=1) -> SelectionResult:
    """Greedy selection for the linear reconstruction criterion.

    At each step the sensor with the smallest one-sensor criterion given
    the remaining sensors is moved to the turned-off set; ties go to the
    lowest index.
    """
    n = blocks.n
    if not (1 <= p < n):
        raise InvalidInputError(f"need 1 <= p < {n}, got p={p}")
    if H > blocks.max_lag:
        raise InvalidInputError(f"blocks hold lags 0..{blocks.max_lag}, need H={H}")
    gammas = blocks.gammas
    remaining = list(range(n))
    order: List[int] = []
    step_values: List[float] = []
    for _ in range(p):
        cands = [(i, [j for j in remaining if j != i]) for i in remaining]
        vals = _map_candidates(
            lambda c: _candidate_value(gammas, c[0], c[1], H), cands, threads
        )
        k = _argmin_first(vals)
        order.append(remaining[k])
        step_values.append(vals[k])
        remaining.pop(k)
    method = "linear-h0" if H == 0 else "linear-h"
    return SelectionResult(method, {"H": H}, order, step_values)


def exhaustive_select(criterion: Callable, n, p, budget=2_000_000):
    """Global minimizer of a set criterion over all size-p subsets.

    Ties are broken lexicographically (combinations order). Raises
    BudgetError if C(n, p) exceeds the evaluation budget.
    """
    count = math.comb(n, p)
    if count > budget:
        raise BudgetError(f"C({n},{p}) = {count} exceeds budget {budget}")
    best = None
    best_val = math.inf
    for subset in combinations(range(n), p):
        val = criterion(list(subset))
        if val < best_val:
            best = subset
            best_val = val
    return best, best_val


def entropy_criterion(sigma, I):
    """log det Sigma_{I^c}, the entropy design objective."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    _, Ic = _check_partition(n, I)
    sign, logdet = np.linalg.slogdet(sigma[np.ix_(Ic, Ic)])
    if sign <= 0:
        raise DeterminantError(
            f"complement submatrix is not positive definite (sign {sign})"
        )
    return float(logdet)


@dataclass
class LinearReconstructor:
    """Fitted linear map from lag-stacked kept sensors to turned-off ones."""

    theta: np.ndarray          # (|I|, (H+1)|I^c|)
    turned_off: List[int]
    kept: List[int]
    H: int

    def predict_panel(self, X, t_start, t_end):
        """Predictions for columns t_start..t_end-1 of a full panel matrix.

        Lags reach back into columns before t_start; positions before
        column 0 are treated as zero.
        """
        X = np.asarray(X, dtype=float)
        q = len(self.kept)
        nt = t_end - t_start
        D = np.zeros(((self.H + 1) * q, nt))
        for l in range(self.H + 1):
            lo = t_start - l
            hi = t_end - l
            src_lo = max(lo, 0)
            if src_lo < hi:
                D[l * q:(l + 1) * q, src_lo - lo:] = X[self.kept, src_lo:hi]
        return self.theta @ D

    def training_mse(self, X_train):
        """Mean squared training error under the zero-padded convention.

        The sum runs over T+H padded columns and is divided by T, which
        makes it equal to the trace criterion exactly.
        """
        X_train = np.asarray(X_train, dtype=float)
        T = X_train.shape[1]
        D = lagged_design(X_train, self.kept, self.H)
        target = np.zeros((len(self.turned_off), T + self.H))
        target[:, :T] = X_train[self.turned_off, :]
        resid = target - self.theta @ D
        return float(np.sum(resid ** 2) / T)


def fit_predict_linear(blocks: CovarianceBlocks, I, H=0) -> LinearReconstructor:
    """Least-squares reconstructor Theta = beta alpha^{-1} for the set I."""
    n = blocks.n
    I, Ic = _check_partition(n, I)
    if not I or not Ic:
        raise InvalidInputError("I must be a nonempty proper subset")
    alpha, beta = assemble_blocks(blocks.gammas, I, H)
    theta = solve_spd(alpha, beta.T).T
    return LinearReconstructor(theta=theta, turned_off=I, kept=Ic, H=H)
