"""Selection networks: dropout scoring and mask-with-l1 (Lasso path).

Both transforms train the reconstruction network with out_dim = N. The
dropout variant knocks sensors out at random and scores how well each
sensor is predicted when missing; the masking variant learns a
continuous input mask under an l1 penalty and ranks sensors by how
early their mask weight collapses along an ascending lambda grid.
"""

import csv
import warnings
from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import InvalidInputError, UndefinedScoreError
from ..select_linear import SelectionResult
from ..timeseries import Split
from .layers import ChebNetConfig, backward_batch, forward_batch, init_params
from .train import (
    TrainConfig,
    _check_finite,
    _five_epoch_stop,
    _param_tensors,
    batch_blocks,
    make_optimizer,
    window_tensor,
)

MEASURES = ("r2", "mse")


@dataclass
class SensorScores:
    scores: np.ndarray   # per sensor
    measure: str         # "r2" or "mse"
    ranking: List[int]   # descending score for r2, ascending for mse

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise InvalidInputError(f"measure must be one of {MEASURES}")


def write_scores_csv(scores: SensorScores, sensor_ids, path):
    """CSV sensor_id,score,rank with rank 1 at the top of the ranking."""
    rank_of = {i: k + 1 for k, i in enumerate(scores.ranking)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sensor_id", "score", "rank"])
        for i, sid in enumerate(sensor_ids):
            writer.writerow([sid, format(float(scores.scores[i]), ".17g"), rank_of[i]])


def score_sensors(params, net_config: ChebNetConfig, Lt, X, val_ts, measure="r2"
                  ) -> SensorScores:
    """Per-sensor score of the trained network on validation rows.

    Predictions use the full input (no dropout, no rescaling). R^2 per
    sensor is 1 - sum (x - x_hat)^2 / sum (x - x_bar)^2 with x_bar the
    validation mean; a zero-variance sensor raises UndefinedScoreError.
    """
    if measure not in MEASURES:
        raise InvalidInputError(f"measure must be one of {MEASURES}")
    X = np.asarray(X, dtype=float)
    val_ts = np.asarray(val_ts, dtype=int)
    pred = forward_batch(window_tensor(X, val_ts, net_config.h), params,
                         net_config, Lt)           # (B, n)
    actual = X[:, val_ts].T
    resid_sq = ((actual - pred) ** 2).sum(axis=0)  # per sensor
    if measure == "mse":
        scores = resid_sq / val_ts.size
        ranking = list(np.argsort(scores, kind="stable"))
    else:
        centered = ((actual - actual.mean(axis=0)) ** 2).sum(axis=0)
        if np.any(centered == 0):
            bad = int(np.nonzero(centered == 0)[0][0])
            raise UndefinedScoreError(
                f"sensor index {bad} has zero variance on validation rows"
            )
        scores = 1.0 - resid_sq / centered
        ranking = list(np.argsort(-scores, kind="stable"))
    return SensorScores(scores, measure, [int(i) for i in ranking])


def train_selection_dropout(X, split: Split, Lt, p, net_config: ChebNetConfig,
                            train_config: TrainConfig, measure="r2"):
    """Dropout selection: train with random sensor knockouts, rank by score.

    Per batch a Bernoulli vector w with zero-probability q = p/N masks
    the input; the loss counts only dropped sensors (factor 1 - w).
    Degenerate draws (all zeros or all ones) are resampled. Early
    stopping compares 5-epoch validation-loss means; validation masks
    are drawn once so the trace is deterministic. Scoring uses the full
    input.

    Returns (scores, result, diagnostics).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if net_config.out_dim != n:
        raise InvalidInputError(f"out_dim must be N = {n} for dropout selection")
    if not (1 <= p < n):
        raise InvalidInputError(f"need 1 <= p < {n}, got p={p}")
    if train_config.optimizer != "gd":
        raise InvalidInputError("dropout selection uses the plain gd optimizer")
    q = p / n
    h = net_config.h

    rng = np.random.default_rng(train_config.seed)
    params = init_params(net_config, seed=train_config.seed)
    opt = make_optimizer(train_config)

    def draw_mask():
        resampled = 0
        while True:
            w = (rng.random(n) >= q).astype(float)
            if 0.0 < w.sum() < n:
                return w, resampled
            resampled += 1

    train_blocks = batch_blocks(0, split.t_tv, h, train_config.batch_size)
    val_blocks = batch_blocks(split.t_tv, split.t0, h, train_config.batch_size)
    val_masks = [draw_mask()[0] for _ in val_blocks]

    resample_count = 0
    val_losses: List[float] = []
    use_early_stop = train_config.early_stop != "none"
    for _ in range(train_config.max_epoch):
        for bi in rng.permutation(len(train_blocks)):
            ts = train_blocks[bi]
            w, extra = draw_mask()
            resample_count += extra
            Xb = window_tensor(X, ts, h)
            out, cache = forward_batch(Xb * w[None, :, None], params, net_config,
                                       Lt, want_cache=True)
            resid = out - X[:, ts].T
            drop = 1.0 - w
            loss = float(np.sum(drop[None, :] * resid ** 2) / ts.size)
            _check_finite(loss)
            grads, _ = backward_batch(2.0 * drop[None, :] * resid / ts.size,
                                      cache, params, net_config, Lt)
            opt.step(_param_tensors(params), _param_tensors(grads))

        vl = 0.0
        n_val = 0
        for ts, w in zip(val_blocks, val_masks):
            out = forward_batch(window_tensor(X, ts, h) * w[None, :, None],
                                params, net_config, Lt)
            resid = out - X[:, ts].T
            vl += float(np.sum((1.0 - w)[None, :] * resid ** 2))
            n_val += ts.size
        val_loss = vl / n_val
        _check_finite(val_loss)
        val_losses.append(val_loss)
        if use_early_stop and _five_epoch_stop(val_losses):
            break

    val_ts = np.concatenate(val_blocks)
    try:
        scores = score_sensors(params, net_config, Lt, X, val_ts, measure)
    except UndefinedScoreError as err:
        warnings.warn(f"{err}; falling back to mse scoring")
        scores = score_sensors(params, net_config, Lt, X, val_ts, "mse")

    order = scores.ranking[:p]
    result = SelectionResult(
        "gcn-dropout",
        {
            "p": p,
            "q": q,
            "measure": scores.measure,
            "lr": train_config.lr,
            "batch_size": train_config.batch_size,
            "max_epoch": train_config.max_epoch,
            "seed": train_config.seed,
            "H": h,
        },
        order,
        [float(scores.scores[i]) for i in order],
    )
    diagnostics = {"resampled": resample_count, "val_losses": val_losses,
                   "params": params}
    return scores, result, diagnostics


def train_selection_masking(X, split: Split, Lt, p, lam_grid, eps0,
                            net_config: ChebNetConfig, train_config: TrainConfig):
    """Masking selection: l1-penalized trainable input mask, Lasso path.

    For each lambda in the ascending grid the network and a mask w
    (init 0.5) are trained jointly for the full max_epoch (no early
    stopping); after every optimizer step w is projected onto [0, 1].
    The per-batch loss is mean_t sum_i (1 - w_i)^2 (x_it - x_hat_it)^2
    plus lambda ||w||_1. F_i counts the grid points whose final mask
    weight falls below eps0; sensors are ranked by descending F_i with
    ties (and the no-collapse fallback) broken by the final weight at
    the largest lambda.

    Returns (result, mask_path) with mask_path of shape (len(grid), N).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if net_config.out_dim != n:
        raise InvalidInputError(f"out_dim must be N = {n} for masking selection")
    if not (1 <= p < n):
        raise InvalidInputError(f"need 1 <= p < {n}, got p={p}")
    lam_grid = [float(l) for l in lam_grid]
    if not lam_grid or any(b < a for a, b in zip(lam_grid, lam_grid[1:])):
        raise InvalidInputError("lambda grid must be nonempty and ascending")
    if eps0 <= 0:
        raise InvalidInputError("eps0 must be positive")
    h = net_config.h

    train_blocks = batch_blocks(0, split.t_tv, h, train_config.batch_size)
    mask_path = np.empty((len(lam_grid), n))
    for gi, lam in enumerate(lam_grid):
        rng = np.random.default_rng(train_config.seed)
        params = init_params(net_config, seed=train_config.seed)
        w = np.full(n, 0.5)
        opt = make_optimizer(train_config)
        for _ in range(train_config.max_epoch):
            for bi in rng.permutation(len(train_blocks)):
                ts = train_blocks[bi]
                Xb = window_tensor(X, ts, h)
                out, cache = forward_batch(Xb * w[None, :, None], params,
                                           net_config, Lt, want_cache=True)
                target = X[:, ts].T
                resid = out - target
                sqw = (1.0 - w) ** 2
                loss = float(np.sum(sqw[None, :] * resid ** 2) / ts.size
                             + lam * np.abs(w).sum())
                _check_finite(loss)
                grads, dXb = backward_batch(2.0 * sqw[None, :] * resid / ts.size,
                                            cache, params, net_config, Lt,
                                            want_input_grad=True)
                # mask gradient: input path, the (1-w)^2 loss factor, and l1
                dw = (dXb * Xb).sum(axis=(0, 2))
                dw += -2.0 * (1.0 - w) * (resid ** 2).sum(axis=0) / ts.size
                dw += lam * np.sign(w)
                opt.step(_param_tensors(params) + [w],
                         _param_tensors(grads) + [dw])
                np.clip(w, 0.0, 1.0, out=w)
        mask_path[gi] = w

    final_at_top = mask_path[-1]
    F = (mask_path < eps0).sum(axis=0)
    if int((F > 0).sum()) < p:
        warnings.warn(
            f"only {int((F > 0).sum())} sensors were driven below eps0={eps0} "
            f"along the lambda path; ranking the rest by final mask weight"
        )
    ranking = sorted(range(n), key=lambda i: (-F[i], final_at_top[i], i))
    order = ranking[:p]
    result = SelectionResult(
        "gcn-mask",
        {
            "p": p,
            "eps0": eps0,
            "lambda_grid": lam_grid,
            "lr": train_config.lr,
            "batch_size": train_config.batch_size,
            "max_epoch": train_config.max_epoch,
            "seed": train_config.seed,
            "H": h,
        },
        order,
        [float(F[i]) for i in order],
    )
    return result, mask_path
