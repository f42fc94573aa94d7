"""Kernel ridge reconstruction criteria and greedy selection.

The reconstructor Theta_lambda = K_II^c (K_I^c + lambda Id)^{-1} replaces
the least-squares map; the criterion keeps the data Gram matrices:
tr(Sigma_I - 2 beta Theta^T + Theta alpha Theta^T). With the
autocovariance kernel the Gram blocks equal the data blocks, so at
lambda = 0 everything reduces to the linear method.
"""

import warnings
from dataclasses import asdict, dataclass
from typing import List, NamedTuple

import numpy as np

from . import graph as graphmod
from .errors import ConvergenceError, InvalidInputError
from .numerics import conjugate_gradient, solve_spd, stabilize_spd
from .select_linear import LinearReconstructor, SelectionResult, _argmin_first, _map_candidates
from .timeseries import CovarianceBlocks, _check_partition, assemble_blocks, estimate_blocks

KERNEL_TAGS = ("laplacian", "spatial-temporal", "autocovariance", "linear", "rbf")


@dataclass(frozen=True)
class KernelConfig:
    kernel: str = "autocovariance"
    gamma: float = 0.0   # RBF decay in the time lag
    lam: float = 0.0     # ridge strength
    H: int = 0
    r: str = "pinv"      # spectral map for the Laplacian kernel
    eps: float = 1e-8    # conjugate gradient tolerance

    def __post_init__(self):
        if self.kernel not in KERNEL_TAGS:
            raise InvalidInputError(
                f"unknown kernel {self.kernel!r}; supported: {KERNEL_TAGS}"
            )
        if self.lam < 0 or self.gamma < 0 or self.H < 0 or self.eps <= 0:
            raise InvalidInputError(
                "need lam >= 0, gamma >= 0, H >= 0, eps > 0"
            )

    def as_dict(self):
        return asdict(self)


class KernelBlocks(NamedTuple):
    blocks: List[np.ndarray]  # K(l), l = 0 .. H
    symmetric_in_l: bool      # K(-l) = K(l) rather than K(l)^T


def build_kernel_blocks(config: KernelConfig, graph=None, X_train=None) -> KernelBlocks:
    """Gram blocks K(0..H) for the configured kernel.

    autocovariance needs training data; laplacian / spatial-temporal / rbf
    need the sensor graph. Kernels without intrinsic lag structure are
    extended in time by the RBF factor exp(-gamma l^2).
    """
    H = config.H
    if config.kernel == "autocovariance":
        if X_train is None:
            raise InvalidInputError("autocovariance kernel needs training data")
        blocks = estimate_blocks(np.asarray(X_train, dtype=float), H).gammas
        return KernelBlocks(blocks, symmetric_in_l=False)

    if config.kernel == "linear":
        if X_train is None:
            raise InvalidInputError("linear kernel needs training data")
        K_g = estimate_blocks(np.asarray(X_train, dtype=float), 0).sigma
    elif config.kernel in ("laplacian", "spatial-temporal"):
        if graph is None:
            raise InvalidInputError(f"{config.kernel} kernel needs the sensor graph")
        spec = graphmod.graph_spectrum(graphmod.combinatorial_laplacian(graph))
        K_g = graphmod.laplacian_kernel(spec, config.r)
    else:  # rbf on sensor coordinates, median-heuristic length scale
        if graph is None:
            raise InvalidInputError("rbf kernel needs the sensor graph")
        coords = graph.coords
        diff = coords[:, None, :] - coords[None, :, :]
        d2 = (diff ** 2).sum(axis=2)
        off = d2[~np.eye(coords.shape[0], dtype=bool)]
        scale = np.median(off) if off.size and np.median(off) > 0 else 1.0
        K_g = np.exp(-d2 / scale)

    blocks = [K_g * np.exp(-config.gamma * l ** 2) for l in range(H + 1)]
    return KernelBlocks(blocks, symmetric_in_l=True)


def _kernel_block(kb: KernelBlocks, l):
    if l >= 0:
        return kb.blocks[l]
    return kb.blocks[-l] if kb.symmetric_in_l else kb.blocks[-l].T


def assemble_kernel(kb: KernelBlocks, rows, cols, H):
    """Lag-stacked kernel matrix with block (r, c) = K(c - r)[rows, cols]."""
    if H + 1 > len(kb.blocks):
        raise InvalidInputError(f"kernel blocks hold lags 0..{len(kb.blocks) - 1}")
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    return np.block(
        [
            [_kernel_block(kb, c - r)[np.ix_(rows, cols)] for c in range(H + 1)]
            for r in range(H + 1)
        ]
    )


def _kernel_gram_for(kb: KernelBlocks, I, Ic, H):
    # K over the kept set, stacked, and the cross rows for each lag c:
    # block c of the cross part is K(c)[I, Ic], matching the data beta layout
    K_S = assemble_kernel(kb, Ic, Ic, H)
    q = len(Ic)
    K_cross = np.empty((len(I), (H + 1) * q))
    for c in range(H + 1):
        K_cross[:, c * q:(c + 1) * q] = _kernel_block(kb, c)[np.ix_(I, Ic)]
    return K_S, K_cross


def kernel_reconstructor(K_cross, K_S, lam):
    """Theta_lambda = K_cross (K_S + lambda Id)^{-1}.

    The jitter policy applies, so an exactly singular PSD Gram at
    lambda = 0 is regularized at the 1e-10 level; matrices indefinite
    beyond jitter raise SingularMatrixError.
    """
    K_S = np.asarray(K_S, dtype=float)
    if lam < 0:
        raise InvalidInputError("lambda must be nonnegative")
    A = K_S + lam * np.eye(K_S.shape[0])
    return solve_spd(A, np.asarray(K_cross, dtype=float).T).T


def _cg_reconstructor(K_cross, K_S, lam, eps):
    A = K_S + lam * np.eye(K_S.shape[0])
    A, _ = stabilize_spd(A)
    rows = []
    for row in np.atleast_2d(K_cross):
        rows.append(conjugate_gradient(A, row, tol=eps))
    return np.vstack(rows)


def criterion_kernel(cov_blocks: CovarianceBlocks, kb: KernelBlocks, I, lam, H,
                     use_cg=False, eps=1e-10):
    """tr(Sigma_I - 2 beta Theta^T + Theta alpha Theta^T).

    alpha and beta are the data Gram blocks for I; Theta is the kernel
    ridge reconstructor. Equals the training MSE of that reconstructor
    under the zero-padded lag convention.
    """
    n = cov_blocks.n
    I, Ic = _check_partition(n, I)
    if not I or not Ic:
        raise InvalidInputError("I must be a nonempty proper subset")
    alpha, beta = assemble_blocks(cov_blocks.gammas, I, H)
    K_S, K_cross = _kernel_gram_for(kb, I, Ic, H)
    if use_cg:
        theta = _cg_with_fallback(K_cross, K_S, lam, eps)
    else:
        theta = kernel_reconstructor(K_cross, K_S, lam)
    sigma_I = cov_blocks.sigma[np.ix_(I, I)]
    return float(
        np.trace(sigma_I)
        - 2.0 * np.trace(beta @ theta.T)
        + np.trace(theta @ alpha @ theta.T)
    )


def _cg_with_fallback(K_cross, K_S, lam, eps):
    try:
        return _cg_reconstructor(K_cross, K_S, lam, eps)
    except ConvergenceError as err:
        warnings.warn(
            f"conjugate gradient did not converge ({err}); using direct solve"
        )
        return kernel_reconstructor(K_cross, K_S, lam)


def greedy_select_kernel(cov_blocks: CovarianceBlocks, kb: KernelBlocks, p,
                         lam=0.0, H=0, eps=1e-8, use_cg=False, threads=1,
                         hyperparams=None) -> SelectionResult:
    """Greedy selection under the kernel ridge criterion.

    Same loop as the linear method; the candidate value swaps the
    least-squares map for Theta_lambda(i) computed from the kernel Gram
    blocks (by conjugate gradient when use_cg is set). Ties go to the
    lowest index.
    """
    n = cov_blocks.n
    if not (1 <= p < n):
        raise InvalidInputError(f"need 1 <= p < {n}, got p={p}")
    gammas = cov_blocks.gammas
    if H > len(gammas) - 1:
        raise InvalidInputError(f"covariance blocks hold lags 0..{len(gammas) - 1}")

    def value(cand):
        i, S = cand
        q = len(S)
        alpha = np.empty(((H + 1) * q, (H + 1) * q))
        for r in range(H + 1):
            for c in range(H + 1):
                l = c - r
                blk = gammas[l] if l >= 0 else gammas[-l].T
                alpha[r * q:(r + 1) * q, c * q:(c + 1) * q] = blk[np.ix_(S, S)]
        beta = np.concatenate([gammas[c][i, S] for c in range(H + 1)])
        K_S, K_cross = _kernel_gram_for(kb, [i], S, H)
        if use_cg:
            theta = _cg_with_fallback(K_cross, K_S, lam, eps)
        else:
            theta = kernel_reconstructor(K_cross, K_S, lam)
        th = theta.ravel()
        return float(gammas[0][i, i] - 2.0 * (beta @ th) + th @ alpha @ th)

    remaining = list(range(n))
    order: List[int] = []
    step_values: List[float] = []
    for _ in range(p):
        cands = [(i, [j for j in remaining if j != i]) for i in remaining]
        vals = _map_candidates(value, cands, threads)
        k = _argmin_first(vals)
        order.append(remaining[k])
        step_values.append(vals[k])
        remaining.pop(k)
    method = "kernel-h0" if H == 0 else "kernel-h"
    hp = {"H": H, "lambda": lam, "eps": eps, "use_cg": bool(use_cg)}
    if hyperparams:
        hp.update(hyperparams)
    return SelectionResult(method, hp, order, step_values)


def fit_predict_kernel(cov_blocks: CovarianceBlocks, kb: KernelBlocks, I, lam, H=0
                       ) -> LinearReconstructor:
    """Kernel ridge reconstructor for the set I, as a lag-stacked linear map."""
    n = cov_blocks.n
    I, Ic = _check_partition(n, I)
    if not I or not Ic:
        raise InvalidInputError("I must be a nonempty proper subset")
    K_S, K_cross = _kernel_gram_for(kb, I, Ic, H)
    theta = kernel_reconstructor(K_cross, K_S, lam)
    return LinearReconstructor(theta=theta, turned_off=I, kept=Ic, H=H)


def lambda_monotonicity_check(cov_blocks: CovarianceBlocks, I, lam_grid, H=0):
    """Criterion values along a lambda grid under the autocovariance kernel.

    With that kernel the Gram blocks equal the data blocks, so the
    criterion is monotone nondecreasing in lambda and minimal at 0.
    """
    kb = KernelBlocks(list(cov_blocks.gammas), symmetric_in_l=False)
    return [
        criterion_kernel(cov_blocks, kb, I, lam, H) for lam in lam_grid
    ]
