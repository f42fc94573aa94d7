"""Sensor graph construction, Laplacians, Fourier basis, and graph kernels.

The graph is built from sensor coordinates with a self-tuning kNN rule:
each node connects to its k0 nearest neighbors with weight
exp(-d^2(i,j) / (sigma_i sigma_j)), where sigma_j is the distance from
node j to its k1-th nearest neighbor. Directed assignments are merged by
elementwise max and the result must be connected.
"""

import csv
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Union

import numpy as np

from .errors import (
    ConnectivityError,
    DegenerateScaleError,
    InvalidInputError,
    ZeroDegreeError,
)
from .numerics import EigenPair, check_symmetric, sym_eig


@dataclass(frozen=True)
class SensorGraph:
    coords: np.ndarray      # (n, 2) latitude, longitude in degrees
    adjacency: np.ndarray   # (n, n) symmetric nonnegative weights, zero diagonal

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        adj = np.asarray(self.adjacency, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise InvalidInputError(f"coords must be (n, 2), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise InvalidInputError("coords contain non-finite values")
        adj = check_symmetric(adj, "adjacency")
        if adj.shape[0] != coords.shape[0]:
            raise InvalidInputError("adjacency and coords disagree on node count")
        if np.any(np.diag(adj) != 0):
            raise InvalidInputError("adjacency diagonal must be zero")
        if np.any(adj < 0):
            raise InvalidInputError("adjacency weights must be nonnegative")
        comps = connected_components(adj)
        if len(comps) > 1:
            raise ConnectivityError(
                f"graph has {len(comps)} connected components", components=comps
            )
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def edge_count(self):
        return int(np.count_nonzero(np.triu(self.adjacency, k=1)))


class GraphSpectrum(NamedTuple):
    laplacian: np.ndarray
    eig: EigenPair


class StGramBlocks(NamedTuple):
    blocks: List[np.ndarray]   # K(l) for l = 0 .. H
    assembled: np.ndarray      # (H+1)x(H+1) block matrix, block (r,c) = K(|c-r|)


def connected_components(adjacency):
    """Connected components of a nonnegative adjacency matrix, as sorted lists."""
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.nonzero(adjacency[i] > 0)[0]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        comps.append(sorted(comp))
    return comps


def build_knn_graph(coords, k0, k1, zero_distance_floor=None) -> SensorGraph:
    """Self-tuning kNN graph over sensor coordinates.

    Parameters
    ----------
    coords : (n, 2) array of (lat, lon); distances are plain Euclidean
        on the raw pairs.
    k0 : neighbors per node.
    k1 : index of the neighbor whose distance sets the local scale sigma.
    zero_distance_floor : optional floor applied to all pairwise
        distances; without it, coincident coordinates raise
        DegenerateScaleError.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise InvalidInputError(f"coords must be (n, 2), got {coords.shape}")
    if not np.all(np.isfinite(coords)):
        raise InvalidInputError("coords contain non-finite values")
    n = coords.shape[0]
    if not (n > k0 >= k1 >= 1):
        raise InvalidInputError(f"need n > k0 >= k1 >= 1, got n={n}, k0={k0}, k1={k1}")

    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    if zero_distance_floor is not None:
        off = ~np.eye(n, dtype=bool)
        dist[off] = np.maximum(dist[off], zero_distance_floor)

    # stable neighbor order: distance, then index; self excluded
    dist_ranked = dist.copy()
    np.fill_diagonal(dist_ranked, np.inf)
    order = np.argsort(dist_ranked, axis=1, kind="stable")
    sigma = np.empty(n)
    for i in range(n):
        sigma[i] = dist[i, order[i, k1 - 1]]
        if sigma[i] == 0.0:
            raise DegenerateScaleError(
                f"node {i} has zero distance to its k1-th neighbor "
                f"(duplicate coordinates); enable zero_distance_floor"
            )

    directed = np.zeros((n, n))
    for i in range(n):
        for j in order[i, :k0]:
            directed[i, j] = np.exp(-dist[i, j] ** 2 / (sigma[i] * sigma[j]))
    adjacency = np.maximum(directed, directed.T)

    comps = connected_components(adjacency)
    if len(comps) > 1:
        raise ConnectivityError(
            f"kNN graph with k0={k0} is not connected: components {comps}",
            components=comps,
        )
    return SensorGraph(coords=coords, adjacency=adjacency)


def combinatorial_laplacian(g: SensorGraph):
    """L = D - A with D the diagonal of row sums."""
    A = g.adjacency
    return np.diag(A.sum(axis=1)) - A


def normalized_laplacian(g: SensorGraph):
    """Symmetric normalized Laplacian D^{-1/2} (D - A) D^{-1/2}.

    Eigenvalues lie in [0, 2]; requires every degree positive.
    """
    A = g.adjacency
    deg = A.sum(axis=1)
    if np.any(deg <= 0):
        isolated = np.nonzero(deg <= 0)[0].tolist()
        raise ZeroDegreeError(f"nodes with zero degree: {isolated}")
    inv_sqrt = 1.0 / np.sqrt(deg)
    L = np.diag(deg) - A
    Lsym = inv_sqrt[:, None] * L * inv_sqrt[None, :]
    return (Lsym + Lsym.T) / 2.0


def graph_spectrum(laplacian) -> GraphSpectrum:
    """Eigendecomposition of a Laplacian (the graph Fourier basis)."""
    L = check_symmetric(laplacian, "laplacian")
    return GraphSpectrum(L, sym_eig(L))


def _pinv_map(values):
    # 1/lambda away from the kernel of L, 0 on it (Moore-Penrose inverse)
    cutoff = 1e-10 * max(1.0, float(np.abs(values).max()))
    out = np.zeros_like(values)
    nz = np.abs(values) > cutoff
    out[nz] = 1.0 / values[nz]
    return out


def heat_map(beta):
    """Spectral map r(lambda) = exp(-beta lambda)."""
    def r(values):
        return np.exp(-beta * np.asarray(values, dtype=float))
    return r


SPECTRAL_MAPS = {"pinv": _pinv_map}


def laplacian_kernel(spec: GraphSpectrum, r: Union[str, Callable] = "pinv"):
    """Kernel K = Phi r(Lambda) Phi^T from a Laplacian spectrum.

    r may be a registered tag or a callable mapping the eigenvalue array
    to nonnegative values; the default "pinv" gives the Moore-Penrose
    inverse of the Laplacian.
    """
    if isinstance(r, str):
        try:
            r_fn = SPECTRAL_MAPS[r]
        except KeyError:
            raise InvalidInputError(
                f"unknown spectral map {r!r}; registered: {sorted(SPECTRAL_MAPS)}"
            )
    else:
        r_fn = r
    mapped = np.asarray(r_fn(spec.eig.values), dtype=float)
    if mapped.shape != spec.eig.values.shape:
        raise InvalidInputError("spectral map changed the eigenvalue count")
    if np.any(mapped < 0):
        raise InvalidInputError("spectral map produced negative values")
    Phi = spec.eig.vectors
    K = (Phi * mapped[None, :]) @ Phi.T
    return (K + K.T) / 2.0


def st_gram_blocks(K_g, gamma, H, subset=None) -> StGramBlocks:
    """Spatial-temporal Gram blocks K(l) = K_g * exp(-gamma l^2), l = 0..H.

    The assembled matrix is the (H+1)x(H+1) block matrix whose (r, c)
    block is K(|c - r|); it is symmetric PSD because the lag factor is an
    RBF kernel in the lag.
    """
    K_g = check_symmetric(K_g, "K_g")
    if gamma < 0:
        raise InvalidInputError("gamma must be nonnegative")
    if H < 0:
        raise InvalidInputError("H must be nonnegative")
    if subset is not None:
        idx = np.asarray(subset, dtype=int)
        K_g = K_g[np.ix_(idx, idx)]
    blocks = [K_g * np.exp(-gamma * l ** 2) for l in range(H + 1)]
    assembled = np.block(
        [[blocks[abs(c - r)] for c in range(H + 1)] for r in range(H + 1)]
    )
    return StGramBlocks(blocks, assembled)


def read_coords(path):
    """Read a sensor coordinates CSV with header sensor_id,lat,lon.

    Returns (sensor_ids, coords). Malformed rows raise InvalidInputError
    naming the line number.
    """
    ids: List[str] = []
    rows: List[List[float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sensor_id", "lat", "lon"]:
            raise InvalidInputError(
                f"{path}: line 1: expected header 'sensor_id,lat,lon', got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InvalidInputError(f"{path}: line {lineno}: expected 3 fields")
            try:
                rows.append([float(row[1]), float(row[2])])
            except ValueError:
                raise InvalidInputError(
                    f"{path}: line {lineno}: non-numeric coordinate"
                )
            ids.append(row[0])
    return ids, np.asarray(rows, dtype=float).reshape(len(ids), 2)
