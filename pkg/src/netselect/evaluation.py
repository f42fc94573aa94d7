"""Evaluation protocol: test error, random baselines, grids, synthetic data.

Test error is always computed in preprocessed units and summed over the
turned-off set per time step, then averaged over test rows, which is the
scale the summary tables use.
"""

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import InvalidInputError, NetselectError
from .graph import SensorGraph, combinatorial_laplacian, graph_spectrum
from .select_linear import METHOD_TAGS, SelectionResult
from .timeseries import HOUR, PanelSeries, Split

LAMBDA_COEFFICIENTS = (0.001, 0.00325, 0.0055, 0.00775, 0.01)
SYNTH_MODELS = ("var1", "graph-smooth")
BURN_IN = 500


@dataclass
class EvalReport:
    method: str
    selected: List[int]
    test_mse: float
    baseline_mean: Optional[float]
    baseline_draws: int
    baseline_skipped: int
    hyperparams: dict
    seed: int

    def __post_init__(self):
        if self.method not in METHOD_TAGS:
            raise InvalidInputError(f"unknown method tag {self.method!r}")
        if self.test_mse < 0:
            raise InvalidInputError("test MSE must be nonnegative")
        if self.baseline_mean is not None and self.baseline_mean < 0:
            raise InvalidInputError("baseline mean MSE must be nonnegative")
        if self.baseline_draws < 0 or self.baseline_skipped < 0:
            raise InvalidInputError("draw counts must be nonnegative")
        self.selected = [int(i) for i in self.selected]

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "selected": self.selected,
            "test_mse": self.test_mse,
            "baseline_mean": self.baseline_mean,
            "baseline_draws": self.baseline_draws,
            "baseline_skipped": self.baseline_skipped,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(d["method"], d["selected"], d["test_mse"],
                   d["baseline_mean"], d["baseline_draws"],
                   d["baseline_skipped"], d["hyperparams"], d["seed"])


def default_p(n: int) -> int:
    """Default number of sensors to turn off: 10% of the network."""
    if n < 2:
        raise InvalidInputError("need at least 2 sensors")
    return max(1, math.ceil(0.10 * n))


def _interval_mse(reconstructor, X, lo: int, hi: int) -> float:
    if hi > X.shape[1] or not 0 <= lo < hi:
        raise InvalidInputError(f"bad scoring interval [{lo}, {hi})")
    rows = [int(i) for i in reconstructor.turned_off]
    pred = reconstructor.predict_panel(X, lo, hi)
    actual = X[np.ix_(rows, np.arange(lo, hi))]
    return float(np.sum((actual - pred) ** 2) / (hi - lo))


def test_mse(reconstructor, X, I, split: Split) -> float:
    """Mean over test rows of the squared error summed over the set I."""
    X = np.asarray(X, dtype=float)
    rows = [int(i) for i in reconstructor.turned_off]
    if set(rows) != {int(i) for i in I}:
        raise InvalidInputError(
            f"reconstructor was fitted for {rows}, not {sorted(int(i) for i in I)}"
        )
    return _interval_mse(reconstructor, X, split.t0, split.t1)


class BaselineResult(NamedTuple):
    mean_mse: float
    draws: int
    skipped: int


def random_baseline(fit_fn: Callable, X, p: int, split: Split, draws: int = 100,
                    seed: int = 0) -> BaselineResult:
    """Average test MSE over uniformly drawn size-p subsets.

    fit_fn(I) must return a reconstructor for the sorted subset I. Fit
    failures are skipped and counted. Each draw gets its own RNG stream
    spawned from the seed, so a parallel run would agree with this one.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not (1 <= p < n):
        raise InvalidInputError(f"need 1 <= p < {n}, got p={p}")
    if draws < 1:
        raise InvalidInputError("draws must be positive")
    streams = np.random.SeedSequence(seed).spawn(draws)
    total = 0.0
    skipped = 0
    for stream in streams:
        rng = np.random.default_rng(stream)
        I = sorted(int(i) for i in rng.choice(n, size=p, replace=False))
        try:
            rec = fit_fn(I)
            total += test_mse(rec, X, I, split)
        except NetselectError as err:
            warnings.warn(f"baseline draw skipped for {I}: {err}")
            skipped += 1
    ok = draws - skipped
    if ok == 0:
        raise InvalidInputError("every baseline draw failed to fit")
    return BaselineResult(total / ok, draws, skipped)


def gamma_grid(H: int, r_s: float = 0.5) -> float:
    """Temporal kernel decay gamma = -ln(r_s) / H^2.

    r_s is the target ratio exp(-gamma H^2) at the largest lag used.
    """
    if H < 1:
        raise InvalidInputError("gamma is undefined at H = 0; no temporal kernel needed")
    if not (0.0 < r_s < 1.0):
        raise InvalidInputError("r_s must lie in (0, 1)")
    return -math.log(r_s) / H ** 2


def lambda_grid(lambda_max: float, coefficients=LAMBDA_COEFFICIENTS) -> List[float]:
    """Ridge grid lambda_i = a_i * lambda_max."""
    if lambda_max < 0:
        raise InvalidInputError("lambda_max must be nonnegative")
    if lambda_max == 0:
        warnings.warn("lambda_max is 0; the ridge grid collapses to all zeros")
    return [float(a) * float(lambda_max) for a in coefficients]


class GridSearchResult(NamedTuple):
    config: object
    result: SelectionResult
    val_error: float
    failures: List[str]


def grid_search(select_fn: Callable, grid, X, split: Split) -> GridSearchResult:
    """Pick the grid config whose selection reconstructs validation rows best.

    select_fn(config) runs selection and fitting on training rows only
    and returns (SelectionResult, reconstructor). Scoring uses the
    validation interval; ties keep the earliest grid entry. Configs that
    raise are recorded and skipped; if all fail the errors are raised
    together.
    """
    grid = list(grid)
    if not grid:
        raise InvalidInputError("grid must be nonempty")
    X = np.asarray(X, dtype=float)
    best = None
    failures: List[str] = []
    for config in grid:
        try:
            result, rec = select_fn(config)
            err = _interval_mse(rec, X, split.t_tv, split.t0)
        except NetselectError as exc:
            failures.append(f"{config!r}: {exc}")
            continue
        if best is None or err < best[2]:
            best = (config, result, err)
    if best is None:
        raise InvalidInputError(
            "every grid config failed: " + "; ".join(failures)
        )
    return GridSearchResult(best[0], best[1], best[2], failures)


def _hourly_panel(values: np.ndarray) -> PanelSeries:
    n, T = values.shape
    sensor_ids = [f"s{i:03d}" for i in range(n)]
    timestamps = np.arange(T, dtype=float) * HOUR
    return PanelSeries(sensor_ids, timestamps, values)


def synth_generate(graph: SensorGraph, T: int, model: str = "var1", seed: int = 0,
                   **kwargs) -> PanelSeries:
    """Synthetic hourly panel on a sensor graph.

    var1: x_t = A x_{t-1} + noise with A supported on the graph edges
    (plus the diagonal) and rescaled to the requested spectral radius
    (default 0.8, capped at 0.95). kwargs: spectral_radius, noise_std.

    graph-smooth: a few lowest graph Fourier modes with AR(1)
    coefficients plus per-sensor noise. kwargs: n_modes (3), ar_coef
    (0.9), noise_std (0.3), redundant_pairs (list of (src, dup) where
    dup copies src's signal with noise redundant_noise = 0.005), and
    noise_sensors (indices replaced by pure noise, std 1).

    Both models run a 500-step burn-in so the returned T columns are
    from the stationary regime.
    """
    if model not in SYNTH_MODELS:
        raise InvalidInputError(f"model must be one of {SYNTH_MODELS}")
    if T < 1:
        raise InvalidInputError("T must be positive")
    n = graph.n
    rng = np.random.default_rng(seed)

    if model == "var1":
        rho = float(kwargs.pop("spectral_radius", 0.8))
        noise_std = float(kwargs.pop("noise_std", 1.0))
        if kwargs:
            raise InvalidInputError(f"unknown kwargs {sorted(kwargs)}")
        if rho > 0.95:
            raise InvalidInputError(
                f"spectral radius {rho} exceeds the stability cap 0.95"
            )
        if rho < 0:
            raise InvalidInputError("spectral radius must be nonnegative")
        support = (graph.adjacency > 0).astype(float) + np.eye(n)
        A = support * rng.normal(size=(n, n))
        radius = float(np.max(np.abs(np.linalg.eigvals(A))))
        A = A * (rho / radius) if radius > 0 and rho > 0 else np.zeros((n, n))
        X = np.zeros((n, BURN_IN + T))
        x = np.zeros(n)
        for t in range(BURN_IN + T):
            x = A @ x + rng.normal(scale=noise_std, size=n)
            X[:, t] = x
        return _hourly_panel(X[:, BURN_IN:])

    n_modes = int(kwargs.pop("n_modes", 3))
    ar_coef = float(kwargs.pop("ar_coef", 0.9))
    noise_std = float(kwargs.pop("noise_std", 0.3))
    redundant_noise = float(kwargs.pop("redundant_noise", 0.005))
    redundant_pairs = list(kwargs.pop("redundant_pairs", []))
    noise_sensors = sorted(int(i) for i in kwargs.pop("noise_sensors", ()))
    if kwargs:
        raise InvalidInputError(f"unknown kwargs {sorted(kwargs)}")
    if not (1 <= n_modes <= n):
        raise InvalidInputError(f"n_modes must lie in [1, {n}]")
    if not (0.0 <= ar_coef < 1.0):
        raise InvalidInputError("ar_coef must lie in [0, 1) for stationarity")
    spec = graph_spectrum(combinatorial_laplacian(graph))
    modes = spec.eig.vectors[:, :n_modes]
    coef = np.zeros((n_modes, BURN_IN + T))
    c = np.zeros(n_modes)
    for t in range(BURN_IN + T):
        c = ar_coef * c + rng.normal(size=n_modes)
        coef[:, t] = c
    signal = modes @ coef[:, BURN_IN:]
    X = signal + rng.normal(scale=noise_std, size=(n, T))
    for src, dup in redundant_pairs:
        src, dup = int(src), int(dup)
        if not (0 <= src < n and 0 <= dup < n) or src == dup:
            raise InvalidInputError(f"bad redundant pair ({src}, {dup})")
        X[dup] = signal[src] + rng.normal(scale=redundant_noise, size=T)
    for i in noise_sensors:
        if not 0 <= i < n:
            raise InvalidInputError(f"noise sensor {i} out of range")
        X[i] = rng.normal(size=T)
    return _hourly_panel(X)


def summary_table_csv(reports: List[EvalReport], path, horizons=None):
    """Summary grid, methods down the rows and horizons across the
    columns, each cell "test (baseline)"."""
    if horizons is None:
        horizons = sorted({int(r.hyperparams.get("H", 0)) for r in reports})
    cells: Dict[Tuple[str, int], EvalReport] = {}
    for r in reports:
        key = (r.method, int(r.hyperparams.get("H", 0)))
        if key in cells:
            raise InvalidInputError(f"duplicate report for {key}")
        cells[key] = r
    methods = [m for m in METHOD_TAGS if any(k[0] == m for k in cells)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method"] + [f"H={h}" for h in horizons])
        for m in methods:
            row = [m]
            for h in horizons:
                r = cells.get((m, h))
                if r is None:
                    row.append("")
                elif r.baseline_mean is None:
                    row.append(f"{r.test_mse:.4g}")
                else:
                    row.append(f"{r.test_mse:.4g} ({r.baseline_mean:.4g})")
            writer.writerow(row)
