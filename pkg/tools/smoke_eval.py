"""Smoke test for evaluation: baselines, grids, synthetic generators."""

import sys

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from netselect.evaluation import (
    BaselineResult,
    EvalReport,
    default_p,
    gamma_grid,
    grid_search,
    lambda_grid,
    random_baseline,
    synth_generate,
    test_mse,
)
from netselect.graph import build_knn_graph
from netselect.select_linear import fit_predict_linear, greedy_select_linear
from netselect.timeseries import estimate_blocks, make_split


def main():
    rng = np.random.default_rng(7)
    coords = rng.normal(size=(20, 2))
    g = build_knn_graph(coords, k0=6, k1=3)

    print(f"gamma: {gamma_grid(1):.3f} {gamma_grid(5):.3f} {gamma_grid(10):.3f}")
    print(f"gamma r_s=0.3: {gamma_grid(1, 0.3):.3f} {gamma_grid(5, 0.3):.3f} "
          f"{gamma_grid(10, 0.3):.3f}")
    print(f"lambda grid: {lambda_grid(1000.0)}")
    print(f"default_p: {default_p(270)} (Paris-sized), {default_p(20)}")

    panel = synth_generate(g, 2000, "var1", seed=3)
    X = panel.values
    split = make_split(X.shape[1])
    blocks = estimate_blocks(X[:, :split.t_tv], H=0)
    sel = greedy_select_linear(blocks, p=2)
    rec = fit_predict_linear(blocks, sel.order, H=0)
    mse_sel = test_mse(rec, X, sel.order, split)
    base = random_baseline(lambda I: fit_predict_linear(blocks, I, 0), X, 2,
                           split, draws=30, seed=0)
    print(f"var1 greedy test MSE {mse_sel:.4f} vs baseline {base.mean_mse:.4f} "
          f"(skipped {base.skipped})")
    assert isinstance(base, BaselineResult)

    # same-seed baseline reproducibility
    base2 = random_baseline(lambda I: fit_predict_linear(blocks, I, 0), X, 2,
                            split, draws=30, seed=0)
    assert base.mean_mse == base2.mean_mse

    # graph-smooth with redundancy structure
    panel2 = synth_generate(g, 1500, "graph-smooth", seed=5,
                            redundant_pairs=[(0, 1)], noise_sensors=[19])
    X2 = panel2.values
    corr = np.corrcoef(X2)
    print(f"redundant pair corr {corr[0, 1]:.4f}, noise sensor max |corr| "
          f"{np.max(np.abs(corr[19, :19])):.4f}")

    # bytes determinism
    panel2b = synth_generate(g, 1500, "graph-smooth", seed=5,
                             redundant_pairs=[(0, 1)], noise_sensors=[19])
    assert np.array_equal(panel2.values, panel2b.values)

    # grid search over H for the linear method
    def run_h(Hc):
        b = estimate_blocks(X[:, :split.t_tv], H=Hc)
        s = greedy_select_linear(b, p=2, H=Hc)
        return s, fit_predict_linear(b, s.order, H=Hc)

    gs = grid_search(run_h, [0, 1, 2], X, split)
    print(f"grid search picked H={gs.config} val err {gs.val_error:.4f} "
          f"failures {gs.failures}")

    rep = EvalReport("linear-h0", sel.order, mse_sel, base.mean_mse, 30, 0,
                     {"H": 0, "p": 2}, 0)
    rep2 = EvalReport.from_json(rep.to_json())
    assert rep2 == rep
    print("eval smoke OK")


if __name__ == "__main__":
    main()
