"""Desk-scale tuning for the dropout/masking sanity checks.

Setup: graph-smooth panel, N = 20, sensors 1 and 2 duplicate sensor 0's
signal (noise 0.005), sensor 19 is pure noise. p = 2. Three seeds.
"""

import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from netselect.evaluation import random_baseline, synth_generate, test_mse
from netselect.gcn import ChebNetConfig, TrainConfig, scale_laplacian
from netselect.gcn.selection import train_selection_dropout, train_selection_masking
from netselect.graph import build_knn_graph, combinatorial_laplacian
from netselect.numerics import power_method
from netselect.select_linear import fit_predict_linear
from netselect.timeseries import estimate_blocks, make_split


def build_instance(seed):
    rng = np.random.default_rng(100 + seed)
    coords = rng.normal(size=(20, 2))
    g = build_knn_graph(coords, k0=6, k1=3)
    panel = synth_generate(g, 1500, "graph-smooth", seed=seed,
                           redundant_pairs=[(0, 1), (0, 2)], noise_sensors=[19])
    X = panel.values
    split = make_split(X.shape[1])
    L = combinatorial_laplacian(g)
    Lt = scale_laplacian(L, power_method(L).value)
    return X, split, Lt


def main():
    net = ChebNetConfig(n=20, cheb_order=3, f_out=4, fc_sizes=(32,),
                        out_dim=20, h=0)
    drop_tc = dict(optimizer="gd", lr=0.02, batch_size=50, max_epoch=60,
                   early_stop="five-epoch-mean")
    mask_lams = list(np.linspace(0.05, 0.5, 8))
    mask_tc = dict(optimizer="adam", lr=0.01, batch_size=50, max_epoch=8,
                   early_stop="none")

    mse_wins = 0
    top3_wins = 0
    mask_wins = 0
    for seed in (0, 1, 2):
        X, split, Lt = build_instance(seed)
        blocks = estimate_blocks(X[:, :split.t_tv], 0)

        t0 = time.monotonic()
        scores, result, diag = train_selection_dropout(
            X, split, Lt, 2, net, TrainConfig(seed=seed, **drop_tc))
        t_drop = time.monotonic() - t0

        rec = fit_predict_linear(blocks, result.order, 0)
        sel_mse = test_mse(rec, X, result.order, split)
        base = random_baseline(lambda I: fit_predict_linear(blocks, I, 0),
                               X, 2, split, draws=100, seed=seed)
        mse_ok = sel_mse <= base.mean_mse
        top3 = set(scores.ranking[:3])
        top3_ok = {1, 2} <= top3
        mse_wins += mse_ok
        top3_wins += top3_ok

        t0 = time.monotonic()
        mres, mpath = train_selection_masking(
            X, split, Lt, 2, mask_lams, 0.01, net,
            TrainConfig(seed=seed, **mask_tc))
        t_mask = time.monotonic() - t0
        F = (mpath < 0.01).sum(axis=0)
        rank_pos = {i: k for k, i in enumerate(
            sorted(range(20), key=lambda i: (-F[i], mpath[-1][i], i)))}
        mask_ok = rank_pos[1] < rank_pos[19] and rank_pos[2] < rank_pos[19]
        mask_wins += mask_ok

        print(f"seed {seed}: drop order {result.order} r2[1,2,19]="
              f"{scores.scores[1]:.3f},{scores.scores[2]:.3f},{scores.scores[19]:.3f} "
              f"epochs {len(diag['val_losses'])} ({t_drop:.1f}s) | "
              f"mse {sel_mse:.3f} vs base {base.mean_mse:.3f} [{'OK' if mse_ok else 'X'}] | "
              f"top3 {sorted(top3)} [{'OK' if top3_ok else 'X'}] | "
              f"mask F[1,2,19]={F[1]},{F[2]},{F[19]} w_last[1,2,19]="
            f"{mpath[-1][1]:.3f},{mpath[-1][2]:.3f},{mpath[-1][19]:.3f} "
              f"[{'OK' if mask_ok else 'X'}] ({t_mask:.1f}s)")

    print(f"mse {mse_wins}/3, top3 {top3_wins}/3, mask {mask_wins}/3")


if __name__ == "__main__":
    main()
