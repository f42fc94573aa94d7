"""Smoke test for the GCN stack: gradient check, training, both selectors."""

import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from netselect.gcn import (
    ChebNetConfig,
    TrainConfig,
    init_params,
    net_backward,
    pack_params,
    scale_laplacian,
    train_prediction_net,
    train_selection_dropout,
    train_selection_masking,
    unpack_params,
)
from netselect.gcn.layers import forward_batch
from netselect.graph import build_knn_graph, combinatorial_laplacian
from netselect.numerics import power_method
from netselect.timeseries import Split


def numeric_grad(x_input, target, params, config, Lt, eps=1e-6):
    from netselect.gcn.layers import net_forward

    flat = pack_params(params)
    g = np.zeros_like(flat)
    for i in range(flat.size):
        for sgn, slot in ((1.0, 0), (-1.0, 1)):
            pert = flat.copy()
            pert[i] += sgn * eps
            out = net_forward(x_input, unpack_params(pert, params), config, Lt)
            val = float(np.sum((out - target) ** 2))
            if slot == 0:
                plus = val
            else:
                minus = val
        g[i] = (plus - minus) / (2 * eps)
    return g


def main():
    rng = np.random.default_rng(0)
    n, K, h = 6, 3, 2
    coords = rng.normal(size=(n, 2))
    g = build_knn_graph(coords, k0=3, k1=2)
    L = combinatorial_laplacian(g)
    lam_max = power_method(L).value
    Lt = scale_laplacian(L, lam_max)

    config = ChebNetConfig(n=n, cheb_order=K, f_out=2, fc_sizes=(4,), out_dim=n, h=h)
    params = init_params(config, seed=1)
    x_input = rng.normal(size=(n, h + 1))
    target = rng.normal(size=n)

    t0 = time.monotonic()
    _, grads = net_backward(x_input, target, params, config, Lt)
    ana = pack_params(grads)
    num = numeric_grad(x_input, target, params, config, Lt)
    denom = np.maximum(np.abs(num), 1.0)
    rel = np.max(np.abs(ana - num) / denom)
    print(f"grad check: max rel err {rel:.3e} over {ana.size} entries "
          f"({time.monotonic() - t0:.2f}s)")
    assert rel < 1e-4

    # masked-output gradient (only a subset of outputs in the loss)
    mask = np.zeros(n)
    mask[[1, 4]] = 1.0
    _, grads_m = net_backward(x_input, target, params, config, Lt, out_mask=mask)
    flat = pack_params(params)
    gm = np.zeros_like(flat)
    from netselect.gcn.layers import net_forward
    for i in range(flat.size):
        pert = flat.copy(); pert[i] += 1e-6
        vp = float(np.sum(mask * (net_forward(x_input, unpack_params(pert, params), config, Lt) - target) ** 2))
        pert[i] -= 2e-6
        vm = float(np.sum(mask * (net_forward(x_input, unpack_params(pert, params), config, Lt) - target) ** 2))
        gm[i] = (vp - vm) / 2e-6
    relm = np.max(np.abs(pack_params(grads_m) - gm) / np.maximum(np.abs(gm), 1.0))
    print(f"masked grad check: max rel err {relm:.3e}")
    assert relm < 1e-4

    # input-gradient check via batched backward
    from netselect.gcn.layers import backward_batch
    Xb = x_input[None]
    out, cache = forward_batch(Xb, params, config, Lt, want_cache=True)
    resid = out - target[None]
    _, dXb = backward_batch(2 * resid, cache, params, config, Lt, want_input_grad=True)
    gx = np.zeros_like(x_input)
    for i in range(n):
        for l in range(h + 1):
            xp = x_input.copy(); xp[i, l] += 1e-6
            vp = float(np.sum((net_forward(xp, params, config, Lt) - target) ** 2))
            xp[i, l] -= 2e-6
            vm = float(np.sum((net_forward(xp, params, config, Lt) - target) ** 2))
            gx[i, l] = (vp - vm) / 2e-6
    relx = np.max(np.abs(dXb[0] - gx) / np.maximum(np.abs(gx), 1.0))
    print(f"input grad check: max rel err {relx:.3e}")
    assert relx < 1e-4

    # end-to-end training on a small smooth panel
    T = 400
    X = rng.normal(size=(n, T)).cumsum(axis=1) * 0.05
    X += rng.normal(size=(n, 1))
    split = Split(t_tv=300, t0=340, t1=400)
    I = [2, 5]
    cfg_pred = ChebNetConfig(n=n, cheb_order=K, f_out=2, fc_sizes=(8,), out_dim=len(I), h=0)
    tc = TrainConfig(optimizer="adam", lr=0.01, batch_size=50, max_epoch=20,
                     early_stop="two-epoch-mean", seed=0)
    t0 = time.monotonic()
    params_p, vl = train_prediction_net(X, split, Lt, I, cfg_pred, tc)
    print(f"prediction net: {len(vl)} epochs, val loss {vl[0]:.4f} -> {vl[-1]:.4f} "
          f"({time.monotonic() - t0:.2f}s)")

    cfg_sel = ChebNetConfig(n=n, cheb_order=K, f_out=2, fc_sizes=(8,), out_dim=n, h=0)
    tc_drop = TrainConfig(optimizer="gd", lr=0.005, batch_size=50, max_epoch=15,
                          early_stop="five-epoch-mean", seed=0)
    t0 = time.monotonic()
    scores, res_d, diag = train_selection_dropout(X, split, Lt, 2, cfg_sel, tc_drop)
    print(f"dropout: order {res_d.order}, measure {scores.measure}, "
          f"resampled {diag['resampled']}, {len(diag['val_losses'])} epochs "
          f"({time.monotonic() - t0:.2f}s)")

    tc_mask = TrainConfig(optimizer="adam", lr=0.01, batch_size=50, max_epoch=5,
                          early_stop="none", seed=0)
    t0 = time.monotonic()
    res_m, path = train_selection_masking(X, split, Lt, 2, [0.001, 0.01, 0.1],
                                          0.05, cfg_sel, tc_mask)
    print(f"masking: order {res_m.order}, F {res_m.step_values}, "
          f"final masks {np.round(path[-1], 3)} ({time.monotonic() - t0:.2f}s)")

    print("gcn smoke OK")


if __name__ == "__main__":
    main()
