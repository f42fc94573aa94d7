"""Command line surface: ingest -> select -> evaluate.

Every command is deterministic given --seed and its inputs; outputs are
byte-identical across reruns. Exit codes: 0 success, 2 input error,
3 computation error.
"""

import argparse
import json
import os
import sys

import numpy as np

from .errors import InvalidInputError, NetselectError, PartitionError
from .evaluation import (
    EvalReport,
    default_p,
    gamma_grid,
    grid_search,
    lambda_grid,
    random_baseline,
    summary_table_csv,
    test_mse,
)
from .gcn import (
    ChebNetConfig,
    NetReconstructor,
    TrainConfig,
    scale_laplacian,
    train_prediction_net,
    train_selection_dropout,
    train_selection_masking,
    write_scores_csv,
)
from .graph import (
    build_knn_graph,
    combinatorial_laplacian,
    normalized_laplacian,
    read_coords,
)
from .numerics import power_method
from .select_kernel import (
    KERNEL_TAGS,
    KernelConfig,
    assemble_kernel,
    build_kernel_blocks,
    fit_predict_kernel,
    greedy_select_kernel,
)
from .select_linear import (
    SelectionResult,
    fit_predict_linear,
    greedy_select_linear,
)
from .timeseries import (
    Split,
    apply_preprocess,
    clean_stations,
    estimate_blocks,
    fit_weekly_profile,
    interpolate_hourly,
    make_split,
    read_panel,
    read_raw_records,
    write_panel,
)

METHODS = ("linear", "kernel", "gcn-dropout", "gcn-mask")
LAPLACIANS = ("combinatorial", "normalized")


def _threads(args):
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("NETSELECT_THREADS", "1"))


def _int_list(text):
    return [int(part) for part in text.split(",") if part.strip()]


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _resolve_split(args, t_total) -> Split:
    if args.split:
        sizes = _int_list(args.split)
        if len(sizes) != 3:
            raise InvalidInputError("--split needs train,val,test sizes")
        if sum(sizes) != t_total:
            raise InvalidInputError(
                f"--split sizes sum to {sum(sizes)}, panel has {t_total} hours"
            )
        return Split(sizes[0], sizes[0] + sizes[1], t_total)
    return make_split(t_total, args.val_frac, args.test_frac)


def _align_coords(panel, coords_path):
    """Coordinates reordered to the panel's sensor order."""
    ids, coords = read_coords(coords_path)
    index = {sid: k for k, sid in enumerate(ids)}
    missing = [sid for sid in panel.sensor_ids if sid not in index]
    if missing:
        raise InvalidInputError(
            f"{coords_path}: no coordinates for sensors {missing[:5]}"
            + ("..." if len(missing) > 5 else "")
        )
    return coords[[index[sid] for sid in panel.sensor_ids]]


def _laplacian(graph, tag):
    if tag == "normalized":
        return normalized_laplacian(graph)
    return combinatorial_laplacian(graph)


def _prepare_panel(args):
    """Shared select/evaluate front end: read, split, optionally standardize."""
    panel = read_panel(args.panel)
    split = _resolve_split(args, panel.t_total)
    if args.standardize:
        model = fit_weekly_profile(panel, split)
        panel_p = apply_preprocess(panel, model)
        return panel, panel_p.values, split
    return panel, panel.values, split


def _geojson(result: SelectionResult, sensor_ids, coords):
    features = []
    for rank, i in enumerate(result.order, start=1):
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [float(coords[i, 1]), float(coords[i, 0])],
                },
                "properties": {
                    "sensor_id": sensor_ids[i],
                    "rank": rank,
                    "step_value": float(result.step_values[rank - 1]),
                },
            }
        )
    return json.dumps(
        {"type": "FeatureCollection", "features": features},
        indent=2,
        sort_keys=True,
    )


def cmd_ingest(args):
    records = read_raw_records(args.raw_csv)
    kept = clean_stations(records, args.rc, args.min_records)
    if not kept:
        raise InvalidInputError(
            f"no station passes the cleaning rule (rc={args.rc}, "
            f"min {args.min_records} records)"
        )
    panel = interpolate_hourly(records, kept)
    os.makedirs(args.out_dir, exist_ok=True)
    panel_path = os.path.join(args.out_dir, "panel.csv")
    write_panel(panel, panel_path)
    manifest_path = os.path.join(args.out_dir, "stations.csv")
    lines = ["station,max_bikes"]
    lines += [f"{station},{int(mb)}" for station, mb in kept
              if station in set(panel.sensor_ids)]
    _write_text(manifest_path, "\n".join(lines))
    print(f"ingested {len(panel.sensor_ids)} stations x {panel.t_total} hours "
          f"-> {panel_path}, {manifest_path}")
    return 0


def _select_kernel_cmd(args, X, split, graph, n, threads):
    H = args.H
    gamma = args.gamma
    if gamma is None:
        gamma = gamma_grid(H, args.r_s) if H > 0 else 0.0
    X_train = X[:, :split.t_tv]
    cov = estimate_blocks(X_train, H)
    kcfg = KernelConfig(kernel=args.kernel, gamma=gamma, lam=0.0, H=H, r=args.r)
    kb = build_kernel_blocks(kcfg, graph=graph, X_train=X_train)

    if args.lam is not None:
        lam_list = [args.lam]
    else:
        K_full = assemble_kernel(kb, range(n), range(n), H)
        lam_max = power_method(K_full).value
        lam_list = lambda_grid(lam_max)

    def run(lam):
        res = greedy_select_kernel(cov, kb, args.p, lam=lam, H=H,
                                   use_cg=args.cg, threads=threads)
        rec = fit_predict_kernel(cov, kb, res.order, lam, H)
        return res, rec

    if len(lam_list) == 1:
        result, _ = run(lam_list[0])
        lam_star = lam_list[0]
        val_error = None
    else:
        gs = grid_search(run, lam_list, X, split)
        result, lam_star, val_error = gs.result, gs.config, gs.val_error
    extras = {
        "kernel": args.kernel,
        "gamma": gamma,
        "lambda": float(lam_star),
        "lambda_grid": [float(v) for v in lam_list],
        "r": args.r,
        "use_cg": bool(args.cg),
    }
    if val_error is not None:
        extras["validation_error"] = val_error
    return result, extras


def cmd_select(args):
    panel, X, split = _prepare_panel(args)
    n = X.shape[0]
    p = args.p if args.p is not None else default_p(n)
    threads = _threads(args)
    coords = _align_coords(panel, args.coords)

    needs_graph = args.method in ("gcn-dropout", "gcn-mask") or (
        args.method == "kernel"
        and args.kernel in ("laplacian", "spatial-temporal", "rbf")
    )
    graph = build_knn_graph(coords, args.k0, args.k1) if needs_graph else None

    scores = None
    mask_path_values = None
    if args.method == "linear":
        blocks = estimate_blocks(X[:, :split.t_tv], args.H)
        result = greedy_select_linear(blocks, p, H=args.H, threads=threads)
        extras = {}
    elif args.method == "kernel":
        result, extras = _select_kernel_cmd(args, X, split, graph, n, threads)
    else:
        L = _laplacian(graph, args.laplacian)
        Lt = scale_laplacian(L, power_method(L).value)
        net = ChebNetConfig(n=n, cheb_order=args.cheb_order, f_out=args.f_out,
                            fc_sizes=tuple(_int_list(args.fc_sizes)),
                            out_dim=n, h=args.H)
        extras = {
            "laplacian": args.laplacian,
            "cheb_order": args.cheb_order,
            "f_out": args.f_out,
            "fc_sizes": _int_list(args.fc_sizes),
            "lr": args.lr,
            "batch_size": args.batch_size,
            "max_epoch": args.max_epoch,
        }
        if args.method == "gcn-dropout":
            tc = TrainConfig(optimizer="gd", lr=args.lr,
                             batch_size=args.batch_size,
                             max_epoch=args.max_epoch,
                             early_stop="five-epoch-mean", seed=args.seed)
            scores, result, _ = train_selection_dropout(
                X, split, Lt, p, net, tc, measure=args.measure)
            extras["measure"] = scores.measure
        else:
            tc = TrainConfig(optimizer="adam", lr=args.lr,
                             batch_size=args.batch_size,
                             max_epoch=args.max_epoch,
                             early_stop="none", seed=args.seed)
            lam_grid = list(np.linspace(args.mask_lambda_min,
                                        args.mask_lambda_max,
                                        args.mask_lambda_count))
            result, mask_path_values = train_selection_masking(
                X, split, Lt, p, lam_grid, args.eps0, net, tc)
            extras["eps0"] = args.eps0
            extras["mask_lambda_grid"] = [float(v) for v in lam_grid]

    result.hyperparams.update(extras)
    result.hyperparams.update(
        {
            "n": n,
            "p": p,
            "H": args.H,
            "seed": args.seed,
            "standardize": bool(args.standardize),
            "split": [split.t_tv, split.t0, split.t1],
            "k0": args.k0,
            "k1": args.k1,
        }
    )

    os.makedirs(args.out_dir, exist_ok=True)
    sel_path = os.path.join(args.out_dir, "selection.json")
    _write_text(sel_path, result.to_json())
    geo_path = os.path.join(args.out_dir, "selected.geojson")
    _write_text(geo_path, _geojson(result, panel.sensor_ids, coords))
    written = [sel_path, geo_path]
    if scores is not None:
        scores_path = os.path.join(args.out_dir, "scores.csv")
        write_scores_csv(scores, panel.sensor_ids, scores_path)
        written.append(scores_path)
    if mask_path_values is not None:
        path_csv = os.path.join(args.out_dir, "mask_path.csv")
        grid = result.hyperparams["mask_lambda_grid"]
        lines = ["lambda," + ",".join(panel.sensor_ids)]
        for lam, row in zip(grid, mask_path_values):
            lines.append(format(lam, ".17g") + ","
                         + ",".join(format(v, ".17g") for v in row))
        _write_text(path_csv, "\n".join(lines))
        written.append(path_csv)
    names = [panel.sensor_ids[i] for i in result.order]
    print(f"{result.method} selected {len(result.order)} sensors: "
          f"{' '.join(names)}")
    print("wrote " + ", ".join(written))
    return 0


def _evaluate_fit_fn(args, sel, X, split, panel):
    """Reconstructor factory for the stored method, reused for baselines."""
    hp = sel.hyperparams
    H = int(hp.get("H", 0))
    X_train = X[:, :split.t_tv]
    if sel.method.startswith("linear"):
        blocks = estimate_blocks(X_train, H)
        return lambda I: fit_predict_linear(blocks, I, H)
    if sel.method.startswith("kernel"):
        kcfg = KernelConfig(kernel=hp.get("kernel", "autocovariance"),
                            gamma=float(hp.get("gamma", 0.0)),
                            lam=0.0, H=H, r=hp.get("r", "pinv"))
        graph = None
        if kcfg.kernel in ("laplacian", "spatial-temporal", "rbf"):
            if args.coords is None:
                raise InvalidInputError(
                    f"--coords is required to rebuild the {kcfg.kernel} kernel"
                )
            coords = _align_coords(panel, args.coords)
            graph = build_knn_graph(coords, int(hp.get("k0", 20)),
                                    int(hp.get("k1", 7)))
        kb = build_kernel_blocks(kcfg, graph=graph, X_train=X_train)
        cov = estimate_blocks(X_train, H)
        lam = float(hp.get("lambda", 0.0))
        return lambda I: fit_predict_kernel(cov, kb, I, lam, H)
    # gcn: retrain the prediction network for each requested set
    if args.coords is None:
        raise InvalidInputError("--coords is required for gcn evaluation")
    coords = _align_coords(panel, args.coords)
    graph = build_knn_graph(coords, int(hp.get("k0", 20)), int(hp.get("k1", 7)))
    L = _laplacian(graph, hp.get("laplacian", "combinatorial"))
    Lt = scale_laplacian(L, power_method(L).value)
    n = X.shape[0]
    tc = TrainConfig(optimizer="adam", lr=args.lr, batch_size=args.batch_size,
                     max_epoch=args.max_epoch, early_stop="two-epoch-mean",
                     seed=args.seed)

    def fit(I):
        net = ChebNetConfig(n=n, cheb_order=int(hp.get("cheb_order", 50)),
                            f_out=int(hp.get("f_out", 16)),
                            fc_sizes=tuple(hp.get("fc_sizes", [128, 500, 64])),
                            out_dim=len(I), h=H)
        params, _ = train_prediction_net(X, split, Lt, I, net, tc)
        return NetReconstructor(params, net, Lt, list(I))

    return fit


def cmd_evaluate(args):
    panel = read_panel(args.panel)
    with open(args.selection, encoding="utf-8") as fh:
        sel = SelectionResult.from_json(fh.read())
    hp = sel.hyperparams
    n = panel.n
    if "n" in hp and int(hp["n"]) != n:
        raise PartitionError(
            f"selection was made for {hp['n']} sensors, panel has {n}"
        )
    if any(i >= n for i in sel.order):
        raise PartitionError(f"selection order {sel.order} exceeds panel size {n}")

    if "split" in hp:
        split = Split(*[int(v) for v in hp["split"]])
        if split.t1 != panel.t_total:
            raise PartitionError(
                f"stored split covers {split.t1} hours, panel has {panel.t_total}"
            )
    else:
        split = _resolve_split(args, panel.t_total)
    if hp.get("standardize", False):
        model = fit_weekly_profile(panel, split)
        X = apply_preprocess(panel, model).values
    else:
        X = panel.values

    fit_fn = _evaluate_fit_fn(args, sel, X, split, panel)
    rec = fit_fn(sel.order)
    mse = test_mse(rec, X, sel.order, split)
    base = random_baseline(fit_fn, X, len(sel.order), split,
                           draws=args.baseline_draws, seed=args.seed)
    report = EvalReport(
        method=sel.method,
        selected=sel.order,
        test_mse=mse,
        baseline_mean=base.mean_mse,
        baseline_draws=base.draws,
        baseline_skipped=base.skipped,
        hyperparams=hp,
        seed=args.seed,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    report_path = os.path.join(args.out_dir, "report.json")
    _write_text(report_path, report.to_json())
    table_path = os.path.join(args.out_dir, "summary.csv")
    summary_table_csv([report], table_path)
    print(f"{sel.method}: test MSE {mse:.4f}, baseline {base.mean_mse:.4f} "
          f"over {base.draws} draws ({base.skipped} skipped)")
    print(f"wrote {report_path}, {table_path}")
    return 0


def _add_split_flags(sub):
    sub.add_argument("--split", default=None,
                     help="train,val,test sizes in hours (must sum to T)")
    sub.add_argument("--val-frac", type=float, default=0.05)
    sub.add_argument("--test-frac", type=float, default=0.15)
    sub.add_argument("--standardize", action="store_true",
                     help="remove the weekly profile and scale by train std")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="netselect",
        description="Sensor subset selection for networks of time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="clean raw records into an hourly panel")
    ing.add_argument("raw_csv")
    ing.add_argument("--rc", type=float, default=0.5,
                     help="minimum share of consistent records to keep a station")
    ing.add_argument("--min-records", type=int, default=100)
    ing.add_argument("--out-dir", default=".")
    ing.set_defaults(func=cmd_ingest)

    slc = sub.add_parser("select", help="choose the sensors to turn off")
    slc.add_argument("panel")
    slc.add_argument("--coords", required=True,
                     help="sensor_id,lat,lon CSV; required for output maps")
    slc.add_argument("--method", choices=METHODS, default="linear")
    slc.add_argument("--p", type=int, default=None,
                     help="sensors to turn off (default 10%% of N)")
    slc.add_argument("--H", type=int, default=0, help="input history length")
    slc.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="ridge strength; default searches the a_i grid")
    slc.add_argument("--gamma", type=float, default=None,
                     help="temporal decay; default -ln(r_s)/H^2")
    slc.add_argument("--r-s", type=float, default=0.5,
                     help="target temporal kernel value at lag H")
    slc.add_argument("--kernel", choices=KERNEL_TAGS, default="laplacian")
    slc.add_argument("--r", default="pinv",
                     help="spectral map for the laplacian kernel")
    slc.add_argument("--cg", action="store_true",
                     help="solve kernel systems by conjugate gradient")
    slc.add_argument("--seed", type=int, default=0)
    slc.add_argument("--threads", type=int, default=None,
                     help="candidate-parallel threads (env NETSELECT_THREADS)")
    slc.add_argument("--k0", type=int, default=20)
    slc.add_argument("--k1", type=int, default=7)
    slc.add_argument("--laplacian", choices=LAPLACIANS, default="combinatorial")
    slc.add_argument("--cheb-order", type=int, default=50)
    slc.add_argument("--f-out", type=int, default=16)
    slc.add_argument("--fc-sizes", default="128,500,64")
    slc.add_argument("--lr", type=float, default=0.05)
    slc.add_argument("--batch-size", type=int, default=50)
    slc.add_argument("--max-epoch", type=int, default=500)
    slc.add_argument("--measure", choices=("r2", "mse"), default="r2")
    slc.add_argument("--mask-lambda-min", type=float, default=0.05)
    slc.add_argument("--mask-lambda-max", type=float, default=0.35)
    slc.add_argument("--mask-lambda-count", type=int, default=20)
    slc.add_argument("--eps0", type=float, default=0.01)
    slc.add_argument("--out-dir", default=".")
    _add_split_flags(slc)
    slc.set_defaults(func=cmd_select)

    ev = sub.add_parser("evaluate", help="score a stored selection on test rows")
    ev.add_argument("panel")
    ev.add_argument("selection", help="selection.json from the select command")
    ev.add_argument("--coords", default=None)
    ev.add_argument("--baseline-draws", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--lr", type=float, default=0.001,
                    help="prediction net learning rate (gcn methods)")
    ev.add_argument("--batch-size", type=int, default=1000)
    ev.add_argument("--max-epoch", type=int, default=50)
    ev.add_argument("--out-dir", default=".")
    _add_split_flags(ev)
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NetselectError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
