"""End-to-end CLI smoke: ingest, select (all methods), evaluate, determinism."""

import os
import subprocess
import sys

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from netselect.evaluation import synth_generate
from netselect.graph import build_knn_graph
from netselect.timeseries import write_panel

WORK = "/tmp/cli_smoke"


def run(*argv, expect=0):
    proc = subprocess.run(
        [sys.executable, "-m", "netselect.cli", *argv],
        capture_output=True, text=True,
        env={**os.environ, "PYTHONPATH": "/root/pkg/src"},
    )
    if proc.returncode != expect:
        print(proc.stdout)
        print(proc.stderr)
        raise SystemExit(f"{argv} -> {proc.returncode}, wanted {expect}")
    return proc


def main():
    os.makedirs(WORK, exist_ok=True)
    rng = np.random.default_rng(11)

    # raw records fixture: 3 good stations, 1 sparse, 1 inconsistent
    raw = os.path.join(WORK, "raw.csv")
    lines = ["station,moment,bikes,spaces"]
    t0 = 1609459200.0  # 2021-01-01T00:00:00Z
    for s, max_bikes in (("a", 20), ("b", 15), ("c", 30)):
        for k in range(400):
            bikes = int(rng.integers(0, max_bikes + 1))
            lines.append(f"{s},{t0 + 3600 * k},{bikes},{max_bikes - bikes}")
    for k in range(50):  # too few records
        lines.append(f"sparse,{t0 + 3600 * k},1,9")
    for k in range(400):  # totals drift, rate below threshold
        lines.append(f"bad,{t0 + 3600 * k},{k % 7},{k % 11}")
    with open(raw, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    out_ing = os.path.join(WORK, "ing")
    proc = run("ingest", raw, "--out-dir", out_ing)
    print(proc.stdout.strip())
    header = open(os.path.join(out_ing, "panel.csv")).readline().strip()
    assert header.split(",")[1:] == ["a", "b", "c"], header

    # synthetic panel + coords for select/evaluate
    coords = rng.normal(size=(12, 2))
    g = build_knn_graph(coords, k0=5, k1=3)
    panel = synth_generate(g, 1200, "graph-smooth", seed=4,
                           redundant_pairs=[(0, 1)], noise_sensors=[11])
    panel_path = os.path.join(WORK, "panel.csv")
    write_panel(panel, panel_path)
    coords_path = os.path.join(WORK, "coords.csv")
    with open(coords_path, "w") as fh:
        fh.write("sensor_id,lat,lon\n")
        for i, sid in enumerate(panel.sensor_ids):
            fh.write(f"{sid},{coords[i, 0]:.17g},{coords[i, 1]:.17g}\n")

    out_lin = os.path.join(WORK, "lin")
    proc = run("select", panel_path, "--coords", coords_path, "--method",
               "linear", "--p", "2", "--H", "1", "--out-dir", out_lin)
    print(proc.stdout.strip())
    first = open(os.path.join(out_lin, "selection.json")).read()
    run("select", panel_path, "--coords", coords_path, "--method", "linear",
        "--p", "2", "--H", "1", "--out-dir", out_lin)
    assert open(os.path.join(out_lin, "selection.json")).read() == first

    out_ker = os.path.join(WORK, "ker")
    proc = run("select", panel_path, "--coords", coords_path, "--method",
               "kernel", "--p", "2", "--H", "1", "--k0", "5", "--k1", "3",
               "--out-dir", out_ker)
    print(proc.stdout.strip())

    out_drop = os.path.join(WORK, "drop")
    proc = run("select", panel_path, "--coords", coords_path, "--method",
               "gcn-dropout", "--p", "2", "--H", "0", "--k0", "5", "--k1", "3",
               "--cheb-order", "3", "--f-out", "2", "--fc-sizes", "8",
               "--lr", "0.01", "--max-epoch", "5", "--out-dir", out_drop)
    print(proc.stdout.strip())
    assert os.path.exists(os.path.join(out_drop, "scores.csv"))

    out_mask = os.path.join(WORK, "mask")
    proc = run("select", panel_path, "--coords", coords_path, "--method",
               "gcn-mask", "--p", "2", "--H", "0", "--k0", "5", "--k1", "3",
               "--cheb-order", "3", "--f-out", "2", "--fc-sizes", "8",
               "--lr", "0.01", "--max-epoch", "2", "--mask-lambda-count", "3",
               "--out-dir", out_mask)
    print(proc.stdout.strip())
    assert os.path.exists(os.path.join(out_mask, "mask_path.csv"))

    out_ev = os.path.join(WORK, "ev")
    proc = run("evaluate", panel_path, os.path.join(out_lin, "selection.json"),
               "--baseline-draws", "5", "--out-dir", out_ev)
    print(proc.stdout.strip())

    out_evk = os.path.join(WORK, "evk")
    proc = run("evaluate", panel_path, os.path.join(out_ker, "selection.json"),
               "--coords", coords_path, "--baseline-draws", "3",
               "--out-dir", out_evk)
    print(proc.stdout.strip())

    # exit code contract
    run("select", panel_path, "--coords", "/tmp/noexist.csv", "--p", "2",
        expect=2)
    bad_panel = os.path.join(WORK, "bad.csv")
    with open(bad_panel, "w") as fh:
        fh.write("nonsense\n1,2,3\n")
    run("select", bad_panel, "--coords", coords_path, expect=2)
    run("ingest", os.path.join(WORK, "empty.csv"), expect=2)
    print("cli smoke OK")


if __name__ == "__main__":
    main()
