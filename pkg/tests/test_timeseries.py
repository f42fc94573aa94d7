"""Ingestion, cleaning, weekly detrending, covariance blocks, panel IO."""

import numpy as np
import pytest

from netselect.errors import (
    InvalidInputError,
    LagError,
    PartitionError,
    ZeroScaleError,
)
from netselect.timeseries import (
    HOUR,
    WEEK_HOURS,
    PanelSeries,
    Split,
    apply_preprocess,
    assemble_blocks,
    autocovariance,
    clean_stations,
    estimate_blocks,
    fit_weekly_profile,
    interpolate_hourly,
    invert_preprocess,
    lagged_design,
    make_split,
    read_panel,
    read_raw_records,
    write_panel,
)


def _panel(n=3, T=400, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n, T))
    stamps = np.arange(T, dtype=np.int64) * HOUR
    return PanelSeries([f"s{i}" for i in range(n)], stamps, values)


def test_panel_series_validation():
    stamps = np.array([0, HOUR, 3 * HOUR])
    with pytest.raises(InvalidInputError, match="1-hour steps"):
        PanelSeries(["a"], stamps, np.zeros((1, 3)))
    with pytest.raises(InvalidInputError, match="non-finite"):
        PanelSeries(["a"], np.array([0, HOUR]), np.array([[1.0, np.nan]]))
    with pytest.raises(InvalidInputError, match="sensor count"):
        PanelSeries(["a", "b"], np.array([0, HOUR]), np.zeros((1, 2)))


def test_split_validation_and_make_split():
    with pytest.raises(InvalidInputError, match="split"):
        Split(0, 5, 10)
    with pytest.raises(InvalidInputError, match="split"):
        Split(5, 5, 10)
    s = make_split(1000)
    assert (s.t_tv, s.t0, s.t1) == (800, 850, 1000)


def test_read_raw_records_parsing(tmp_path):
    path = tmp_path / "raw.csv"
    path.write_text(
        "station,moment,bikes,spaces\n"
        "a,7200,5,5\n"
        "a,2015-01-01T01:00:00,4,6\n"
        "b,0,2,8\n"
    )
    records = read_raw_records(path)
    assert set(records) == {"a", "b"}
    # rows are sorted by moment within each station
    assert records["a"][0][0] == 7200.0
    assert records["a"][1][1] == 4.0

    bad = tmp_path / "bad.csv"
    bad.write_text("station,when,bikes,spaces\n")
    with pytest.raises(InvalidInputError, match="line 1"):
        read_raw_records(bad)
    bad.write_text("station,moment,bikes,spaces\na,0,5\n")
    with pytest.raises(InvalidInputError, match="line 2"):
        read_raw_records(bad)
    bad.write_text("station,moment,bikes,spaces\na,noon,5,5\n")
    with pytest.raises(InvalidInputError, match="unparseable moment"):
        read_raw_records(bad)
    bad.write_text("station,moment,bikes,spaces\na,0,many,5\n")
    with pytest.raises(InvalidInputError, match="non-numeric"):
        read_raw_records(bad)


def test_clean_stations_rules():
    # 200 records, capacity 10; "good" is always consistent, "half" is
    # consistent exactly half the time, "short" has too few records,
    # "empty" has zero capacity
    good = [(float(t), 5.0, 5.0) for t in range(200)]
    half = [(float(t), 5.0, 5.0 if t % 2 else 4.0) for t in range(200)]
    short = [(float(t), 5.0, 5.0) for t in range(50)]
    empty = [(float(t), 0.0, 0.0) for t in range(200)]
    records = {"good": good, "half": half, "short": short, "empty": empty}
    kept = clean_stations(records, r_c=0.5)
    assert kept == [("good", 10.0)]
    # strict inequality: rate 0.5 does not pass r_c = 0.5
    assert clean_stations({"half": half}, r_c=0.4) == [("half", 10.0)]
    with pytest.raises(InvalidInputError, match="r_c"):
        clean_stations(records, r_c=0.0)


def test_interpolate_hourly_grid_and_clamp():
    # capacity 10; bikes ramp 0 -> 20 so the normalized series hits the
    # upper clamp at 1
    recs = [(0.0, 0.0, 10.0), (10 * HOUR, 20.0, 0.0)]
    records = {"a": recs, "b": recs}
    kept = [("a", 20.0), ("b", 20.0)]
    panel = interpolate_hourly(records, kept)
    assert panel.sensor_ids == ["a", "b"]
    assert panel.t_total == 11
    assert panel.values[0, 0] == pytest.approx(0.0)
    assert panel.values[0, 5] == pytest.approx(0.5)
    assert panel.values[0, 10] == pytest.approx(1.0)
    assert np.all(panel.values <= 1.0)


def test_weekly_profile_round_trip():
    rng = np.random.default_rng(1)
    T = 2 * WEEK_HOURS + 50
    base = rng.normal(size=(2, WEEK_HOURS))
    slots = np.arange(T) % WEEK_HOURS
    values = base[:, slots] + 0.1 * rng.normal(size=(2, T))
    panel = PanelSeries(["a", "b"], np.arange(T, dtype=np.int64) * HOUR, values)
    split = Split(2 * WEEK_HOURS, 2 * WEEK_HOURS + 20, T)
    model = fit_weekly_profile(panel, split)
    detrended = apply_preprocess(panel, model)
    restored = invert_preprocess(detrended, model)
    assert np.allclose(restored.values, panel.values, atol=1e-12)
    # training residuals have unit scale by construction
    resid = detrended.values[:, : split.t_tv]
    assert np.allclose(resid.std(axis=1), 1.0, atol=1e-10)


def test_weekly_profile_needs_a_week_and_variance():
    panel = _panel(T=400)
    with pytest.raises(InvalidInputError, match="training rows"):
        fit_weekly_profile(panel, Split(100, 200, 400))
    flat = panel.values.copy()
    flat[1, :] = 2.5
    constant = panel.with_values(flat)
    with pytest.raises(ZeroScaleError, match="s1"):
        fit_weekly_profile(constant, Split(200, 300, 400))


def test_autocovariance_manual_and_lag_bounds():
    X = np.array([[1.0, 2.0, 3.0], [0.0, 1.0, -1.0]])
    G1 = autocovariance(X, 1)
    assert np.allclose(G1, X[:, 1:] @ X[:, :-1].T / 3.0)
    G0 = autocovariance(X, 0)
    assert np.array_equal(G0, G0.T)
    with pytest.raises(LagError):
        autocovariance(X, 3)
    with pytest.raises(LagError):
        autocovariance(X, -1)


def test_assemble_blocks_layout():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(4, 300))
    blocks = estimate_blocks(X, 1)
    I = [1]
    alpha, beta = assemble_blocks(blocks.gammas, I, 1)
    Ic = [0, 2, 3]
    q = 3
    G0, G1 = blocks.gammas
    assert np.allclose(alpha[:q, :q], G0[np.ix_(Ic, Ic)])
    assert np.allclose(alpha[:q, q:], G1[np.ix_(Ic, Ic)])
    assert np.allclose(alpha[q:, :q], G1.T[np.ix_(Ic, Ic)])
    assert np.allclose(beta[:, q:], G1[np.ix_(I, Ic)])
    with pytest.raises(LagError):
        assemble_blocks(blocks.gammas, I, 2)
    with pytest.raises(PartitionError):
        assemble_blocks(blocks.gammas, [0, 0], 1)
    with pytest.raises(PartitionError):
        assemble_blocks(blocks.gammas, [7], 1)


def test_lagged_design_gram_identity():
    # the zero-padded design reproduces the block-Toeplitz Gram exactly
    rng = np.random.default_rng(3)
    X = rng.normal(size=(4, 200))
    H = 2
    blocks = estimate_blocks(X, H)
    alpha, _ = assemble_blocks(blocks.gammas, [0], H)
    D = lagged_design(X, [1, 2, 3], H)
    assert D.shape == (3 * (H + 1), 200 + H)
    assert np.allclose(D @ D.T / 200.0, alpha, atol=1e-12)
    assert np.array_equal(D[:4 - 1, :200], X[[1, 2, 3], :])
    assert np.all(D[3:6, 0] == 0)


def test_panel_csv_round_trip(tmp_path):
    panel = _panel(T=50)
    path = tmp_path / "panel.csv"
    write_panel(panel, path)
    back = read_panel(path)
    assert back.sensor_ids == panel.sensor_ids
    assert np.array_equal(back.timestamps, panel.timestamps)
    assert np.array_equal(back.values, panel.values)


def test_read_panel_errors(tmp_path):
    path = tmp_path / "panel.csv"
    path.write_text("time,a\n1970-01-01T00:00:00,1.0\n")
    with pytest.raises(InvalidInputError, match="timestamp"):
        read_panel(path)
    path.write_text("timestamp,a\n1970-01-01T00:00:00,1.0,2.0\n")
    with pytest.raises(InvalidInputError, match="line 2"):
        read_panel(path)
    path.write_text("timestamp,a\n1970-01-01T00:00:00,high\n")
    with pytest.raises(InvalidInputError, match="non-numeric"):
        read_panel(path)
    path.write_text("timestamp,a\n")
    with pytest.raises(InvalidInputError, match="no data rows"):
        read_panel(path)
