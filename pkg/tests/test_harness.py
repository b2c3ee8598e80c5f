"""Experiment harness: config parsing, paired-run statistics, sweeps, trends.

Two structural facts double as strong oracles here: a ball covering the
whole cube forces exact agreement (the argmin no longer depends on the
center), and a dense sample with radius zero reproduces the target exactly.
Both let the harness be checked for literal zeros, not just small numbers.
"""

import math
import os

import numpy as np
import pytest

from replearn.domain import Params
from replearn.harness import (
    CSV_HEADER,
    ExperimentConfig,
    parse_config,
    replication_beta,
    run_replication_experiment,
    suggested_sample_size,
    sweep_experiments,
    trend_violations,
)
from replearn.errors import UsageError


def make_params(d=2, k=5, eps=0.2, rho=0.1, n=20, **kw):
    return Params(d=d, k=k, epsilon=eps, rho=rho, delta=0.05, n=n, **kw)


def test_replication_beta_formula():
    p = make_params(d=4, k=29, eps=0.3, rho=0.1, n=100)
    want = min(
        0.3 * 0.1 / math.sqrt(4 * math.log(2 / 0.1)),
        0.3 * 0.1 / math.log(4 / 0.1),
    )
    assert replication_beta(p) == pytest.approx(want)
    doubled = make_params(d=4, k=29, eps=0.3, rho=0.1, n=100, beta_constant=2.0)
    assert replication_beta(doubled) == pytest.approx(2 * want)


def test_suggested_sample_size():
    p = make_params(d=4, k=29, eps=0.3, rho=0.1, n=100)
    beta = replication_beta(p)
    assert suggested_sample_size(p) == math.ceil(4 * math.log(4 / 0.1) / beta)
    assert suggested_sample_size(p, c_n=2.0) >= suggested_sample_size(p)


def test_parse_config_round_trip():
    text = """
    # base point
    d = 2
    k = 5
    epsilon = 0.3
    rho = 0.1
    n = 40            # per-sample size
    trials = 64
    master_seed = 7
    out = sweep.csv
    sweep_n = 10, 20, 40
    sweep_k = 90
    """
    config = parse_config(text)
    assert config.params.d == 2 and config.params.k == 5
    assert config.params.epsilon == 0.3 and config.params.delta == 0.05
    assert config.trials == 64 and config.master_seed == 7
    assert config.out == "sweep.csv"
    assert config.sweep_n == (10, 20, 40)
    grid = config.grid()
    # sweep_k targets round up to a usable prime; n varies fastest
    assert [(p.k, p.n) for p in grid] == [(97, 10), (97, 20), (97, 40)]


def test_parse_config_rejections():
    base = "d=2\nk=5\nepsilon=0.3\nrho=0.1\nn=10\n"
    with pytest.raises(UsageError, match="duplicate"):
        parse_config(base + "d=3\n")
    with pytest.raises(UsageError, match="unknown"):
        parse_config(base + "shape=round\n")
    with pytest.raises(UsageError, match="missing"):
        parse_config("d=2\nk=5\nepsilon=0.3\n")
    with pytest.raises(UsageError, match="cannot parse"):
        parse_config("d=2\nk=5\nepsilon=wide\nrho=0.1\nn=10\n")
    with pytest.raises(UsageError, match="key=value"):
        parse_config("d: 2\n")
    with pytest.raises(UsageError):
        ExperimentConfig(params=make_params(), trials=0)


def test_grid_ordering_and_defaults():
    config = ExperimentConfig(
        params=make_params(), trials=8, sweep_d=(2, 3), sweep_n=(10, 20)
    )
    assert [(p.d, p.n) for p in config.grid()] == [
        (2, 10), (2, 20), (3, 10), (3, 20),
    ]
    lone = ExperimentConfig(params=make_params(), trials=8)
    assert [p for p in lone.grid()] == [make_params()]


def test_run_is_deterministic_and_thread_invariant():
    params = make_params(eps=0.9, n=12)
    config = ExperimentConfig(params=params, trials=600, master_seed=11)
    a = run_replication_experiment(config)
    b = run_replication_experiment(config)
    c = run_replication_experiment(config, threads=3)
    assert a.csv_row() == b.csv_row() == c.csv_row()
    assert a.rho_lo <= a.rho_hat <= a.rho_hi
    assert len(a.errors) == 2 * 600
    with pytest.raises(UsageError):
        run_replication_experiment(config, threads=0)


def test_full_cube_ball_forces_exact_agreement():
    # radius 9 >= d*floor(k/2) = 4: the argmin ignores the center entirely
    params = make_params(eps=0.9, n=8, radius_fraction=1.0)
    assert params.radius >= params.d * (params.k // 2)
    report = run_replication_experiment(
        ExperimentConfig(params=params, trials=300, master_seed=3)
    )
    assert report.disagreements == 0
    assert report.rho_hat == 0.0


def test_dense_sample_with_radius_zero_recovers_target():
    params = make_params(eps=0.2, n=200)
    assert params.radius == 0
    report = run_replication_experiment(
        ExperimentConfig(params=params, trials=200, master_seed=5)
    )
    assert report.rho_hat == 0.0
    assert report.err_rate == 0.0
    assert report.mean_err == 0.0 and report.median_err == 0.0


def test_csv_row_schema():
    params = make_params(eps=0.3, n=10)
    report = run_replication_experiment(
        ExperimentConfig(params=params, trials=16, master_seed=1)
    )
    row = report.csv_row()
    cells = row.split(",")
    assert len(cells) == len(CSV_HEADER.split(","))
    assert cells[0] == "2" and cells[1] == "5"
    assert float(cells[2]) == params.epsilon  # %.17g survives the round trip
    assert cells[-1] == "1"


def test_single_point_sweep_matches_plain_run(tmp_path):
    params = make_params(eps=0.3, n=10)
    config = ExperimentConfig(params=params, trials=32, master_seed=9)
    plain = run_replication_experiment(config).csv_row()
    out = tmp_path / "one.csv"
    rows = sweep_experiments(config, out_path=str(out))
    assert rows == [plain]
    text = out.read_text().splitlines()
    assert text == [CSV_HEADER, plain]


def test_sweep_resume_is_byte_identical(tmp_path):
    params = make_params(eps=0.3, n=10)
    config = ExperimentConfig(
        params=params, trials=24, master_seed=13, sweep_n=(5, 10, 15)
    )
    full = tmp_path / "full.csv"
    sweep_experiments(config, out_path=str(full))

    partial = tmp_path / "partial.csv"
    head = full.read_text().splitlines()[:2]
    partial.write_text("\n".join(head) + "\n")
    sweep_experiments(config, out_path=str(partial), resume=True)
    assert partial.read_bytes() == full.read_bytes()


def test_sweep_resume_guards(tmp_path):
    params = make_params(eps=0.3, n=10)
    config = ExperimentConfig(params=params, trials=8, master_seed=2)
    bad = tmp_path / "bad.csv"
    bad.write_text("wrong,header\n")
    with pytest.raises(UsageError, match="header"):
        sweep_experiments(config, out_path=str(bad), resume=True)
    over = tmp_path / "over.csv"
    over.write_text(CSV_HEADER + "\nrow\nrow\n")
    with pytest.raises(UsageError, match="rows"):
        sweep_experiments(config, out_path=str(over), resume=True)


def test_sweep_records_cap_hits_as_nan_rows(tmp_path):
    params = make_params(eps=0.2, n=10, radius_fraction=1.0)
    config = ExperimentConfig(
        params=params, trials=12, master_seed=4, sweep_epsilon=(0.2, 0.9)
    )
    # eps=0.2 gives a 13-member ball (radius 2); eps=0.9 needs 25 > cap
    rows = sweep_experiments(config, out_path=None, ball_cap=13)
    assert len(rows) == 2
    assert "nan" not in rows[0]
    first = rows[1].split(",")
    assert first[8] == "nan" and first[11] == "nan"
    assert first[14] == "12"  # every trial counted against the cap
    assert os.path.exists(str(tmp_path))  # tmp_path unused on purpose


def test_trend_violations():
    ns = (50, 100, 200, 400)
    residuals, ok = trend_violations(ns, (0.5, 0.3, 0.2, 0.1), (0.01,) * 4)
    assert ok and np.all(residuals == 0)
    # a blip larger than twice the half-width fails, a small one passes
    _, tight = trend_violations(ns, (0.5, 0.3, 0.4, 0.1), (0.01,) * 4)
    assert not tight
    _, loose = trend_violations(ns, (0.5, 0.3, 0.4, 0.1), (0.03,) * 4)
    assert loose
    with pytest.raises(UsageError):
        trend_violations((50, 50, 100), (0.1, 0.1, 0.1), (0.01,) * 3)
    with pytest.raises(UsageError):
        trend_violations((50, 100), (0.1, 0.1, 0.1), (0.01,) * 3)
