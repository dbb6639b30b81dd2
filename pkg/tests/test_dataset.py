import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pursuitgan.dataset import (
    CSV_HEADER,
    MinMax,
    ValidationError,
    attach_s2,
    eta,
    fit_minmax,
    fit_norm_stats,
    generate_dataset,
    load_csv,
    load_normstats,
    save_csv,
    save_normstats,
    split,
)
from pursuitgan.game import GameConfig, simulate_episode
from pursuitgan.rng import derive_seed, derived_rng


@pytest.fixture(scope="module")
def small():
    return generate_dataset(GameConfig(), 400, 11)


def test_single_episode_matches_derived_seed(cfg):
    ds = generate_dataset(cfg, 1, 5)
    assert ds.rows[0] == simulate_episode(cfg, derived_rng(5, 0), 0)


def test_ids_contiguous(small):
    assert list(small.episode_ids) == list(range(400))


def test_parallel_generation_matches_serial(cfg):
    a = generate_dataset(cfg, 50, 9)
    b = generate_dataset(cfg, 50, 9, workers=2)
    assert a.rows == b.rows


def test_derive_seed_stable():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert 0 <= derive_seed(-5, 3) < 2**64


def test_success_band(cfg):
    ds = generate_dataset(cfg, 15000, 2024)
    frac = np.mean(ds.column("d_rb") < cfg.catch_eps)
    assert 0.80 <= frac <= 0.95


def test_fit_minmax():
    assert fit_minmax([2, 4, 10]) == MinMax(2, 10)
    assert fit_minmax([7]) == MinMax(7, 7)
    with pytest.raises(ValueError):
        fit_minmax([])


def test_eta():
    s = MinMax(2, 10)
    assert eta(s, 4) == 0.25
    assert eta(s, 0) == 0 and eta(s, 20) == 1
    assert eta(MinMax(7, 7), 3) == 0 and eta(MinMax(7, 7), 100) == 0


@given(st.lists(st.floats(0, 100), min_size=1, max_size=30), st.floats(-10, 200))
def test_eta_refit_invariant(values, v):
    assert eta(fit_minmax(values), v) == eta(fit_minmax(list(values)), v)
    assert 0 <= eta(fit_minmax(values), v) <= 1


def test_split_sizes_and_partition(small):
    train, test = split(small, 0.75, 3)
    assert (len(train), len(test)) == (300, 100)
    ids_tr, ids_te = set(train.episode_ids), set(test.episode_ids)
    assert not ids_tr & ids_te and ids_tr | ids_te == set(small.episode_ids)
    again, _ = split(small, 0.75, 3)
    assert list(again.episode_ids) == list(train.episode_ids)


def test_split_full_scale_sizes():
    from pursuitgan.dataset import Dataset, Provenance

    rows = tuple(simulate_episode(GameConfig(), derived_rng(0, 0), i) for i in range(15000))
    ds = Dataset(rows, Provenance("x", 0))
    train, test = split(ds, 0.75, 1)
    assert (len(train), len(test)) == (11250, 3750)


def test_attach_s2(small):
    train, test = split(small, 0.75, 3)
    stats = fit_norm_stats(train)
    scored = attach_s2(train, stats)
    d, s2 = scored.column("d_rb"), scored.column("s2")
    assert s2[np.argmin(d)] == 1.0 and s2[np.argmax(d)] == 0.0
    order = np.argsort(d)
    assert np.all(np.diff(s2[order]) <= 0)
    assert np.all((attach_s2(test, stats).s2 >= 0) & (attach_s2(test, stats).s2 <= 1))


def test_norm_stats_fitted_on_train_only(small):
    train, _ = split(small, 0.75, 3)
    stats = fit_norm_stats(train)
    assert stats["d_rb"] == fit_minmax(train.column("d_rb"))
    assert stats.means["v1_r"] == pytest.approx(train.column("v1_r").mean())


def test_csv_round_trip(tmp_path, small, cfg):
    train, _ = split(small, 0.75, 3)
    ds = attach_s2(small, fit_norm_stats(train))
    path = tmp_path / "episodes.csv"
    save_csv(ds, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_digest=")
    assert lines[1] == ",".join(CSV_HEADER)
    back = load_csv(path, cfg)
    assert back.rows == ds.rows
    assert np.array_equal(back.s2, ds.s2)
    assert back.s1 is None and back.provenance == ds.provenance


def test_csv_byte_identical_regeneration(tmp_path, cfg):
    save_csv(generate_dataset(cfg, 30, 4), tmp_path / "a.csv")
    save_csv(generate_dataset(cfg, 30, 4), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_rejects_other_config(tmp_path, small):
    save_csv(small, tmp_path / "e.csv")
    with pytest.raises(ValidationError):
        load_csv(tmp_path / "e.csv", GameConfig(v_cap=11))


def test_normstats_round_trip(tmp_path, small):
    stats = fit_norm_stats(small)
    save_normstats(stats, tmp_path / "n.json", small.provenance, {"train_ids": [1, 2]})
    assert (tmp_path / "n.json").read_text().startswith("#")
    back, split_info, digest = load_normstats(tmp_path / "n.json")
    assert back == stats and split_info == {"train_ids": [1, 2]} and len(digest) == 16


def test_scores_must_be_unit_interval(small):
    with pytest.raises(ValueError):
        small.with_scores(s2=np.full(len(small), 1.5))
    assert math.isnan(small.column("s1")[0])
