import numpy as np
import pytest

from pursuitgan.dataset import MinMax, generate_dataset
from pursuitgan.game import GameConfig, PolarAction
from pursuitgan.scorer import QUERY_SCORE, attach_s1, build_s1_scores, realized_score, replay_distance, save_alpha_csv


class RecordedB2:
    """Returns the recorded stage-2 action of whichever row the condition came from."""

    def __init__(self, ds):
        self.lookup = {(r.r1.speed, r.r1.heading, r.r2.speed, r.r2.heading, r.v_cap_rem): r.b2 for r in ds.rows}
        self.scores = []

    def sample(self, conds, score, rng):
        self.scores.append(score)
        return np.array([[self.lookup[tuple(c)].speed, self.lookup[tuple(c)].heading] for c in conds])


class Alternating:
    def __init__(self, a, b):
        self.actions = (a, b)

    def sample(self, conds, score, rng):
        return np.array([[self.actions[i % 2].speed, self.actions[i % 2].heading] for i in range(len(conds))])


class Constant:
    def sample(self, conds, score, rng):
        return np.tile([3.0, 0.5], (len(conds), 1))


class Noisy:
    def sample(self, conds, score, rng):
        return np.column_stack([rng.uniform(0, 6, len(conds)), rng.uniform(-np.pi, np.pi, len(conds))])


@pytest.fixture(scope="module")
def ds():
    return generate_dataset(GameConfig(), 60, 11)


def test_identity_stub_replays_d_rb(cfg, ds):
    stub = RecordedB2(ds)
    table = build_s1_scores(stub, ds, cfg, n_mc=1, seed=0)
    assert np.array_equal(table.alpha, ds.column("d_rb"))
    assert set(stub.scores) == {QUERY_SCORE}


def test_alternating_stub_gives_mean(cfg, ds):
    a, b = PolarAction(2.0, 1.0), PolarAction(5.0, -2.0)
    table = build_s1_scores(Alternating(a, b), ds, cfg, n_mc=2)
    expect = [(replay_distance(cfg, r, a) + replay_distance(cfg, r, b)) / 2 for r in ds.rows]
    assert np.allclose(table.alpha, expect, rtol=0, atol=1e-12)


def test_equal_alpha_gives_unit_scores(cfg, ds):
    one = ds.subset([ds.rows[0].episode_id])
    table = build_s1_scores(Constant(), one, cfg, n_mc=3)
    assert np.array_equal(table.s1, [1.0])


def test_s1_reverse_of_alpha(cfg, ds):
    table = build_s1_scores(Noisy(), ds, cfg, n_mc=5, seed=3)
    order = np.argsort(table.alpha, kind="stable")
    assert np.all(np.diff(table.s1[order]) <= 0)
    assert np.all((table.s1 >= 0) & (table.s1 <= 1)) and np.all(table.alpha >= 0)
    assert table.s1.min() == 0.0 and table.s1.max() == 1.0


def test_more_draws_less_variance(cfg, ds):
    rows = ds.subset(ds.episode_ids[:10])

    def spread(n_mc):
        runs = np.array([build_s1_scores(Noisy(), rows, cfg, n_mc=n_mc, seed=s).alpha for s in range(40)])
        return runs.var(axis=0).mean()

    assert spread(30) < spread(1)


def test_seed_determinism_and_errors(cfg, ds):
    a = build_s1_scores(Noisy(), ds, cfg, n_mc=4, seed=8)
    b = build_s1_scores(Noisy(), ds, cfg, n_mc=4, seed=8)
    assert np.array_equal(a.alpha, b.alpha)
    with pytest.raises(ValueError):
        build_s1_scores(Noisy(), ds, cfg, n_mc=0)


def test_attach_and_export(cfg, ds, tmp_path):
    table = build_s1_scores(Noisy(), ds, cfg, n_mc=2)
    with_s1 = attach_s1(ds, table)
    assert np.array_equal(with_s1.column("s1"), table.s1)
    with pytest.raises(ValueError):
        attach_s1(ds.subset(ds.episode_ids[:5]), table)
    save_alpha_csv(table, tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "episode_id,alpha,s1" and len(lines) == len(ds) + 1
    assert float(lines[1].split(",")[1]) == table.alpha[0]


def test_realized_score():
    stats = MinMax(0.0, 10.0)
    assert realized_score(stats, 0.0) == 1.0
    assert realized_score(stats, 10.0) == 0.0 and realized_score(stats, 25.0) == 0.0
    d = np.linspace(0, 12, 50)
    assert np.all(np.diff(realized_score(stats, d)) <= 0)
