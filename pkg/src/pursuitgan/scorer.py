"""Quality scores: s2 from end-point distances, s1 by Monte-Carlo replay through G2."""

import csv
from dataclasses import dataclass

import numpy as np

from .cgan import G2_CONDITION
from .dataset import eta, fit_minmax
from .game import PolarAction, endpoint, endpoint_distance
from .rng import derived_rng

QUERY_SCORE = 0.98


@dataclass(frozen=True)
class ScoreTable:
    episode_ids: np.ndarray
    alpha: np.ndarray
    s1: np.ndarray
    n_mc: int
    stats: object


def replay_distance(cfg, row, b2):
    """End-point distance had Blue played ``b2`` in stage 2 of a recorded episode."""
    blue_end = endpoint(cfg.blue_start, row.b1, b2, cfg.half)
    return endpoint_distance(row.red_end, blue_end)


def build_s1_scores(g2, ds, cfg, n_mc=30, seed=0, query_score=QUERY_SCORE):
    """Monte-Carlo estimate of the stage-1 cost-to-go for every row of ``ds``.

    For row i, G2 is queried ``n_mc`` times with the row's (r1, r2, v_cap_rem)
    and a high score; each sampled stage-2 action is replayed on the recorded
    stage-1 geometry.  alpha_i is the mean replayed distance and
    s1_i = 1 - eta(alpha_i), with eta fitted over the table's alphas.
    Each row draws from its own stream derived from (seed, episode_id).
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    conds = np.column_stack([ds.column(k) for k in G2_CONDITION])
    alpha = np.empty(len(ds))
    for i, row in enumerate(ds.rows):
        rng = derived_rng(seed, row.episode_id)
        draws = g2.sample(np.repeat(conds[i:i + 1], n_mc, axis=0), query_score, rng)
        alpha[i] = np.mean(
            [replay_distance(cfg, row, PolarAction(max(0.0, v), th)) for v, th in draws]
        )
    stats = fit_minmax(alpha)
    return ScoreTable(ds.episode_ids, alpha, 1.0 - eta(stats, alpha), n_mc, stats)


def attach_s1(ds, table):
    if not np.array_equal(ds.episode_ids, table.episode_ids):
        raise ValueError("score table rows do not match the dataset")
    return ds.with_scores(s1=table.s1)


def realized_score(stats, d):
    return 1.0 - eta(stats, d)


def save_alpha_csv(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("episode_id", "alpha", "s1"))
        for i, a, s in zip(table.episode_ids, table.alpha, table.s1):
            w.writerow((int(i), format(float(a), ".17g"), format(float(s), ".17g")))
