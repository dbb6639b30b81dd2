"""Decision models for Blue: the two-step GAN model and its benchmarks.

Every model exposes ``rollout(cfg, r1, rng) -> RolloutOutcome``; Red always
answers through its fixed evasion rule.
"""

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .cgan import GanSpec, PairSet, load_generator, save_generator, train_conditional_gan
from .dataset import MinMax, eta, fit_minmax
from .game import PolarAction, Point2, finish_episode, position_after, red_stage2
from .scorer import QUERY_SCORE


@dataclass(frozen=True)
class RolloutOutcome:
    r1: PolarAction
    b1: PolarAction
    r2: PolarAction
    b2: PolarAction
    red_end: Point2
    blue_end: Point2
    d_rb: float
    violated: bool
    v_cap_rem: float


def _action(v, theta):
    # learned or sampled speeds below zero are clamped, never resampled
    return PolarAction(max(0.0, float(v)), float(theta))


def play(cfg, r1, b1, choose_b2, violated=None):
    """Run one game given Blue's stage-1 action and a stage-2 decision rule.

    ``choose_b2(r2, v_cap_rem)`` sees Red's stage-2 action and the speed
    budget left after ``b1``.
    """
    blue_mid = position_after(cfg.blue_start, b1, cfg.half)
    r2, _ = red_stage2(cfg, r1, blue_mid)
    v_rem = cfg.v_cap - b1.speed
    b2 = choose_b2(r2, v_rem)
    red_end, blue_end, d = finish_episode(cfg, r1, b1, r2, b2)
    if violated is None:
        violated = b1.speed + b2.speed > cfg.v_cap
    return RolloutOutcome(r1, b1, r2, b2, red_end, blue_end, d, bool(violated), v_rem)


def play_single_line(cfg, r1, action):
    """Blue holds one action for the whole game, slowing in stage 2 if the cap binds."""
    v = action.speed
    return play(
        cfg,
        r1,
        action,
        lambda r2, v_rem: PolarAction(min(v, max(0.0, cfg.v_cap - v)), action.heading),
        violated=2.0 * v > cfg.v_cap,
    )


@dataclass(frozen=True)
class TwoStepModel:
    g1: object
    g2: object
    d_stats: MinMax
    s1_query: float = QUERY_SCORE
    s2_query: float = QUERY_SCORE

    def __post_init__(self):
        for g, width in ((self.g1, 2), (self.g2, 5)):
            spec = getattr(g, "spec", None)
            if spec is not None and spec.condition_dim != width:
                raise ValueError(f"generator condition width {spec.condition_dim}, expected {width}")

    def with_query_scores(self, s1, s2):
        return replace(self, s1_query=s1, s2_query=s2)

    def rollout(self, cfg, r1, rng):
        b1 = _action(*self.g1.sample([[r1.speed, r1.heading]], self.s1_query, rng)[0])

        def choose_b2(r2, v_rem):
            cond = [[r1.speed, r1.heading, r2.speed, r2.heading, v_rem]]
            return _action(*self.g2.sample(cond, self.s2_query, rng)[0])

        return play(cfg, r1, b1, choose_b2)


@dataclass(frozen=True)
class SingleStepModel:
    g: object
    query_score: float = QUERY_SCORE

    def rollout(self, cfg, r1, rng):
        action = _action(*self.g.sample([[r1.speed, r1.heading]], self.query_score, rng)[0])
        return play_single_line(cfg, r1, action)


@dataclass(frozen=True)
class RandomizedModel:
    mean1: np.ndarray
    cov1: np.ndarray
    mean2: np.ndarray
    cov2: np.ndarray

    def __post_init__(self):
        for cov in (self.cov1, self.cov2):
            if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() < -1e-12:
                raise ValueError("covariance must be symmetric positive semi-definite")

    @staticmethod
    def _factor(cov):
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))

    def draw(self, stage, rng):
        mean, cov = (self.mean1, self.cov1) if stage == 1 else (self.mean2, self.cov2)
        return mean + self._factor(cov) @ rng.standard_normal(2)

    def rollout(self, cfg, r1, rng):
        b1 = _action(*self.draw(1, rng))
        b2 = _action(*self.draw(2, rng))
        return play(cfg, r1, b1, lambda r2, v_rem: b2)


def fit_randomized(train):
    if len(train) < 2:
        raise ValueError("need at least two rows to fit the randomized benchmark")
    s1 = np.column_stack([train.column("v1_b"), train.column("theta1_b")])
    s2 = np.column_stack([train.column("v2_b"), train.column("theta2_b")])
    return RandomizedModel(s1.mean(axis=0), np.cov(s1, rowvar=False), s2.mean(axis=0), np.cov(s2, rowvar=False))


def rollout_two_step(m, cfg, r1, rng):
    return m.rollout(cfg, r1, rng)


def rollout_single_step(m, cfg, r1, rng):
    return m.rollout(cfg, r1, rng)


def rollout_randomized(m, cfg, r1, rng):
    return m.rollout(cfg, r1, rng)


def best_of_k(m, cfg, r1, k, rng):
    """Best of k independent rollouts by end-point distance.

    Candidates that break the speed cap are dropped unless every candidate
    does; ties go to the earliest candidate.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cands = [m.rollout(cfg, r1, rng) for _ in range(k)]
    pool = [c for c in cands if not c.violated] or cands
    return min(pool, key=lambda c: c.d_rb)


# --- single-step training labels ---------------------------------------------

def make_single_pairs(train, cfg):
    """Pairs (r1, score, scripted b1) where the score rates holding b1 for the whole game.

    Returns the pairs and the min-max statistics of the single-line distances.
    """
    d = np.array([play_single_line(cfg, r.r1, r.b1).d_rb for r in train.rows])
    stats = fit_minmax(d)
    pairs = PairSet(
        np.column_stack([train.column("v1_r"), train.column("theta1_r")]),
        1.0 - eta(stats, d),
        np.column_stack([train.column("v1_b"), train.column("theta1_b")]),
    )
    return pairs, stats


def train_single_step(train, cfg, train_cfg, query_score=QUERY_SCORE):
    pairs, _ = make_single_pairs(train, cfg)
    return SingleStepModel(train_conditional_gan(pairs, GanSpec(condition_dim=2), train_cfg), query_score)


# --- bundles -------------------------------------------------------------------

def save_model(m, directory, provenance=None):
    os.makedirs(directory, exist_ok=True)
    if isinstance(m, TwoStepModel):
        save_generator(m.g1, os.path.join(directory, "g1"))
        save_generator(m.g2, os.path.join(directory, "g2"))
        info = {
            "kind": "two-step",
            "s1_query": m.s1_query,
            "s2_query": m.s2_query,
            "d_min": m.d_stats.lo,
            "d_max": m.d_stats.hi,
        }
    elif isinstance(m, SingleStepModel):
        save_generator(m.g, os.path.join(directory, "single"))
        info = {"kind": "single-step", "query_score": m.query_score}
    else:
        raise TypeError(f"cannot save {type(m).__name__}")
    info["provenance"] = provenance or {}
    with open(os.path.join(directory, "model.json"), "w") as fh:
        json.dump(info, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(directory):
    """Returns (model, provenance dict)."""
    with open(os.path.join(directory, "model.json")) as fh:
        info = json.load(fh)
    if info["kind"] == "two-step":
        m = TwoStepModel(
            load_generator(os.path.join(directory, "g1")),
            load_generator(os.path.join(directory, "g2")),
            MinMax(info["d_min"], info["d_max"]),
            info["s1_query"],
            info["s2_query"],
        )
    elif info["kind"] == "single-step":
        m = SingleStepModel(load_generator(os.path.join(directory, "single")), info["query_score"])
    else:
        raise ValueError(f"{directory}: unknown model kind {info['kind']!r}")
    return m, info.get("provenance", {})
