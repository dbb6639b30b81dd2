"""Conditional GAN training and sampling for stage-wise action policies.

The generator maps ``(condition, score, noise)`` to an action; the
discriminator judges ``(condition, score, action)`` triples.  Conditions and
actions are standardized with training statistics; scores are already in
[0, 1] and are fed unchanged.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .neural import (
    MlpSpec,
    adam_init,
    adam_step,
    backward,
    forward,
    forward_cached,
    init_params,
    load_weights,
    save_weights,
)

log = logging.getLogger(__name__)

P_CLAMP = 1e-7


@dataclass(frozen=True)
class GanSpec:
    condition_dim: int
    noise_dim: int = 2
    action_dim: int = 2
    gen_hidden: tuple = (96, 64)
    disc_hidden: tuple = (64, 32)

    def __post_init__(self):
        if min(self.condition_dim, self.noise_dim, self.action_dim) < 1:
            raise ValueError("GAN dimensions must be >= 1")
        object.__setattr__(self, "gen_hidden", tuple(self.gen_hidden))
        object.__setattr__(self, "disc_hidden", tuple(self.disc_hidden))

    @property
    def generator_mlp(self):
        width = self.condition_dim + 1 + self.noise_dim
        return MlpSpec((width, *self.gen_hidden, self.action_dim), "relu", "identity")

    @property
    def discriminator_mlp(self):
        width = self.condition_dim + 1 + self.action_dim
        return MlpSpec((width, *self.disc_hidden, 1), "leaky_relu", "sigmoid")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 128
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    d_steps: int = 1

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.d_steps) < 1 or min(self.lr_g, self.lr_d) <= 0:
            raise ValueError("training settings must be positive")


class PairSet(NamedTuple):
    """Training triples as arrays: conditions (n, c), scores (n,), actions (n, a)."""

    conditions: np.ndarray
    scores: np.ndarray
    actions: np.ndarray

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=float)
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 0, std, 1.0))

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


@dataclass
class Generator:
    params: object
    spec: GanSpec
    cond_scaler: Standardizer
    action_scaler: Standardizer

    def generator_input(self, conditions, scores, noise):
        return np.column_stack([self.cond_scaler.transform(conditions), scores, noise])

    def sample(self, conditions, scores, rng):
        """Draw one action per condition row, in raw (speed, heading) units."""
        conditions = np.atleast_2d(np.asarray(conditions, dtype=float))
        if conditions.shape[1] != self.spec.condition_dim:
            raise ValueError(
                f"condition width {conditions.shape[1]} != {self.spec.condition_dim}"
            )
        n = len(conditions)
        scores = np.broadcast_to(np.asarray(scores, dtype=float), (n,))
        noise = rng.standard_normal((n, self.spec.noise_dim))
        out = forward(self.params, self.generator_input(conditions, scores, noise))
        return self.action_scaler.inverse(out)


def sample_generator(g, condition, score, rng):
    return g.sample(np.asarray(condition, dtype=float)[None, :], score, rng)[0]


def _check_pairs(pairs, spec):
    if len(pairs) == 0:
        raise ValueError("no training pairs")
    c, s, a = (np.asarray(v, dtype=float) for v in pairs)
    if c.shape != (len(s), spec.condition_dim) or a.shape != (len(s), spec.action_dim):
        raise ValueError("pair arrays do not match the GAN spec")
    if not (np.isfinite(c).all() and np.isfinite(s).all() and np.isfinite(a).all()):
        raise ValueError("non-finite features in training pairs")
    if np.any((s < 0) | (s > 1)):
        raise ValueError("scores must lie in [0, 1]")
    return c, s, a


def bce_grad(p, target):
    """Binary cross-entropy on clamped probabilities: (mean loss, dloss/dp)."""
    p = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    n = len(p)
    if target == 1:
        return float(-np.mean(np.log(p))), -1.0 / (p * n)
    return float(-np.mean(np.log(1.0 - p))), 1.0 / ((1.0 - p) * n)


def discriminator_step(dparams, dstate, real_x, fake_x):
    """One ascent step of the discriminator on real vs fake inputs; returns its loss."""
    x = np.vstack([real_x, fake_x])
    p, cache = forward_cached(dparams, x)
    n = len(real_x)
    loss_r, g_r = bce_grad(p[:n], 1)
    loss_f, g_f = bce_grad(p[n:], 0)
    grads, _ = backward(dparams, x, np.vstack([g_r, g_f]), cache)
    adam_step(dparams, grads, dstate)
    return loss_r + loss_f


def discriminator_probs(dparams, x):
    return forward(dparams, x)[:, 0]


def train_conditional_gan(pairs, spec, cfg, history=None):
    """Adversarially fit a conditional generator to (condition, score, action) triples.

    The discriminator minimizes the usual real/fake cross-entropy and the
    generator minimizes the non-saturating ``-log D(fake)``.  When a list is
    passed as ``history`` the per-epoch mean losses are appended to it.
    """
    c, s, a = _check_pairs(pairs, spec)
    if len(s) < 2 * cfg.batch_size:
        raise ValueError(f"need at least {2 * cfg.batch_size} pairs, got {len(s)}")
    rng = np.random.default_rng(cfg.seed)
    cond_scaler, action_scaler = Standardizer.fit(c), Standardizer.fit(a)
    cz, az = cond_scaler.transform(c), action_scaler.transform(a)

    gp = init_params(spec.generator_mlp, rng)
    dp = init_params(spec.discriminator_mlp, rng)
    gstate = adam_init(gp, cfg.lr_g, cfg.beta1, cfg.beta2)
    dstate = adam_init(dp, cfg.lr_d, cfg.beta1, cfg.beta2)
    n, bs, k = len(s), cfg.batch_size, spec.condition_dim + 1
    act_cols = slice(k, k + spec.action_dim)

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        d_losses, g_losses = [], []
        for start in range(0, n - bs + 1, bs):
            idx = perm[start:start + bs]
            cs = np.column_stack([cz[idx], s[idx]])
            for _ in range(cfg.d_steps):
                z = rng.standard_normal((bs, spec.noise_dim))
                fake = forward(gp, np.column_stack([cs, z]))
                d_losses.append(
                    discriminator_step(dp, dstate, np.column_stack([cs, az[idx]]), np.column_stack([cs, fake]))
                )
            z = rng.standard_normal((bs, spec.noise_dim))
            gin = np.column_stack([cs, z])
            fake, gcache = forward_cached(gp, gin)
            dx = np.column_stack([cs, fake])
            p, dcache = forward_cached(dp, dx)
            g_loss, g_p = bce_grad(p, 1)
            _, g_dx = backward(dp, dx, g_p, dcache)
            ggrads, _ = backward(gp, gin, g_dx[:, act_cols], gcache)
            adam_step(gp, ggrads, gstate)
            g_losses.append(g_loss)
        d_mean, g_mean = float(np.mean(d_losses)), float(np.mean(g_losses))
        if not (np.isfinite(d_mean) and np.isfinite(g_mean)):
            raise FloatingPointError(f"non-finite GAN loss at epoch {epoch}")
        if history is not None:
            history.append((epoch, d_mean, g_mean))
        if (epoch + 1) % 50 == 0 or epoch == cfg.epochs - 1:
            log.debug("epoch %d  d_loss %.4f  g_loss %.4f", epoch + 1, d_mean, g_mean)
    return Generator(gp, spec, cond_scaler, action_scaler)


# --- bundles -------------------------------------------------------------------

def save_generator(g, directory):
    os.makedirs(directory, exist_ok=True)
    save_weights(g.params, os.path.join(directory, "weights.mlp"))
    with open(os.path.join(directory, "spec.json"), "w") as fh:
        json.dump(asdict(g.spec), fh, indent=1, sort_keys=True)
        fh.write("\n")
    scaling = {
        "condition_mean": g.cond_scaler.mean.tolist(),
        "condition_std": g.cond_scaler.std.tolist(),
        "action_mean": g.action_scaler.mean.tolist(),
        "action_std": g.action_scaler.std.tolist(),
    }
    with open(os.path.join(directory, "scaling.json"), "w") as fh:
        json.dump(scaling, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_generator(directory):
    with open(os.path.join(directory, "spec.json")) as fh:
        spec = GanSpec(**json.load(fh))
    mlp = spec.generator_mlp
    params = load_weights(os.path.join(directory, "weights.mlp"), mlp.hidden_activation, mlp.output_activation)
    if params.spec != mlp:
        raise ValueError(f"{directory}: weight file does not match spec.json")
    with open(os.path.join(directory, "scaling.json")) as fh:
        sc = json.load(fh)
    return Generator(
        params,
        spec,
        Standardizer(np.array(sc["condition_mean"]), np.array(sc["condition_std"])),
        Standardizer(np.array(sc["action_mean"]), np.array(sc["action_std"])),
    )


# --- pair builders ---------------------------------------------------------------

def _pairs(ds, cond_cols, score_col, action_cols):
    scores = ds.column(score_col)
    if np.isnan(scores).any():
        raise ValueError(f"dataset rows are missing {score_col} scores")
    return PairSet(
        np.column_stack([ds.column(k) for k in cond_cols]),
        np.asarray(scores, dtype=float),
        np.column_stack([ds.column(k) for k in action_cols]),
    )


G1_CONDITION = ("v1_r", "theta1_r")
G2_CONDITION = ("v1_r", "theta1_r", "v2_r", "theta2_r", "v_cap_rem")


def make_g1_pairs(train):
    return _pairs(train, G1_CONDITION, "s1", ("v1_b", "theta1_b"))


def make_g2_pairs(train):
    return _pairs(train, G2_CONDITION, "s2", ("v2_b", "theta2_b"))
