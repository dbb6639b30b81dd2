"""Training order for the two-step model: s2, then G2, then s1 via G2, then G1."""

import logging
from dataclasses import replace

from .cgan import GanSpec, make_g1_pairs, make_g2_pairs, train_conditional_gan
from .dataset import attach_s2, fit_norm_stats
from .policy import TwoStepModel
from .rng import derive_seed
from .scorer import QUERY_SCORE, attach_s1, build_s1_scores

log = logging.getLogger(__name__)


def train_two_step(train, cfg, train_cfg, stats=None, n_mc=30, query_scores=(QUERY_SCORE, QUERY_SCORE)):
    """Returns (model, s1 score table, training rows with s1 and s2 attached)."""
    if stats is None:
        stats = fit_norm_stats(train)
    if train.s2 is None:
        train = attach_s2(train, stats)
    seed = train_cfg.seed
    log.info("training G2 on %d rows", len(train))
    g2 = train_conditional_gan(
        make_g2_pairs(train), GanSpec(condition_dim=5), replace(train_cfg, seed=derive_seed(seed, 2))
    )
    log.info("building s1 scores with G2 (n_mc=%d)", n_mc)
    table = build_s1_scores(g2, train, cfg, n_mc=n_mc, seed=derive_seed(seed, 3))
    train = attach_s1(train, table)
    log.info("training G1 on %d rows", len(train))
    g1 = train_conditional_gan(
        make_g1_pairs(train), GanSpec(condition_dim=2), replace(train_cfg, seed=derive_seed(seed, 1))
    )
    model = TwoStepModel(g1, g2, stats["d_rb"], *query_scores)
    return model, table, train
