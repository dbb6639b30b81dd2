"""End-to-end acceptance checks; each records one PASS/FAIL line in the terminal summary."""

import os
import time

import numpy as np
import pytest

from pursuitgan.cgan import GanSpec, PairSet, TrainConfig, train_conditional_gan
from pursuitgan.cli import main
from pursuitgan.dataset import generate_dataset
from pursuitgan.evaluation import DEFAULT_SETTINGS, PipelineConfig, multirun
from pursuitgan.game import (
    GameConfig,
    position_after,
    red_stage2,
    safety_circle,
    sample_red_stage1,
    scripted_blue_stage1,
)
from pursuitgan.neural import MlpSpec, grad_check

N_CANDIDATES = 3600


def test_simulator_fidelity(record_criterion):
    cfg = GameConfig()
    n = 100_000
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    centers, radii, mids, dests, ends = [], [], [], [], []
    for _ in range(n):
        r1 = sample_red_stage1(cfg, rng)
        b1 = scripted_blue_stage1(cfg, r1)
        mid = position_after(cfg.blue_start, b1, cfg.half)
        r2, dest = red_stage2(cfg, r1, mid)
        c, r = safety_circle(cfg, r1)
        centers.append(c)
        radii.append(r)
        mids.append(mid)
        dests.append(dest)
        ends.append(position_after(position_after(cfg.red_start, r1, cfg.half), r2, cfg.half))
    centers, radii, mids, dests, ends = (np.array(a, dtype=float) for a in (centers, radii, mids, dests, ends))

    on_circle = np.abs(np.hypot(*(dests - centers).T) - radii)
    reached = np.hypot(*(ends - dests).T)
    phi = np.linspace(0.0, 2 * np.pi, N_CANDIDATES, endpoint=False)
    ring = np.column_stack([np.cos(phi), np.sin(phi)])
    d_dest = np.hypot(*(dests - mids).T)
    # every candidate's squared distance, expanded as |c - m|^2 + r^2 + 2 r (c - m) . u
    off = centers - mids
    best = np.empty(n)
    for lo in range(0, n, 10_000):
        o, r = off[lo:lo + 10_000], radii[lo:lo + 10_000]
        cand_sq = (o**2).sum(axis=1)[:, None] + (r**2)[:, None] + 2 * r[:, None] * (o @ ring.T)
        best[lo:lo + 10_000] = np.sqrt(np.clip(cand_sq, 0.0, None).max(axis=1))
    shortfall = float(np.max(best - d_dest))
    elapsed = time.perf_counter() - t0

    ok = on_circle.max() < 1e-9 and reached.max() < 1e-9 and shortfall < 1e-6 and elapsed < 30
    record_criterion(
        1, "simulator fidelity", ok,
        f"max off-circle {on_circle.max():.2e}, max candidate advantage {shortfall:.2e}, {elapsed:.1f}s",
    )
    assert ok


def test_success_rate(record_criterion):
    cfg = GameConfig()
    t0 = time.perf_counter()
    ds = generate_dataset(cfg, 15000, 2024)
    frac = float(np.mean(ds.column("d_rb") < 1e-6))
    elapsed = time.perf_counter() - t0
    ok = 0.80 <= frac <= 0.95 and elapsed < 60
    record_criterion(2, "success-rate reproduction", ok, f"fraction {frac:.4f} in [0.80, 0.95], {elapsed:.1f}s")
    assert ok


def test_gradient_correctness(record_criterion):
    rng = np.random.default_rng(77)
    specs = [
        GanSpec(2).generator_mlp,
        GanSpec(5).generator_mlp,
        GanSpec(2).discriminator_mlp,
        GanSpec(5).discriminator_mlp,
    ]
    acts = ("relu", "leaky_relu", "tanh", "identity")
    while len(specs) < 20:
        depth = int(rng.integers(1, 4))
        sizes = tuple(int(s) for s in rng.integers(1, 12, depth + 1))
        specs.append(MlpSpec(sizes, acts[rng.integers(4)], ("identity", "sigmoid", "tanh")[rng.integers(3)]))
    t0 = time.perf_counter()
    worst = max(grad_check(spec, seed) for seed, spec in enumerate(specs))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 30
    record_criterion(3, "gradient correctness", ok, f"max relative error {worst:.2e} over 20 nets, {elapsed:.1f}s")
    assert ok


def test_gan_smoke(record_criterion):
    rng = np.random.default_rng(0)
    c = rng.uniform(-1, 1, (4000, 2))
    pairs = PairSet(c, rng.uniform(0, 1, 4000), 2 * c + 0.05 * rng.standard_normal((4000, 2)))
    t0 = time.perf_counter()
    g = train_conditional_gan(pairs, GanSpec(2), TrainConfig(epochs=100, seed=1))
    held = np.random.default_rng(1).uniform(-1, 1, (200, 2))
    mean = np.mean([g.sample(held, 0.5, np.random.default_rng(100 + k)) for k in range(50)], axis=0)
    mae = float(np.abs(mean - 2 * held).mean())
    elapsed = time.perf_counter() - t0
    ok = mae < 0.1 and elapsed < 120
    record_criterion(4, "GAN smoke", ok, f"held-out conditional MAE {mae:.4f}, {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def desk_runs():
    pcfg = PipelineConfig(n_episodes=3750, train_frac=0.8, train=TrainConfig(epochs=300), n_mc=30, k=30)
    t0 = time.perf_counter()
    result = multirun(5, 2025, pcfg)
    return result, time.perf_counter() - t0


@pytest.mark.slow
def test_directional_result(desk_runs, record_criterion):
    result, elapsed = desk_runs
    runs = result["runs"]
    keys = ("mean_delta_ss", "mean_delta_sr_star", "mean_delta_sr")
    ok = all(r[k] < 0 for r in runs for k in keys) and elapsed < 1800 and all(r["n_train"] == 3000 for r in runs)
    worst = {k: max(r[k] for r in runs) for k in keys}
    record_criterion(
        5, "end-to-end directional result", ok,
        "largest run means " + ", ".join(f"{k[5:]} {v:.3f}" for k, v in worst.items()) + f", {elapsed:.0f}s",
    )
    assert ok


@pytest.mark.slow
def test_violation_rate(desk_runs, record_criterion):
    runs = desk_runs[0]["runs"]
    fracs = [r["violations_two_step"] / r["n_test"] for r in runs]
    ok = sum(f < 0.15 for f in fracs) >= 4
    record_criterion(6, "violation rate", ok, "fractions " + ", ".join(f"{f:.3f}" for f in fracs))
    assert ok


@pytest.mark.slow
def test_score_sensitivity(desk_runs, record_criterion):
    runs = desk_runs[0]["runs"]
    ordered = 0
    for r in runs:
        means = {(s1, s2): m for s1, s2, m in r["sensitivity_means"]}
        hi, mid, lo = (means[s] for s in DEFAULT_SETTINGS)
        ordered += hi > mid > lo
    ok = ordered >= 4
    record_criterion(7, "score sensitivity", ok, f"ordered in {ordered} of {len(runs)} runs")
    assert ok


@pytest.mark.slow
def test_best_of_k(desk_runs, record_criterion):
    runs = desk_runs[0]["runs"]
    ok = all(r["best_of_k"] <= r["best_of_1"] for r in runs)
    detail = ", ".join(f"{r['best_of_k']:.2f}<={r['best_of_1']:.2f}" for r in runs)
    record_criterion(8, "best-of-K dominance", ok, f"k=30 vs k=1 mean d_rb: {detail}")
    assert ok


def _snapshot(directory):
    out = {}
    for root, _, files in os.walk(directory):
        for name in files:
            path = os.path.join(root, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, directory)] = fh.read()
    return out


def test_cli_determinism(tmp_path, monkeypatch, record_criterion):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    d = lambda name: str(tmp_path / name)  # noqa: E731
    train = ["--epochs", "3", "--batch-size", "64", "--n-mc", "3", "--threads", "1"]
    commands = [
        ("gen-data", ["gen-data", "--n", "500", "--seed", "5", "--threads", "1", "--out", d("data")]),
        ("train two-step", ["train", "--data", d("data"), "--seed", "6", *train, "--out", d("two")]),
        ("train single-step", ["train", "--data", d("data"), "--model", "single-step", "--seed", "7", *train,
                               "--out", d("single")]),
        ("eval", ["eval", "--data", d("data"), "--two-step", d("two"), "--single-step", d("single"), "--seed", "8",
                  "--threads", "1", "--out", d("eval")]),
        ("sweep", ["sweep", "--data", d("data"), "--two-step", d("two"), "--seed", "9", "--threads", "1",
                   "--out", d("sweep")]),
        ("multirun", ["multirun", "--n", "400", "--runs", "2", "--seed", "10", *train, "--out", d("multi")]),
    ]
    differing = []
    for name, argv in commands:
        out = argv[argv.index("--out") + 1]
        assert main(argv) == 0
        first = _snapshot(out)
        assert main(argv) == 0
        if _snapshot(out) != first:
            differing.append(name)
    ok = not differing
    detail = "all six commands byte-identical" if ok else "differs: " + ", ".join(differing)
    record_criterion(9, "CLI determinism", ok, detail)
    assert ok
