"""Paired evaluation of the decision models, score sweeps and multi-run experiments."""

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cgan import TrainConfig
from .dataset import fit_norm_stats, generate_dataset, split
from .game import GameConfig
from .pipeline import train_two_step
from .policy import best_of_k, fit_randomized, train_single_step
from .rng import derive_seed, derived_rng
from .scorer import realized_score

log = logging.getLogger(__name__)

DEFAULT_SETTINGS = ((0.95, 0.98), (0.55, 0.6), (0.15, 0.2))
N_BINS = 20


@dataclass
class EvalReport:
    episode_ids: list
    d_star: list
    d_s: list
    d_r: list
    violated: dict
    seed: int
    dataset_digest: str = ""
    sensitivity: list = field(default_factory=list)

    @property
    def delta_ss(self):
        return np.asarray(self.d_star) - np.asarray(self.d_s)

    @property
    def delta_sr_star(self):
        return np.asarray(self.d_star) - np.asarray(self.d_r)

    @property
    def delta_sr(self):
        return np.asarray(self.d_s) - np.asarray(self.d_r)

    @property
    def mean_deltas(self):
        return {
            "delta_ss": float(np.mean(self.delta_ss)),
            "delta_sr_star": float(np.mean(self.delta_sr_star)),
            "delta_sr": float(np.mean(self.delta_sr)),
        }

    @property
    def violations(self):
        return {k: count_violations(v) for k, v in self.violated.items()}

    def to_dict(self):
        d = asdict(self)
        d["summary"] = {"mean_deltas": self.mean_deltas, "violations": self.violations}
        return d

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k != "summary"}
        return cls(**d)


def count_violations(outcomes):
    """Number of violating outcomes; accepts outcome objects or plain flags."""
    return int(sum(bool(getattr(o, "violated", o)) for o in outcomes))


def evaluate(two_step, single_step, randomized, cfg, test, seed, dataset_digest=""):
    """Roll out all three models on every test row's opening Red action.

    The three models see the same r1 and start from the same per-episode
    random stream, so the distance differences are paired per episode.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    models = {"two_step": two_step, "single_step": single_step, "randomized": randomized}
    dist = {k: [] for k in models}
    viol = {k: [] for k in models}
    for row in test.rows:
        for name, m in models.items():
            o = m.rollout(cfg, row.r1, derived_rng(seed, row.episode_id))
            dist[name].append(float(o.d_rb))
            viol[name].append(bool(o.violated))
    return EvalReport(
        episode_ids=[int(r.episode_id) for r in test.rows],
        d_star=dist["two_step"],
        d_s=dist["single_step"],
        d_r=dist["randomized"],
        violated=viol,
        seed=int(seed),
        dataset_digest=dataset_digest,
    )


def sensitivity_sweep(m, cfg, test, settings, d_stats, seed):
    """Realized-score histograms of the two-step model under overridden query scores."""
    if not settings:
        raise ValueError("no settings to sweep")
    edges = np.linspace(0.0, 1.0, N_BINS + 1)
    out = []
    for s1, s2 in settings:
        mq = m.with_query_scores(s1, s2)
        d = np.array([mq.rollout(cfg, r.r1, derived_rng(seed, r.episode_id)).d_rb for r in test.rows])
        scores = realized_score(d_stats, d)
        counts, _ = np.histogram(scores, bins=edges)
        out.append(
            {
                "s1": float(s1),
                "s2": float(s2),
                "counts": counts.tolist(),
                "edges": edges.tolist(),
                "mean_score": float(np.mean(scores)),
            }
        )
    return out


def mean_best_of_k(m, cfg, test, k, seed):
    return float(np.mean([best_of_k(m, cfg, r.r1, k, derived_rng(seed, r.episode_id)).d_rb for r in test.rows]))


# --- multi-run experiments -------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    game: GameConfig = field(default_factory=GameConfig)
    n_episodes: int = 3750
    train_frac: float = 0.8
    train: TrainConfig = field(default_factory=TrainConfig)
    n_mc: int = 30
    k: int = 30
    settings: tuple = DEFAULT_SETTINGS


def run_once(pcfg, ds, run_seed):
    """split -> train both GAN models -> fit randomized -> evaluate, for one seed."""
    cfg = pcfg.game
    train, test = split(ds, pcfg.train_frac, derive_seed(run_seed, 0))
    stats = fit_norm_stats(train)
    tcfg = replace(pcfg.train, seed=derive_seed(run_seed, 1))
    two, _, _ = train_two_step(train, cfg, tcfg, stats, n_mc=pcfg.n_mc)
    single = train_single_step(train, cfg, replace(pcfg.train, seed=derive_seed(run_seed, 2)))
    rand = fit_randomized(train)
    eval_seed = derive_seed(run_seed, 3)
    report = evaluate(two, single, rand, cfg, test, eval_seed)
    sweep = sensitivity_sweep(two, cfg, test, pcfg.settings, stats["d_rb"], eval_seed)
    return {
        "run_seed": int(run_seed),
        "n_train": len(train),
        "n_test": len(test),
        **{f"mean_{k}": v for k, v in report.mean_deltas.items()},
        **{f"violations_{k}": v for k, v in report.violations.items()},
        "mean_d_star": float(np.mean(report.d_star)),
        "mean_d_s": float(np.mean(report.d_s)),
        "mean_d_r": float(np.mean(report.d_r)),
        "best_of_1": mean_best_of_k(two, cfg, test, 1, eval_seed),
        "k": pcfg.k,
        "best_of_k": mean_best_of_k(two, cfg, test, pcfg.k, eval_seed),
        "sensitivity_means": [[s["s1"], s["s2"], s["mean_score"]] for s in sweep],
    }


def _run_job(args):
    pcfg, ds, run_seed = args
    return run_once(pcfg, ds, run_seed)


def box_stats(values):
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(v) for v in q)))


def multirun(n_runs, base_seed, pcfg, workers=1):
    """Repeat split/train/evaluate with derived seeds over one generated dataset."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    ds = generate_dataset(pcfg.game, pcfg.n_episodes, derive_seed(base_seed, 0xDA7A))
    jobs = [(pcfg, ds, derive_seed(base_seed, i)) for i in range(n_runs)]
    if workers <= 1:
        runs = []
        for i, job in enumerate(jobs):
            log.info("run %d/%d", i + 1, n_runs)
            runs.append(_run_job(job))
    else:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    for i, r in enumerate(runs):
        r["run_id"] = i
    summary = {
        k: box_stats([r[k] for r in runs]) for k in ("mean_delta_ss", "mean_delta_sr_star", "mean_delta_sr")
    }
    return {"runs": runs, "summary": summary, "base_seed": int(base_seed)}


# --- report files ------------------------------------------------------------------

def _f(x):
    return format(float(x), ".17g")


def write_report_json(report, path):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_report_json(path):
    with open(path) as fh:
        return EvalReport.from_dict(json.load(fh))


def write_deltas_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("episode_id", "d_star", "d_s", "d_r", "delta_ss", "delta_sr_star", "delta_sr"))
        cols = zip(report.episode_ids, report.d_star, report.d_s, report.d_r,
                   report.delta_ss, report.delta_sr_star, report.delta_sr)
        for eid, *vals in cols:
            w.writerow([eid] + [_f(v) for v in vals])


def write_sensitivity_csv(sweep, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("setting_s1", "setting_s2", "bin_lo", "bin_hi", "count"))
        for s in sweep:
            e = s["edges"]
            for i, c in enumerate(s["counts"]):
                w.writerow((_f(s["s1"]), _f(s["s2"]), _f(e[i]), _f(e[i + 1]), c))


def write_multirun_csv(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("run_id", "mean_delta_ss", "mean_delta_sr_star", "mean_delta_sr",
                    "violations_two_step", "violations_single", "violations_rand"))
        for r in result["runs"]:
            w.writerow((r["run_id"], _f(r["mean_delta_ss"]), _f(r["mean_delta_sr_star"]),
                        _f(r["mean_delta_sr"]), r["violations_two_step"],
                        r["violations_single_step"], r["violations_randomized"]))
