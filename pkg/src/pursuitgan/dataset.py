"""Episode datasets: generation, normalization statistics, splitting and CSV I/O."""

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .config import config_digest
from .game import EpisodeRecord, PolarAction, finish_episode, simulate_episode
from .rng import derived_rng

CSV_HEADER = (
    "episode_id",
    "v1_r",
    "theta1_r",
    "v1_b",
    "theta1_b",
    "v2_r",
    "theta2_r",
    "v2_b",
    "v_cap_rem",
    "theta2_b",
    "d_rb",
    "s2",
    "s1",
)
FEATURES = CSV_HEADER[1:11]
GENERATOR_VERSION = f"pursuitgan-{__version__}"


class ValidationError(ValueError):
    """Input artifacts are inconsistent with each other or with the config."""


@dataclass(frozen=True)
class MinMax:
    lo: float
    hi: float

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError(f"max {self.hi} < min {self.lo}")


@dataclass(frozen=True)
class NormStats:
    minmax: dict
    means: dict
    stds: dict

    def __getitem__(self, name):
        return self.minmax[name]


@dataclass(frozen=True)
class Provenance:
    config_digest: str
    master_seed: int
    generator_version: str = GENERATOR_VERSION


@dataclass(frozen=True)
class Dataset:
    rows: tuple
    provenance: Provenance
    s2: np.ndarray = None
    s1: np.ndarray = None

    def __post_init__(self):
        ids = [r.episode_id for r in self.rows]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate episode ids")
        for name in ("s2", "s1"):
            col = getattr(self, name)
            if col is None:
                continue
            col = np.array(col, dtype=float)
            if col.shape != (len(self.rows),):
                raise ValueError(f"{name} has wrong length")
            present = col[~np.isnan(col)]
            if np.any((present < 0) | (present > 1)):
                raise ValueError(f"{name} scores outside [0, 1]")
            col.flags.writeable = False
            object.__setattr__(self, name, col)

    def __len__(self):
        return len(self.rows)

    @property
    def episode_ids(self):
        return np.array([r.episode_id for r in self.rows], dtype=np.int64)

    def column(self, name):
        if name in ("s1", "s2"):
            col = getattr(self, name)
            return np.full(len(self), np.nan) if col is None else col
        return np.array([_row_values(r)[name] for r in self.rows], dtype=float)

    def subset(self, ids):
        """Rows with the given episode ids, kept in episode-id order."""
        wanted = set(int(i) for i in ids)
        keep = [i for i, r in enumerate(self.rows) if r.episode_id in wanted]
        if len(keep) != len(wanted):
            raise ValidationError("requested episode ids missing from dataset")
        pick = lambda col: None if col is None else col[keep]  # noqa: E731
        return Dataset(tuple(self.rows[i] for i in keep), self.provenance, pick(self.s2), pick(self.s1))

    def with_scores(self, s2=None, s1=None):
        return replace(
            self,
            s2=self.s2 if s2 is None else np.asarray(s2, dtype=float),
            s1=self.s1 if s1 is None else np.asarray(s1, dtype=float),
        )


def _row_values(r):
    return {
        "v1_r": r.r1.speed,
        "theta1_r": r.r1.heading,
        "v1_b": r.b1.speed,
        "theta1_b": r.b1.heading,
        "v2_r": r.r2.speed,
        "theta2_r": r.r2.heading,
        "v2_b": r.b2.speed,
        "v_cap_rem": r.v_cap_rem,
        "theta2_b": r.b2.heading,
        "d_rb": r.d_rb,
    }


def _simulate_chunk(args):
    cfg, master_seed, ids = args
    return [simulate_episode(cfg, derived_rng(master_seed, i), i) for i in ids]


def generate_dataset(cfg, n, master_seed, workers=1):
    """Simulate ``n`` scripted episodes, each from its own derived seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if workers <= 1:
        rows = _simulate_chunk((cfg, master_seed, range(n)))
    else:
        chunks = np.array_split(np.arange(n), workers * 4)
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_simulate_chunk, [(cfg, master_seed, c.tolist()) for c in chunks])
            rows = [r for part in parts for r in part]
    return Dataset(tuple(rows), Provenance(config_digest(cfg), int(master_seed)))


def fit_minmax(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot fit min-max statistics on an empty list")
    return MinMax(float(values.min()), float(values.max()))


def eta(stats, v):
    """Min-max normalize against fitted statistics, clamped to [0, 1]."""
    span = stats.hi - stats.lo
    if span == 0:
        return np.zeros_like(np.asarray(v, dtype=float))[()]
    return np.clip((np.asarray(v, dtype=float) - stats.lo) / span, 0.0, 1.0)[()]


def fit_norm_stats(train):
    """Min-max of d_rb plus mean/std of every feature, from training rows only."""
    cols = {name: train.column(name) for name in FEATURES}
    return NormStats(
        minmax={"d_rb": fit_minmax(cols["d_rb"])},
        means={k: float(v.mean()) for k, v in cols.items()},
        stds={k: float(v.std()) for k, v in cols.items()},
    )


def attach_s2(ds, stats):
    return ds.with_scores(s2=1.0 - eta(stats["d_rb"], ds.column("d_rb")))


def split(ds, train_frac, seed):
    """Seeded shuffle, then the first floor(n * train_frac) rows train."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(len(ds))
    n_train = math.floor(len(ds) * train_frac)
    ids = ds.episode_ids
    return ds.subset(ids[perm[:n_train]]), ds.subset(ids[perm[n_train:]])


# --- persistence -----------------------------------------------------------

def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


def provenance_line(prov):
    return (
        f"# config_digest={prov.config_digest} master_seed={prov.master_seed} "
        f"generator={prov.generator_version}\n"
    )


def _parse_provenance(line):
    fields = dict(tok.split("=", 1) for tok in line.lstrip("#").split())
    return Provenance(fields["config_digest"], int(fields["master_seed"]), fields["generator"])


def save_csv(ds, path):
    s2, s1 = ds.column("s2"), ds.column("s1")
    with open(path, "w", newline="") as fh:
        fh.write(provenance_line(ds.provenance))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, r in enumerate(ds.rows):
            vals = _row_values(r)
            w.writerow([r.episode_id] + [_fmt(vals[k]) for k in FEATURES] + [_fmt(s2[i]), _fmt(s1[i])])


def load_csv(path, cfg):
    """Read episodes.csv, rebuilding end points from the stored actions."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValidationError(f"{path}: missing provenance line")
        prov = _parse_provenance(first)
        if prov.config_digest != config_digest(cfg):
            raise ValidationError(f"{path}: dataset was generated under a different config")
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValidationError(f"{path}: unexpected header {header}")
        rows, s2, s1 = [], [], []
        for rec in reader:
            v = dict(zip(CSV_HEADER, rec))
            f = {k: float(v[k]) for k in FEATURES}
            r1 = PolarAction(f["v1_r"], f["theta1_r"])
            b1 = PolarAction(f["v1_b"], f["theta1_b"])
            r2 = PolarAction(f["v2_r"], f["theta2_r"])
            b2 = PolarAction(f["v2_b"], f["theta2_b"])
            red_end, blue_end, d = finish_episode(cfg, r1, b1, r2, b2)
            if abs(d - f["d_rb"]) > 1e-9 * max(1.0, d):
                raise ValidationError(f"{path}: episode {v['episode_id']} d_rb does not replay")
            rows.append(
                EpisodeRecord(
                    episode_id=int(v["episode_id"]),
                    r1=r1,
                    b1=b1,
                    r2=r2,
                    b2=b2,
                    v_cap_rem=f["v_cap_rem"],
                    d_rb=f["d_rb"],
                    violated=b1.speed + b2.speed > cfg.v_cap,
                    red_end=red_end,
                    blue_end=blue_end,
                )
            )
            s2.append(float(v["s2"]) if v["s2"] else math.nan)
            s1.append(float(v["s1"]) if v["s1"] else math.nan)
    s2 = None if all(math.isnan(x) for x in s2) else s2
    s1 = None if all(math.isnan(x) for x in s1) else s1
    return Dataset(tuple(rows), prov, s2, s1)


def normstats_to_dict(stats):
    return {
        "minima": {k: v.lo for k, v in stats.minmax.items()},
        "maxima": {k: v.hi for k, v in stats.minmax.items()},
        "means": dict(stats.means),
        "stds": dict(stats.stds),
    }


def normstats_from_dict(d):
    return NormStats(
        minmax={k: MinMax(d["minima"][k], d["maxima"][k]) for k in d["minima"]},
        means=dict(d["means"]),
        stds=dict(d["stds"]),
    )


def save_normstats(stats, path, prov, split_info=None):
    """Write normstats.json; ``split_info`` records which rows were used for fitting."""
    body = normstats_to_dict(stats)
    if split_info is not None:
        body["split"] = split_info
    with open(path, "w") as fh:
        fh.write(provenance_line(prov))
        json.dump(body, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_normstats(path):
    """Returns (stats, split_info or None, digest of the file body)."""
    with open(path) as fh:
        text = fh.read()
    body = "".join(line for line in text.splitlines(True) if not line.startswith("#"))
    d = json.loads(body)
    return normstats_from_dict(d), d.get("split"), hashlib.sha256(body.encode()).hexdigest()[:16]
