"""Experiment orchestration: model pools, attack sweeps and report files.

A sweep trains, for every ratio ``alpha`` in the configuration and every
repetition, a victim pool and a disjoint adversary pool of small networks.
Pools are cached per ``(alpha, role, repetition)`` and shared by every pair
that uses that ratio. Each configured attack is fitted on the adversary's
pools and scored on a balanced set of victims, giving one
:class:`~distinf.leakage.LeakageReport` per ``(pair, attack, repetition)``.

Seeds are derived with :func:`distinf._seeding.mix` from
``(master_seed, purpose tag, alpha index, repetition, model index)``, so
output files are byte-identical across runs and worker counts.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _seeding, leakage, nets
from . import synthdata as sd
from .attacks import blackbox, meta
from .attacks.pool import ShadowPool
from .errors import ConfigError, EqualRatios, UnknownAttack
from .oracle import mc_attack_accuracy

log = logging.getLogger(__name__)

CONFIG_FORMAT = "distinf-config/1"
ATTACKS = ("loss", "threshold", "meta", "meta-regress")
OUTLIER_RULE = "median over cells with finite n_leaked; non-finite values excluded, no trimming"

# purpose tags folded into derived seeds
TAG_MODEL = 0x4D4F44
TAG_TEST = 0x544553
TAG_META = 0x4D4554
TAG_REGRESS = 0x524547

DEFAULT_ARCH = (
    nets.Dense(8, 16), nets.Relu(), nets.Dense(16, 8), nets.Relu(), nets.Dense(8, 1), nets.SigmoidOutput()
)


@dataclass(frozen=True)
class ExperimentConfig:
    underlying: sd.UnderlyingSpec = field(default_factory=sd.UnderlyingSpec)
    alpha_grid: tuple = (0.0, 0.5, 1.0)
    fixed_alpha0: float | None = None
    dataset_size: int = 500
    test_size: int = 500
    n_victim: int = 40
    n_shadow: int = 20
    arch: tuple = DEFAULT_ARCH
    input_shape: tuple | None = None
    train_cfg: nets.TrainConfig = field(default_factory=lambda: nets.TrainConfig(epochs=20))
    meta_cfg: meta.MetaConfig = field(default_factory=meta.MetaConfig)
    attacks: tuple = ATTACKS
    repetitions: int = 1
    master_seed: int = 0
    workers: int = 1
    output_dir: str = "sweep-out"

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "attacks", tuple(self.attacks))
        object.__setattr__(self, "arch", tuple(self.arch))
        for a in self.alphas():
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"ratio {a} outside [0, 1]")
        if min(self.dataset_size, self.test_size, self.n_victim, self.n_shadow, self.repetitions) < 1:
            raise ConfigError("sizes, counts and repetitions must be positive")
        unknown = set(self.attacks) - set(ATTACKS)
        if unknown:
            raise ConfigError(f"unknown attacks {sorted(unknown)}; choose from {ATTACKS}")

    def alphas(self):
        """Every ratio the sweep touches, sorted; positions give the seed alpha index."""
        extra = () if self.fixed_alpha0 is None else (float(self.fixed_alpha0),)
        return tuple(sorted(set(self.alpha_grid + extra)))

    def alpha_index(self, alpha):
        try:
            return self.alphas().index(float(alpha))
        except ValueError:
            raise ConfigError(f"ratio {alpha} is not part of this configuration") from None

    def pairs(self):
        """Ordered ``(alpha0, alpha1)`` pairs with ``alpha0 < alpha1``."""
        if self.fixed_alpha0 is not None:
            a0 = float(self.fixed_alpha0)
            return [(min(a0, a), max(a0, a)) for a in sorted(set(self.alpha_grid)) if a != a0]
        g = sorted(set(self.alpha_grid))
        return [(g[i], g[j]) for i in range(len(g)) for j in range(i + 1, len(g))]

    def to_dict(self):
        return {
            "format": CONFIG_FORMAT,
            "underlying": dataclasses.asdict(self.underlying),
            "alpha_grid": list(self.alpha_grid),
            "fixed_alpha0": self.fixed_alpha0,
            "dataset_size": self.dataset_size,
            "test_size": self.test_size,
            "n_victim": self.n_victim,
            "n_shadow": self.n_shadow,
            "arch": [nets._layer_to_json(l) for l in self.arch],
            "input_shape": None if self.input_shape is None else list(self.input_shape),
            "train": dataclasses.asdict(self.train_cfg),
            "meta": {**dataclasses.asdict(self.meta_cfg), "mode": self.meta_cfg.mode.value,
                     "layers": None if self.meta_cfg.layers is None else list(self.meta_cfg.layers)},
            "attacks": list(self.attacks),
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        fmt = doc.pop("format", CONFIG_FORMAT)
        if fmt != CONFIG_FORMAT:
            raise ConfigError(f"unsupported config format {fmt!r}")
        known = {f.name for f in dataclasses.fields(cls)} | {"train", "meta"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kw = {}
        try:
            if "underlying" in doc:
                kw["underlying"] = sd.UnderlyingSpec(**doc.pop("underlying"))
            if "arch" in doc:
                kw["arch"] = tuple(nets._layer_from_json(l) for l in doc.pop("arch"))
            if doc.get("input_shape") is not None:
                kw["input_shape"] = tuple(doc.pop("input_shape"))
            doc.pop("input_shape", None)
            if "train" in doc:
                kw["train_cfg"] = nets.TrainConfig(**doc.pop("train"))
            if "meta" in doc:
                m = dict(doc.pop("meta"))
                if m.get("layers") is not None:
                    m["layers"] = tuple(m["layers"])
                kw["meta_cfg"] = meta.MetaConfig(**m)
            if "alpha_grid" in doc:
                kw["alpha_grid"] = tuple(doc.pop("alpha_grid"))
            if "attacks" in doc:
                kw["attacks"] = tuple(doc.pop("attacks"))
            kw.update(doc)
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def config_hash(self):
        """Short digest of everything that affects results (not workers or output_dir)."""
        doc = self.to_dict()
        doc.pop("workers")
        doc.pop("output_dir")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path):
    with open(path) as fh:
        try:
            return ExperimentConfig.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


# --- pools --------------------------------------------------------------------


def _role(role):
    return role if isinstance(role, sd.Pool) else sd.Pool[str(role).upper()]


def model_seed(cfg, alpha, role, rep, index, replica=0):
    words = [cfg.master_seed, TAG_MODEL, _role(role).value, cfg.alpha_index(alpha), rep, index]
    if replica:
        words.append(replica)
    return _seeding.mix(*words)


def pool_size(cfg, role):
    return cfg.n_victim if _role(role) is sd.Pool.VICTIM else cfg.n_shadow


def pool_dataset(cfg, alpha, role, rep, index, replica=0):
    seed = model_seed(cfg, alpha, role, rep, index, replica)
    spec = sd.RatioDistributionSpec(cfg.underlying, float(alpha))
    return sd.sample_dataset(spec, cfg.dataset_size, seed, _role(role))


def _train_one(args):
    cfg, alpha, role, rep, index, replica = args
    seed = model_seed(cfg, alpha, role, rep, index, replica)
    data = pool_dataset(cfg, alpha, role, rep, index, replica)
    net = nets.init(cfg.arch, seed, cfg.input_shape)
    tc = dataclasses.replace(cfg.train_cfg, seed=seed)
    return nets.train(net, data, tc), {
        "alpha": float(alpha), "role": _role(role).name.lower(), "rep": rep,
        "index": index, "replica": replica, "seed": seed,
    }


def build_pools(cfg, alpha, role, rep, replica=0, executor=None):
    """Train the configured number of models for one ``(alpha, role, rep)``.

    Returns ``[(NetParams, metadata), ...]`` in index order.
    """
    jobs = [(cfg, float(alpha), _role(role), rep, i, replica) for i in range(pool_size(cfg, role))]
    if executor is not None:
        return list(executor.map(_train_one, jobs))
    return [_train_one(j) for j in jobs]


def check_pools_disjoint(cfg, alpha, rep, replica=0):
    """True iff no victim training record equals an adversary training record at this ratio."""
    adv = [pool_dataset(cfg, alpha, sd.Pool.ADVERSARY, rep, i, replica) for i in range(cfg.n_shadow)]
    vic = [pool_dataset(cfg, alpha, sd.Pool.VICTIM, rep, i, replica) for i in range(cfg.n_victim)]
    a = sd.Dataset(np.vstack([d.X for d in adv]), np.concatenate([d.y for d in adv]), np.concatenate([d.prop for d in adv]))
    v = sd.Dataset(np.vstack([d.X for d in vic]), np.concatenate([d.y for d in vic]), np.concatenate([d.prop for d in vic]))
    return sd.check_pool_disjointness(a, v)


def test_set(cfg, alpha, rep, replica=0):
    """The adversary's held-out sample from ``G_alpha`` used by the black-box attacks."""
    words = [cfg.master_seed, TAG_TEST, cfg.alpha_index(alpha), rep]
    if replica:
        words.append(replica)
    spec = sd.RatioDistributionSpec(cfg.underlying, float(alpha))
    return sd.sample_dataset(spec, cfg.test_size, _seeding.mix(*words), sd.Pool.ADVERSARY)


class PoolCache:
    """Trained pools keyed by ``(alpha, role, rep, replica)``."""

    def __init__(self, cfg, executor=None):
        self.cfg = cfg
        self.executor = executor
        self._pools = {}
        self._tests = {}
        self._regressors = {}

    def models(self, alpha, role, rep, replica=0):
        key = (float(alpha), _role(role), rep, replica)
        if key not in self._pools:
            if _role(role) is sd.Pool.VICTIM and not check_pools_disjoint(self.cfg, alpha, rep, replica):
                raise ConfigError(f"victim and adversary data overlap at alpha={alpha}")
            self._pools[key] = [m for m, _ in build_pools(self.cfg, alpha, role, rep, replica, self.executor)]
        return self._pools[key]

    def test(self, alpha, rep, replica=0):
        key = (float(alpha), rep, replica)
        if key not in self._tests:
            self._tests[key] = test_set(self.cfg, alpha, rep, replica)
        return self._tests[key]

    def regressor(self, rep):
        """Regression meta-classifier trained on adversary pools over every configured ratio."""
        if rep not in self._regressors:
            models, alphas = [], []
            for a in self.cfg.alphas():
                pool = self.models(a, sd.Pool.ADVERSARY, rep)
                models += pool
                alphas += [a] * len(pool)
            mcfg = dataclasses.replace(self.cfg.meta_cfg, mode=meta.MetaMode.REGRESSION)
            seed = _seeding.mix(self.cfg.master_seed, TAG_REGRESS, rep)
            self._regressors[rep] = meta.meta_train(ShadowPool(models, [], alphas), mcfg, seed)
        return self._regressors[rep]


# --- one pair -----------------------------------------------------------------


def _report(cfg, alpha0, alpha1, attack, rep, preds, truths, seed, extra_flags=()):
    acc = mc_attack_accuracy(preds, truths)
    flags = list(extra_flags)
    n_leaked = None
    if alpha0 == alpha1:
        flags.append("equal_ratios")
    elif acc.accuracy < 0.5:
        flags.append("below_chance")
        n_leaked = 0.0
    else:
        n_leaked = leakage.n_leaked_binary((alpha0, alpha1), acc.accuracy)
    return leakage.LeakageReport(
        accuracy=acc.accuracy, advantage=acc.advantage, n_leaked=n_leaked,
        alpha0=float(alpha0), alpha1=float(alpha1), attack=attack, rep=rep,
        n_eval=len(preds), flags=flags, seed=seed, config_hash=cfg.config_hash(),
    )


def _accs(models, data):
    return np.array([nets.accuracy(m, data) for m in models])


def run_pair(cfg, alpha0, alpha1, rep=0, cache=None):
    """Fit and score every configured attack on one ratio pair.

    With ``alpha0 == alpha1`` the two sides use independent replica pools, so
    binary attacks measure chance performance (the null experiment).
    """
    cache = cache or PoolCache(cfg)
    alpha0, alpha1 = float(alpha0), float(alpha1)
    equal = alpha0 == alpha1
    r1 = 1 if equal else 0
    victims0 = cache.models(alpha0, sd.Pool.VICTIM, rep)
    victims1 = cache.models(alpha1, sd.Pool.VICTIM, rep, r1)
    truths = [0] * len(victims0) + [1] * len(victims1)
    victims = victims0 + victims1
    reports = []
    pair_seed = _seeding.mix(cfg.master_seed, cfg.alpha_index(alpha0), cfg.alpha_index(alpha1), rep)

    if "loss" in cfg.attacks or "threshold" in cfg.attacks:
        s0, s1 = cache.test(alpha0, rep), cache.test(alpha1, rep, r1)
        v0, v1 = _accs(victims, s0), _accs(victims, s1)
        if "loss" in cfg.attacks:
            out = [blackbox.loss_test(a, b) for a, b in zip(v0, v1)]
            ties = sum(t for _, t in out)
            reports.append(_report(cfg, alpha0, alpha1, "loss", rep, [b for b, _ in out], truths, pair_seed,
                                   [f"ties={ties}"] if ties else []))
        if "threshold" in cfg.attacks:
            shadow0 = cache.models(alpha0, sd.Pool.ADVERSARY, rep)
            shadow1 = cache.models(alpha1, sd.Pool.ADVERSARY, rep, r1)
            sh = shadow0 + shadow1
            labels = [0] * len(shadow0) + [1] * len(shadow1)
            rule = blackbox.threshold_fit(labels, _accs(sh, s0), _accs(sh, s1))
            scores = v1 if rule.chosen_set else v0
            preds = [blackbox.threshold_apply(rule, a) for a in scores]
            reports.append(_report(cfg, alpha0, alpha1, "threshold", rep, preds, truths, pair_seed,
                                   ["threshold_tie"] if rule.tied else []))

    if "meta" in cfg.attacks:
        shadow = ShadowPool.binary(cache.models(alpha0, sd.Pool.ADVERSARY, rep),
                                   cache.models(alpha1, sd.Pool.ADVERSARY, rep, r1))
        seed = _seeding.mix(pair_seed, TAG_META)
        mc = dataclasses.replace(cfg.meta_cfg, mode=meta.MetaMode.BINARY)
        clf = meta.meta_train(shadow, mc, seed)
        preds = (meta.meta_output(clf, victims) >= 0.5).astype(int)
        reports.append(_report(cfg, alpha0, alpha1, "meta", rep, preds, truths, seed))

    if "meta-regress" in cfg.attacks:
        reg = cache.regressor(rep)
        if not (equal and alpha0 not in cfg.alphas()):
            pred = meta.meta_output(reg, victims)
            true_alpha = np.array([alpha0] * len(victims0) + [alpha1] * len(victims1))
            mse = float(np.mean((pred - true_alpha) ** 2))
            if equal:
                rep_ = leakage.LeakageReport(
                    accuracy=None, advantage=None, n_leaked=None, alpha0=alpha0, alpha1=alpha1,
                    attack="meta-regress", rep=rep, n_eval=len(victims), mse=mse,
                    flags=["regression_only"], seed=pair_seed, config_hash=cfg.config_hash(),
                )
                if 0.0 < alpha0 < 1.0:
                    rep_.n_leaked = leakage.n_leaked_regression(alpha0, mse)
                reports.append(rep_)
            else:
                preds = [blackbox.regression_to_binary(p, alpha0, alpha1) for p in pred]
                r = _report(cfg, alpha0, alpha1, "meta-regress", rep, preds, truths, pair_seed)
                r.mse = mse
                reports.append(r)
    return reports


# --- sweeps -------------------------------------------------------------------


@dataclass
class SweepResult:
    config: ExperimentConfig
    reports: list
    errors: list = field(default_factory=list)
    regression: list = field(default_factory=list)  # per (alpha, rep) MSE rows

    def cells(self, attack=None):
        """Aggregate per ``(alpha0, alpha1, attack)``: mean/std of accuracy, median n_leaked."""
        groups = {}
        for r in self.reports:
            if attack is not None and r.attack != attack:
                continue
            groups.setdefault((r.alpha0, r.alpha1, r.attack), []).append(r)
        out = {}
        for key, rs in sorted(groups.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
            accs = [r.accuracy for r in rs if r.accuracy is not None]
            finite = [r.n_leaked for r in rs if r.n_leaked is not None and math.isfinite(r.n_leaked)]
            out[key] = {
                "mean_accuracy": float(np.mean(accs)) if accs else None,
                "std_accuracy": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
                "median_n_leaked": float(np.median(finite)) if finite else None,
                "n_leaked_values": [r.n_leaked for r in rs],
                "repetitions": len(rs),
                "n_eval": sum(r.n_eval or 0 for r in rs),
                "mse": float(np.mean([r.mse for r in rs])) if all(r.mse is not None for r in rs) else None,
            }
        return out


def _executor(cfg):
    if cfg.workers > 1:
        return ProcessPoolExecutor(max_workers=cfg.workers)
    return None


def run_sweep(cfg, progress=None):
    """Run every pair x repetition x attack; failures become error cells, the sweep continues."""
    pairs = cfg.pairs()
    if not pairs:
        log.warning("alpha grid %s yields no pairs; nothing to run", cfg.alpha_grid)
        return SweepResult(cfg, [])
    reports, errors, regression = [], [], []
    ex = _executor(cfg)
    try:
        for rep in range(cfg.repetitions):
            cache = PoolCache(cfg, ex)
            for a0, a1 in pairs:
                try:
                    reports.extend(run_pair(cfg, a0, a1, rep, cache))
                except Exception as exc:  # noqa: BLE001 - recorded as an error cell
                    log.exception("pair (%s, %s) rep %d failed", a0, a1, rep)
                    errors.append({"alpha0": a0, "alpha1": a1, "rep": rep, "error": f"{type(exc).__name__}: {exc}"})
                if progress:
                    progress(rep, a0, a1)
            if "meta-regress" in cfg.attacks:
                reg = cache.regressor(rep)
                for a in cfg.alphas():
                    pred = meta.meta_output(reg, cache.models(a, sd.Pool.VICTIM, rep))
                    mse = float(np.mean((pred - a) ** 2))
                    clamped = float(np.mean((np.clip(pred, 0.0, 1.0) - a) ** 2))
                    regression.append({
                        "alpha": a, "rep": rep, "mse": mse, "mse_clamped": clamped,
                        "n_leaked": leakage.n_leaked_regression(a, mse) if 0.0 < a < 1.0 else None,
                    })
    finally:
        if ex is not None:
            ex.shutdown()
    return SweepResult(cfg, reports, errors, regression)


def _fmt(v):
    if v is None:
        return ""
    if math.isinf(v):
        return "inf"
    return f"{v:.6f}"


def emit_heatmap(result, attack):
    """Square CSV over the sorted grid: mean accuracy above the diagonal, median n_leaked below.

    Cell ``(i, j)`` with ``i < j`` holds the mean accuracy for
    ``(alpha_i, alpha_j)``; cell ``(j, i)`` holds the median n_leaked over
    repetitions (all values, ``inf`` included, so a single repetition
    reproduces the stored value). Blank where no result exists.
    """
    if attack not in ATTACKS:
        raise UnknownAttack(f"unknown attack {attack!r}")
    grid = sorted(set(result.config.alpha_grid) | ({result.config.fixed_alpha0} - {None}))
    pos = {a: i for i, a in enumerate(grid)}
    n = len(grid)
    M = [["" for _ in range(n)] for _ in range(n)]
    for (a0, a1, _), cell in result.cells(attack).items():
        if a0 == a1:
            continue
        i, j = sorted((pos[a0], pos[a1]))
        vals = [v for v in cell["n_leaked_values"] if v is not None]
        M[i][j] = _fmt(cell["mean_accuracy"])
        M[j][i] = _fmt(float(np.median(vals)) if vals else None)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(M)
    return buf.getvalue()


def summarize(result):
    """Per-attack summary: median n_leaked, best accuracy and the smallest ratio gap reaching 0.75."""
    cfg = result.config
    out = {
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "outlier_rule": OUTLIER_RULE,
        "attacks": {},
        "errors": result.errors,
    }
    for attack in cfg.attacks:
        cells = {k: v for k, v in result.cells(attack).items() if v["mean_accuracy"] is not None}
        finite = [c["median_n_leaked"] for c in cells.values() if c["median_n_leaked"] is not None]
        accs = [c["mean_accuracy"] for c in cells.values()]
        gaps = [round(abs(a1 - a0), 12) for (a0, a1, _), c in cells.items() if c["mean_accuracy"] >= 0.75]
        out["attacks"][attack] = {
            "cells": len(cells),
            "median_n_leaked": float(np.median(finite)) if finite else "none",
            "best_accuracy": max(accs) if accs else "none",
            "min_gap_at_0.75": min(gaps) if gaps else "none",
        }
    if result.regression:
        rows = {}
        for row in result.regression:
            rows.setdefault(row["alpha"], []).append(row)
        grid = sorted(rows)
        out["regression"] = {
            "baseline_mse": meta.regression_baseline_mse(grid),
            "mean_mse": float(np.mean([r["mse"] for r in result.regression])),
            "per_alpha": [
                {
                    "alpha": a,
                    "mse": float(np.mean([r["mse"] for r in rows[a]])),
                    "mse_clamped": float(np.mean([r["mse_clamped"] for r in rows[a]])),
                    "n_leaked": (leakage.n_leaked_regression(a, float(np.mean([r["mse"] for r in rows[a]])))
                                 if 0.0 < a < 1.0 else None),
                }
                for a in grid
            ],
        }
    return out


def _dumps(doc):
    return json.dumps(_encode(doc), indent=2, sort_keys=True) + "\n"


def _encode(v):
    if isinstance(v, dict):
        return {str(k): _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return round(v, 6)
    return v


def write_outputs(result, out_dir):
    """Write ``reports.json``, ``summary.json`` and one ``heatmap_<attack>.csv`` per attack."""
    os.makedirs(out_dir, exist_ok=True)
    reports = sorted(result.reports, key=lambda r: (r.attack, r.alpha0, r.alpha1, r.rep))
    paths = {}
    doc = {
        "config": result.config.to_dict(),
        "config_hash": result.config.config_hash(),
        "reports": [r.to_dict() for r in reports],
        "errors": result.errors,
        "regression": result.regression,
    }
    doc["config"].pop("workers")
    doc["config"].pop("output_dir")
    files = {"reports.json": _dumps(doc), "summary.json": _dumps(summarize(result))}
    for attack in result.config.attacks:
        files[f"heatmap_{attack}.csv"] = emit_heatmap(result, attack)
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        paths[name] = path
    return paths


def load_result(out_dir):
    """Rebuild a :class:`SweepResult` from a ``reports.json`` written by :func:`write_outputs`."""
    with open(os.path.join(out_dir, "reports.json")) as fh:
        doc = json.load(fh)
    cfg = ExperimentConfig.from_dict(doc["config"])
    reports = [leakage.LeakageReport.from_dict(r) for r in doc["reports"]]
    return SweepResult(cfg, reports, doc.get("errors", []), doc.get("regression", []))
