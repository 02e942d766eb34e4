"""Synthetic ratio distributions, victim/adversary pools and Zipf degree samples.

The generator has two coordinate blocks:

* ``noise_dims`` label-informative coordinates, shifted by a fixed
  rule-seeded direction ``u`` when ``label == 1``;
* ``signal_dims`` property-correlated coordinates, shifted by
  ``signal_strength * (2 * property - 1)`` on every coordinate plus a
  coupling term ``coupling * LABEL_SHIFT * (2 * label - 1) * (2 * property - 1) * v``
  for a second rule-seeded unit direction ``v``.

With ``coupling > 0`` the label rule reads the property block with a sign
that depends on the property, so models trained at different ratios learn
visibly different weights. With ``coupling == 0`` the property is latent:
present in the inputs but irrelevant to the task.

The label is drawn independently of the property, and ``p(x | property)``
never depends on ``alpha``: only the mixing prior changes.

Every record is generated from its own key ``mix(seed, pool_tag, index)``
through a counter-based hash, so appending records never perturbs earlier
ones and victim and adversary pools never share a stream.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _seeding
from .errors import MalformedDocument, ShapeMismatch

LABEL_SHIFT = 2.0


class Pool(enum.Enum):
    VICTIM = 1
    ADVERSARY = 2


class Mode(enum.Enum):
    IID = "iid"
    EXACT_COUNT = "exact"


@dataclass(frozen=True)
class UnderlyingSpec:
    noise_dims: int = 4
    signal_dims: int = 4
    signal_strength: float = 1.0
    label_property_coupling: float = 0.5
    rule_seed: int = 0

    def __post_init__(self):
        if self.noise_dims < 1 or self.signal_dims < 1:
            raise ValueError("noise_dims and signal_dims must be >= 1")
        if not 0.0 <= self.label_property_coupling <= 1.0:
            raise ValueError("label_property_coupling must lie in [0, 1]")
        if self.signal_strength < 0:
            raise ValueError("signal_strength must be nonnegative")

    @property
    def dims(self):
        return self.noise_dims + self.signal_dims

    def _unit(self, salt, size):
        z = _seeding.normals(np.array([_seeding.mix(self.rule_seed, salt)], dtype=np.uint64), size)[0]
        return z / np.linalg.norm(z)

    @cached_property
    def label_direction(self):
        return LABEL_SHIFT * self._unit(0x4C41424C, self.noise_dims)

    @cached_property
    def coupling_direction(self):
        return self._unit(0x434F5550, self.signal_dims)


@dataclass(frozen=True)
class RatioDistributionSpec:
    underlying: UnderlyingSpec
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha={self.alpha!r} outside [0, 1]")


@dataclass(frozen=True)
class Record:
    features: np.ndarray
    label: int
    property: int


@dataclass
class Dataset:
    """Columnar dataset: ``X`` is ``(m, d)`` float64, ``y`` and ``prop`` are 0/1."""

    X: np.ndarray
    y: np.ndarray
    prop: np.ndarray
    pool: Pool | None = None
    seed: int | None = None
    spec: RatioDistributionSpec | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.prop = np.asarray(self.prop, dtype=np.int64)
        if self.X.ndim != 2 or len(self.X) != len(self.y) or len(self.y) != len(self.prop):
            raise ShapeMismatch("X, y and prop must have matching lengths")

    def __len__(self):
        return len(self.y)

    @property
    def records(self):
        return [Record(x, int(y), int(p)) for x, y, p in zip(self.X, self.y, self.prop)]

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx], self.prop[idx], self.pool, self.seed, self.spec)

    @classmethod
    def from_records(cls, records, **kw):
        records = list(records)
        X = np.array([r.features for r in records], dtype=np.float64)
        return cls(X, [r.label for r in records], [r.property for r in records], **kw)


def _exact_bits(keys, count):
    """0/1 vector with exactly ``count`` ones at positions ranked by ``keys``."""
    order = np.argsort(keys, kind="stable")
    bits = np.zeros(len(keys), dtype=np.int64)
    bits[order[:count]] = 1
    return bits


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def sample_dataset(spec, m, seed, pool=Pool.VICTIM, mode=Mode.IID):
    """Draw ``m`` records from the ratio distribution ``spec``.

    Deterministic in ``(spec, m, seed, pool, mode)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    pool = Pool(pool) if not isinstance(pool, Pool) else pool
    mode = Mode(mode) if not isinstance(mode, Mode) else mode
    u = spec.underlying
    pool_key = _seeding.mix(seed, pool.value)
    keys = _seeding.mix_array(pool_key, np.arange(m, dtype=np.uint64))

    draws = _seeding.uniforms(keys, 2)
    if mode is Mode.IID:
        prop = (draws[:, 0] < spec.alpha).astype(np.int64)
        y = (draws[:, 1] < 0.5).astype(np.int64)
    else:
        prop = _exact_bits(draws[:, 0], _round_half_up(spec.alpha * m))
        y = _exact_bits(draws[:, 1], _round_half_up(m / 2))

    # the normals use a distinct key per record so they are independent of the bits above
    X = _seeding.normals(_seeding.splitmix64_array(keys), u.dims)
    sign_p = (2 * prop - 1).astype(np.float64)
    sign_y = (2 * y - 1).astype(np.float64)
    X[:, : u.noise_dims] += y[:, None] * u.label_direction[None, :]
    sig = X[:, u.noise_dims :]
    sig += u.signal_strength * sign_p[:, None]
    sig += (u.label_property_coupling * LABEL_SHIFT) * (sign_y * sign_p)[:, None] * u.coupling_direction[None, :]
    return Dataset(X, y, prop, pool=pool, seed=seed, spec=spec)


def empirical_ratio(d):
    """Fraction of records with the property."""
    if len(d) == 0:
        raise ValueError("empty dataset")
    return float(np.mean(d.prop))


def check_pool_disjointness(a, b):
    """True iff no feature vector appears bit-for-bit in both datasets."""
    if a.X.shape[1] != b.X.shape[1]:
        raise ShapeMismatch("datasets differ in feature dimensionality")
    rows_a = {row.tobytes() for row in np.ascontiguousarray(a.X)}
    return not any(row.tobytes() in rows_a for row in np.ascontiguousarray(b.X))


def sample_degrees(spec, n, seed):
    """``n`` iid draws from a finite Zipf law by inverse CDF."""
    k = np.arange(1, spec.n_elems + 1, dtype=np.float64)
    w = k ** (-float(spec.exponent))
    cdf = np.cumsum(w) / w.sum()
    cdf[-1] = 1.0
    u = np.random.default_rng(seed).random(n)
    return (np.searchsorted(cdf, u, side="right") + 1).tolist()


# --- file formats -----------------------------------------------------------
#
# CSV: header ``f0,...,f{D-1},label,property``; floats written with ``repr``
# so they round-trip exactly.
# NPZ (binary container): arrays ``X`` (float64, m x D), ``y``, ``prop``
# (int64), plus ``format`` = "distinf-dataset/1".

DATASET_FORMAT = "distinf-dataset/1"


def to_csv(d):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"f{i}" for i in range(d.X.shape[1])] + ["label", "property"])
    for x, y, p in zip(d.X, d.y, d.prop):
        w.writerow([repr(float(v)) for v in x] + [int(y), int(p)])
    return buf.getvalue()


def from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise MalformedDocument("empty CSV")
    header, body = rows[0], rows[1:]
    if header[-2:] != ["label", "property"] or not body:
        raise MalformedDocument("expected header f0..fD,label,property and at least one row")
    try:
        arr = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise MalformedDocument(str(exc)) from exc
    if arr.shape[1] != len(header):
        raise MalformedDocument("ragged CSV rows")
    return Dataset(arr[:, :-2], arr[:, -2].astype(int), arr[:, -1].astype(int))


def save(d, path):
    path = str(path)
    if path.endswith(".npz"):
        np.savez(path, X=d.X, y=d.y, prop=d.prop, format=DATASET_FORMAT)
    else:
        with open(path, "w") as fh:
            fh.write(to_csv(d))


def load(path):
    path = str(path)
    if path.endswith(".npz"):
        with np.load(path) as z:
            if str(z.get("format", "")) != DATASET_FORMAT:
                raise MalformedDocument(f"{path}: not a {DATASET_FORMAT} container")
            return Dataset(z["X"], z["y"], z["prop"])
    with open(path) as fh:
        return from_csv(fh.read())
