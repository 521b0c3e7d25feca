"""Exact sampling of scale- and shift-decorated Poisson point processes.

The scale-family construction superposes independent decoration copies, each
dilated by a point of a Poisson process on (0, inf) whose intensity has tail
mass x^-alpha. Restricted to a window {|x| > eps}, the infinite series is
sampled exactly: a dilation point lambda can place an atom in the window only
if lambda * maxmod_bound * scale > eps, so truncating the dilation process at
eta = eps / (maxmod_bound * scale) loses nothing. The truncated process has
Poisson(eta^-alpha) many points, each distributed as eta * X with X a standard
Pareto(alpha) variable (inverse CDF: X = U^{-1/alpha}).

Shift families are the log dictionary image of the same construction: Poisson
positions u0 + Exponential(alpha) with count Poisson(e^{-alpha*u0}), decoration
copies translated rather than dilated, and the deterministic normalization
shift log(alpha)/alpha folded in so that the sampled intensity is exactly
e^{-c x} dx.

Determinism contract, two documented tiers:

* ``sample_process(spec, SeedSpec(ms, r))`` is a pure function of
  (spec, ms, r): one Philox stream per replica.
* Batch campaigns partition replicas into fixed blocks of ``BLOCK_SIZE`` and
  give each block its own Philox stream, vectorizing inside the block. Block
  boundaries and assembly order never depend on the thread count, so campaign
  results are bit-identical for any ``threads`` value.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DecorationBoundError, DomainError, RangeError
from .point_measure import PointMeasure, ShiftPointMeasure
from .rng import ROLE_BLOCK, ROLE_MIXTURE, ROLE_REPLICA, ROLE_SCALAR, derive_key, make_generator

__all__ = [
    "StableIntensity",
    "LocationLaw",
    "DecorationSpec",
    "ScaleLaw",
    "ShiftLaw",
    "ProcessSpec",
    "SeedSpec",
    "BLOCK_SIZE",
    "sample_truncated_poisson",
    "sample_decoration",
    "sample_process",
    "FlatCampaign",
    "ProcessSource",
    "ScaledSource",
    "SuperposeSource",
    "MixtureSource",
    "run_campaign",
    "maxmod_samples",
    "resolve_threads",
]

BLOCK_SIZE = 4096

# Hard per-replica cap on the truncated-series Poisson mean. A window that
# implies more work than this is almost certainly a configuration mistake and
# would otherwise exhaust memory.
_MEAN_CAP = 1.0e6

_HERMGAUSS_N = 96


@dataclass(frozen=True)
class StableIntensity:
    """The dilation intensity on (0, inf) with tail mass x^-alpha."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise DomainError("alpha must be finite and > 0")

    def tail(self, x):
        """Mass of (x, inf)."""
        return np.asarray(x, dtype=np.float64) ** (-self.alpha)

    def mass(self, a: float, b: float) -> float:
        """Mass of the interval (a, b], 0 < a <= b."""
        if not (0.0 < a <= b):
            raise DomainError("interval must satisfy 0 < a <= b")
        return float(a ** (-self.alpha) - b ** (-self.alpha))

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.alpha * x ** (-self.alpha - 1.0)


def _as_prob_vector(probs, count: int, what: str) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != (count,):
        raise DomainError(f"{what} probabilities must match the value count")
    if np.any(p <= 0.0) or not np.all(np.isfinite(p)):
        raise DomainError(f"{what} probabilities must be finite and > 0")
    s = p.sum()
    if abs(s - 1.0) > 1e-9:
        raise DomainError(f"{what} probabilities must sum to 1")
    return p / s


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(_HERMGAUSS_N)


@dataclass(frozen=True)
class LocationLaw:
    """Law of a single random decoration atom location.

    kinds: "uniform" (low/high, same sign on the scale carrier) and
    "table" (finite support with probabilities).
    """

    kind: str
    low: float | None = None
    high: float | None = None
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind == "uniform":
            if self.low is None or self.high is None or not (self.low < self.high):
                raise DomainError("uniform location law requires low < high")
        elif self.kind == "table":
            if not self.values:
                raise DomainError("table location law requires values")
            _as_prob_vector(self.probs, len(self.values), "location")
        else:
            raise DomainError(f"unknown location law kind: {self.kind!r}")

    @cached_property
    def _table(self):
        v = np.asarray(self.values, dtype=np.float64)
        return v, _as_prob_vector(self.probs, len(self.values), "location")

    def bounds(self):
        if self.kind == "uniform":
            return float(self.low), float(self.high)
        v = self._table[0]
        return float(v.min()), float(v.max())

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, n)
        v, p = self._table
        return v[rng.choice(v.size, size=n, p=p)]

    def to_config_dict(self):
        if self.kind == "uniform":
            return {"kind": "uniform", "low": self.low, "high": self.high}
        return {"kind": "table", "values": list(self.values), "probs": list(self.probs)}


def _atoms_tuple(atoms):
    out = []
    for a in atoms:
        loc, mult = a
        out.append((float(loc), int(mult)))
    if not out:
        raise DomainError("a decoration realization needs at least one atom")
    return tuple(out)


@dataclass(frozen=True)
class DecorationSpec:
    """Law of one decoration copy.

    kinds
    -----
    "dirac": a single deterministic counting measure.
    "table": a finite mixture of deterministic counting measures.
    "random_atoms": a random number of i.i.d. atoms; the count law lives on a
        finite set of positive integers and the location law is bounded (and
        bounded away from 0 on the scale carrier).

    The declared ``maxmod_bound`` (scale) or upper bound (shift) must hold
    almost surely; it drives the truncation threshold and is re-checked on
    every sampled block (violation raises DecorationBoundError).
    """

    kind: str
    carrier: str = "scale"
    atoms: tuple = ()
    entries: tuple = ()
    count_values: tuple = ()
    count_probs: tuple = ()
    location: LocationLaw | None = None
    maxmod_bound: float | None = None

    def __post_init__(self):
        if self.carrier not in ("scale", "shift"):
            raise DomainError(f"unknown carrier: {self.carrier!r}")
        forbid0 = self.carrier == "scale"
        if self.kind == "dirac":
            object.__setattr__(self, "atoms", _atoms_tuple(self.atoms))
            self._check_atoms(self.atoms, forbid0)
        elif self.kind == "table":
            if not self.entries:
                raise DomainError("table decoration requires entries")
            ents = []
            for atoms, prob in self.entries:
                ents.append((_atoms_tuple(atoms), float(prob)))
                self._check_atoms(ents[-1][0], forbid0)
            object.__setattr__(self, "entries", tuple(ents))
            _as_prob_vector([p for _, p in ents], len(ents), "table entry")
        elif self.kind == "random_atoms":
            cv = tuple(int(k) for k in self.count_values)
            if not cv or any(k < 1 for k in cv):
                raise DomainError("count law values must be integers >= 1")
            object.__setattr__(self, "count_values", cv)
            _as_prob_vector(self.count_probs, len(cv), "count")
            if self.location is None:
                raise DomainError("random_atoms decoration requires a location law")
            lo, hi = self.location.bounds()
            if forbid0 and not (lo * hi > 0.0):
                raise DomainError("location law on the scale carrier must exclude 0")
        else:
            raise DomainError(f"unknown decoration kind: {self.kind!r}")
        declared = self.maxmod_bound
        if declared is not None:
            declared = float(declared)
            object.__setattr__(self, "maxmod_bound", declared)
            derived = self._derived_bound()
            if declared < derived - 1e-12 * abs(derived):
                raise DomainError(
                    f"declared bound {declared} is below the attainable bound {derived}"
                )

    @staticmethod
    def _check_atoms(atoms, forbid0: bool):
        for loc, mult in atoms:
            if not math.isfinite(loc):
                raise DomainError("decoration atoms must be finite")
            if forbid0 and loc == 0.0:
                raise DomainError("decoration atoms on the scale carrier must avoid 0")
            if mult < 1:
                raise DomainError("multiplicities must be >= 1")

    # -- convenience constructors -------------------------------------------

    @classmethod
    def dirac(cls, atoms, carrier: str = "scale",
              maxmod_bound: float | None = None) -> "DecorationSpec":
        return cls(kind="dirac", carrier=carrier, atoms=tuple(atoms), maxmod_bound=maxmod_bound)

    @classmethod
    def table_from_measures(cls, measures, probs=None, carrier: str = "scale") -> "DecorationSpec":
        measures = list(measures)
        if probs is None:
            probs = [1.0 / len(measures)] * len(measures)
        entries = tuple((tuple(m.atoms()), float(p)) for m, p in zip(measures, probs))
        return cls(kind="table", carrier=carrier, entries=entries)

    @classmethod
    def random_atoms(cls, count_probs, location: LocationLaw, carrier: str = "scale",
                     maxmod_bound: float | None = None) -> "DecorationSpec":
        pairs = [(int(k), float(p)) for k, p in count_probs]
        return cls(
            kind="random_atoms",
            carrier=carrier,
            count_values=tuple(k for k, _ in pairs),
            count_probs=tuple(p for _, p in pairs),
            location=location,
            maxmod_bound=maxmod_bound,
        )

    # -- derived bounds -------------------------------------------------------

    def _derived_bound(self) -> float:
        if self.carrier == "scale":
            if self.kind == "dirac":
                return max(abs(a) for a, _ in self.atoms)
            if self.kind == "table":
                return max(max(abs(a) for a, _ in atoms) for atoms, _ in self.entries)
            lo, hi = self.location.bounds()
            return max(abs(lo), abs(hi))
        if self.kind == "dirac":
            return max(a for a, _ in self.atoms)
        if self.kind == "table":
            return max(max(a for a, _ in atoms) for atoms, _ in self.entries)
        return self.location.bounds()[1]

    @property
    def bound(self) -> float:
        """A.s. bound on maxmod (scale) or on the largest atom (shift)."""
        return self.maxmod_bound if self.maxmod_bound is not None else self._derived_bound()

    @property
    def min_abs(self) -> float:
        """A.s. lower bound on the smallest atom modulus (scale carrier)."""
        if self.carrier != "scale":
            raise DomainError("min_abs is a scale-carrier notion")
        if self.kind == "dirac":
            return min(abs(a) for a, _ in self.atoms)
        if self.kind == "table":
            return min(min(abs(a) for a, _ in atoms) for atoms, _ in self.entries)
        lo, hi = self.location.bounds()
        return min(abs(lo), abs(hi))

    def maxmod_moment(self, alpha: float) -> float:
        """E[maxmod(decoration)^alpha]; closed form for dirac/table kinds."""
        if self.carrier != "scale":
            raise DomainError("maxmod moments are a scale-carrier notion")
        if self.kind == "dirac":
            return max(abs(a) for a, _ in self.atoms) ** alpha
        if self.kind == "table":
            probs = np.asarray([p for _, p in self.entries])
            moms = np.asarray(
                [max(abs(a) for a, _ in atoms) ** alpha for atoms, _ in self.entries]
            )
            return float(np.dot(probs / probs.sum(), moms))
        raise DomainError("no closed-form maxmod moment for random-atom decorations")

    # -- cached sampling tables ----------------------------------------------

    @cached_property
    def _dirac_arrays(self):
        locs = np.asarray([a for a, _ in self.atoms], dtype=np.float64)
        w = np.asarray([m for _, m in self.atoms], dtype=np.int64)
        return locs, w

    @cached_property
    def _table_arrays(self):
        probs = _as_prob_vector([p for _, p in self.entries], len(self.entries), "table entry")
        locs = np.concatenate(
            [np.asarray([a for a, _ in atoms], dtype=np.float64) for atoms, _ in self.entries]
        )
        w = np.concatenate(
            [np.asarray([m for _, m in atoms], dtype=np.int64) for atoms, _ in self.entries]
        )
        natoms = np.asarray([len(atoms) for atoms, _ in self.entries], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(natoms)])
        return probs, locs, w, natoms, offsets

    @cached_property
    def _count_arrays(self):
        values = np.asarray(self.count_values, dtype=np.int64)
        probs = _as_prob_vector(self.count_probs, len(values), "count")
        return values, probs

    def sample_atoms_block(self, rng: np.random.Generator, n_copies: int):
        """Atoms for ``n_copies`` i.i.d. decoration realizations.

        Returns (copy_index, locations, weights) flat arrays, copy_index
        ascending. Weight = multiplicity; repeated sampled locations are left
        unmerged here (merging is a representation concern, not a law one).
        """
        if self.kind == "dirac":
            locs, w = self._dirac_arrays
            k = locs.size
            copy_idx = np.repeat(np.arange(n_copies, dtype=np.int64), k)
            return copy_idx, np.tile(locs, n_copies), np.tile(w, n_copies)
        if self.kind == "table":
            probs, locs, w, natoms, offsets = self._table_arrays
            entry = rng.choice(natoms.size, size=n_copies, p=probs)
            counts = natoms[entry]
            copy_idx = np.repeat(np.arange(n_copies, dtype=np.int64), counts)
            flat = _ragged_gather(offsets[entry], counts)
            return copy_idx, locs[flat], w[flat]
        values, probs = self._count_arrays
        counts = values[rng.choice(values.size, size=n_copies, p=probs)]
        copy_idx = np.repeat(np.arange(n_copies, dtype=np.int64), counts)
        locs = self.location.sample(rng, int(counts.sum()))
        return copy_idx, locs, np.ones(locs.size, dtype=np.int64)

    def to_config_dict(self):
        if self.kind == "dirac":
            d = {"kind": "dirac", "atoms": [[a, m] for a, m in self.atoms]}
        elif self.kind == "table":
            d = {
                "kind": "table",
                "entries": [
                    {"atoms": [[a, m] for a, m in atoms], "prob": p} for atoms, p in self.entries
                ],
            }
        else:
            d = {
                "kind": "random_atoms",
                "count_probs": [[k, p] for k, p in zip(self.count_values, self.count_probs)],
                "location": self.location.to_config_dict(),
            }
        if self.maxmod_bound is not None:
            d["maxmod_bound"] = self.maxmod_bound
        return d


def _ragged_gather(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Indices [s0, s0+1, .., s0+c0-1, s1, ...] for ragged row gathering."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    heads = np.concatenate([[0], np.cumsum(counts)[:-1]])
    out[heads] = starts
    nonfirst = heads[1:]
    out[nonfirst] += 1 - (starts[:-1] + counts[:-1])
    return np.cumsum(out)


def _law_post_init(kind, allowed, value, mu, sigma, values, probs, positive_values):
    if kind not in allowed:
        raise DomainError(f"unknown law kind: {kind!r}")
    if kind == "deterministic":
        if value is None or not math.isfinite(value):
            raise DomainError("deterministic law requires a finite value")
        if positive_values and not value > 0.0:
            raise DomainError("scale values must be > 0")
    elif kind == "table":
        if not values:
            raise DomainError("table law requires values")
        for v in values:
            if not math.isfinite(v) or (positive_values and not v > 0.0):
                raise DomainError("table law values out of range")
        _as_prob_vector(probs, len(values), "law")
    else:
        if mu is None or sigma is None or not (sigma > 0.0) or not math.isfinite(mu):
            raise DomainError(f"{kind} law requires finite mu and sigma > 0")


@dataclass(frozen=True)
class ScaleLaw:
    """Law of the global random dilation W > 0.

    kinds: "deterministic", "lognormal" (mu/sigma of log W), "table".
    """

    kind: str
    value: float | None = None
    mu: float | None = None
    sigma: float | None = None
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        _law_post_init(self.kind, ("deterministic", "lognormal", "table"),
                       self.value, self.mu, self.sigma, self.values, self.probs, True)

    @classmethod
    def deterministic(cls, w: float) -> "ScaleLaw":
        return cls(kind="deterministic", value=float(w))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "ScaleLaw":
        return cls(kind="lognormal", mu=float(mu), sigma=float(sigma))

    @classmethod
    def table(cls, values, probs) -> "ScaleLaw":
        return cls(kind="table", values=tuple(float(v) for v in values),
                   probs=tuple(float(p) for p in probs))

    @property
    def is_random(self) -> bool:
        return self.kind != "deterministic"

    @cached_property
    def _table(self):
        v = np.asarray(self.values, dtype=np.float64)
        return v, _as_prob_vector(self.probs, len(self.values), "law")

    def support(self):
        if self.kind == "deterministic":
            return self.value, self.value
        if self.kind == "table":
            v = self._table[0]
            return float(v.min()), float(v.max())
        return 0.0, math.inf

    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n draws; the deterministic kind consumes no stream state."""
        if self.kind == "deterministic":
            return np.full(n, self.value)
        if self.kind == "table":
            v, p = self._table
            return v[rng.choice(v.size, size=n, p=p)]
        return np.exp(rng.normal(self.mu, self.sigma, n))

    def expect(self, h) -> float:
        """E[h(W)] for vectorized h; Gauss-Hermite for the lognormal kind."""
        if self.kind == "deterministic":
            return float(h(np.asarray([self.value]))[0])
        if self.kind == "table":
            v, p = self._table
            return float(np.dot(p, h(v)))
        w = np.exp(self.mu + self.sigma * math.sqrt(2.0) * _GH_NODES)
        return float(np.dot(_GH_WEIGHTS, h(w)) / math.sqrt(math.pi))

    def to_config_dict(self):
        if self.kind == "deterministic":
            return {"kind": "deterministic", "value": self.value}
        if self.kind == "table":
            return {"kind": "table", "values": list(self.values), "probs": list(self.probs)}
        return {"kind": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class ShiftLaw:
    """Law of the global random translation U.

    kinds: "deterministic", "normal", "table". The log dictionary carries
    ScaleLaw lognormal(mu, sigma) to ShiftLaw normal(mu, sigma) and back.
    """

    kind: str
    value: float | None = None
    mu: float | None = None
    sigma: float | None = None
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        _law_post_init(self.kind, ("deterministic", "normal", "table"),
                       self.value, self.mu, self.sigma, self.values, self.probs, False)

    @classmethod
    def deterministic(cls, u: float) -> "ShiftLaw":
        return cls(kind="deterministic", value=float(u))

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "ShiftLaw":
        return cls(kind="normal", mu=float(mu), sigma=float(sigma))

    @classmethod
    def table(cls, values, probs) -> "ShiftLaw":
        return cls(kind="table", values=tuple(float(v) for v in values),
                   probs=tuple(float(p) for p in probs))

    @property
    def is_random(self) -> bool:
        return self.kind != "deterministic"

    @cached_property
    def _table(self):
        v = np.asarray(self.values, dtype=np.float64)
        return v, _as_prob_vector(self.probs, len(self.values), "law")

    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "deterministic":
            return np.full(n, self.value)
        if self.kind == "table":
            v, p = self._table
            return v[rng.choice(v.size, size=n, p=p)]
        return rng.normal(self.mu, self.sigma, n)

    def expect(self, h) -> float:
        if self.kind == "deterministic":
            return float(h(np.asarray([self.value]))[0])
        if self.kind == "table":
            v, p = self._table
            return float(np.dot(p, h(v)))
        u = self.mu + self.sigma * math.sqrt(2.0) * _GH_NODES
        return float(np.dot(_GH_WEIGHTS, h(u)) / math.sqrt(math.pi))

    def to_config_dict(self):
        if self.kind == "deterministic":
            return {"kind": "deterministic", "value": self.value}
        if self.kind == "table":
            return {"kind": "table", "values": list(self.values), "probs": list(self.probs)}
        return {"kind": "normal", "mu": self.mu, "sigma": self.sigma}


_SCALE_FAMILIES = ("scdppp", "sscdppp")
_SHIFT_FAMILIES = ("dppp", "sdppp")


@dataclass(frozen=True)
class ProcessSpec:
    """Full description of one process law plus its observation window.

    family: "scdppp" | "sscdppp" (scale carrier, `alpha` is the tail index,
    `window` is the modulus radius eps > 0) or "dppp" | "sdppp" (shift
    carrier, `alpha` is the exponential rate c, `window` is the lower cutoff
    L, any real).
    """

    family: str
    alpha: float
    decoration: DecorationSpec
    window: float
    scale_law: ScaleLaw | None = None
    shift_law: ShiftLaw | None = None

    def __post_init__(self):
        if self.family not in _SCALE_FAMILIES + _SHIFT_FAMILIES:
            raise DomainError(f"unknown family: {self.family!r}")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise DomainError("the tail index / rate must be finite and > 0")
        if not math.isfinite(self.window):
            raise DomainError("window must be finite")
        if self.is_scale_family:
            if not self.window > 0.0:
                raise DomainError("scale-family window radius must be > 0")
            if self.decoration.carrier != "scale":
                raise DomainError("scale families need a scale-carrier decoration")
            if self.family == "sscdppp" and self.scale_law is None:
                raise DomainError("sscdppp requires a scale law")
            if self.family == "scdppp" and self.scale_law is not None:
                raise DomainError("scdppp takes no scale law; use sscdppp")
            if self.shift_law is not None:
                raise DomainError("scale families take no shift law")
        else:
            if self.decoration.carrier != "shift":
                raise DomainError("shift families need a shift-carrier decoration")
            if self.family == "sdppp" and self.shift_law is None:
                raise DomainError("sdppp requires a shift law")
            if self.family == "dppp" and self.shift_law is not None:
                raise DomainError("dppp takes no shift law; use sdppp")
            if self.scale_law is not None:
                raise DomainError("shift families take no scale law")

    @property
    def is_scale_family(self) -> bool:
        return self.family in _SCALE_FAMILIES

    @property
    def carrier(self) -> str:
        return "scale" if self.is_scale_family else "shift"

    def effective_scale_law(self) -> ScaleLaw:
        return self.scale_law if self.scale_law is not None else ScaleLaw.deterministic(1.0)

    def effective_shift_law(self) -> ShiftLaw:
        return self.shift_law if self.shift_law is not None else ShiftLaw.deterministic(0.0)

    def with_window(self, window: float) -> "ProcessSpec":
        return ProcessSpec(self.family, self.alpha, self.decoration, float(window),
                           self.scale_law, self.shift_law)

    def to_config_dict(self):
        d = {"family": self.family, "decoration": self.decoration.to_config_dict(),
             "window": self.window}
        if self.is_scale_family:
            d["alpha"] = self.alpha
            if self.scale_law is not None:
                d["scale"] = self.scale_law.to_config_dict()
        else:
            d["c"] = self.alpha
            if self.shift_law is not None:
                d["shift"] = self.shift_law.to_config_dict()
        return d

    def spec_hash(self) -> str:
        doc = json.dumps(self.to_config_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(doc.encode()).hexdigest()


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus replica index; the replica stream is a pure function of both."""

    master_seed: int
    replica_index: int = 0

    def __post_init__(self):
        if self.replica_index < 0:
            raise DomainError("replica_index must be >= 0")


# -- config parsing (strict, fail closed) -------------------------------------

def _check_keys(doc: dict, required: set, optional: set, what: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} must be a JSON object")
    keys = set(doc)
    missing = required - keys
    if missing:
        raise ConfigError(f"{what} is missing field(s): {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise ConfigError(f"{what} has unknown field(s): {sorted(unknown)}")


def _num(doc, key, what) -> float:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{what}.{key} must be a number")
    return float(v)


def location_law_from_config(doc) -> LocationLaw:
    _check_keys(doc, {"kind"}, {"low", "high", "values", "probs"}, "location law")
    kind = doc["kind"]
    if kind == "uniform":
        _check_keys(doc, {"kind", "low", "high"}, set(), "uniform location law")
        return LocationLaw(kind="uniform", low=_num(doc, "low", "location"),
                           high=_num(doc, "high", "location"))
    if kind == "table":
        _check_keys(doc, {"kind", "values", "probs"}, set(), "table location law")
        return LocationLaw(kind="table", values=tuple(float(v) for v in doc["values"]),
                           probs=tuple(float(p) for p in doc["probs"]))
    raise ConfigError(f"unknown location law kind: {kind!r}")


def decoration_from_config(doc, carrier: str) -> DecorationSpec:
    _check_keys(doc, {"kind"}, {"atoms", "entries", "count_probs", "location", "maxmod_bound"},
                "decoration")
    kind = doc.get("kind")
    bound = doc.get("maxmod_bound")
    try:
        if kind == "dirac":
            _check_keys(doc, {"kind", "atoms"}, {"maxmod_bound"}, "dirac decoration")
            return DecorationSpec(kind="dirac", carrier=carrier,
                                  atoms=_atoms_tuple(doc["atoms"]), maxmod_bound=bound)
        if kind == "table":
            _check_keys(doc, {"kind", "entries"}, {"maxmod_bound"}, "table decoration")
            entries = []
            for e in doc["entries"]:
                _check_keys(e, {"atoms", "prob"}, set(), "table decoration entry")
                entries.append((_atoms_tuple(e["atoms"]), float(e["prob"])))
            return DecorationSpec(kind="table", carrier=carrier, entries=tuple(entries),
                                  maxmod_bound=bound)
        if kind == "random_atoms":
            _check_keys(doc, {"kind", "count_probs", "location"}, {"maxmod_bound"},
                        "random_atoms decoration")
            pairs = [(int(k), float(p)) for k, p in doc["count_probs"]]
            return DecorationSpec(
                kind="random_atoms", carrier=carrier,
                count_values=tuple(k for k, _ in pairs), count_probs=tuple(p for _, p in pairs),
                location=location_law_from_config(doc["location"]), maxmod_bound=bound)
    except DomainError as exc:
        raise ConfigError(f"invalid decoration: {exc}") from exc
    raise ConfigError(f"unknown decoration kind: {kind!r}")


def _scale_law_from_config(doc) -> ScaleLaw:
    _check_keys(doc, {"kind"}, {"value", "mu", "sigma", "values", "probs"}, "scale law")
    kind = doc["kind"]
    try:
        if kind == "deterministic":
            _check_keys(doc, {"kind", "value"}, set(), "deterministic scale law")
            return ScaleLaw.deterministic(_num(doc, "value", "scale law"))
        if kind == "lognormal":
            _check_keys(doc, {"kind", "mu", "sigma"}, set(), "lognormal scale law")
            return ScaleLaw.lognormal(_num(doc, "mu", "scale law"), _num(doc, "sigma", "scale law"))
        if kind == "table":
            _check_keys(doc, {"kind", "values", "probs"}, set(), "table scale law")
            return ScaleLaw.table(doc["values"], doc["probs"])
    except DomainError as exc:
        raise ConfigError(f"invalid scale law: {exc}") from exc
    raise ConfigError(f"unknown scale law kind: {kind!r}")


def _shift_law_from_config(doc) -> ShiftLaw:
    _check_keys(doc, {"kind"}, {"value", "mu", "sigma", "values", "probs"}, "shift law")
    kind = doc["kind"]
    try:
        if kind == "deterministic":
            _check_keys(doc, {"kind", "value"}, set(), "deterministic shift law")
            return ShiftLaw.deterministic(_num(doc, "value", "shift law"))
        if kind == "normal":
            _check_keys(doc, {"kind", "mu", "sigma"}, set(), "normal shift law")
            return ShiftLaw.normal(_num(doc, "mu", "shift law"), _num(doc, "sigma", "shift law"))
        if kind == "table":
            _check_keys(doc, {"kind", "values", "probs"}, set(), "table shift law")
            return ShiftLaw.table(doc["values"], doc["probs"])
    except DomainError as exc:
        raise ConfigError(f"invalid shift law: {exc}") from exc
    raise ConfigError(f"unknown shift law kind: {kind!r}")


def process_spec_from_config(doc) -> ProcessSpec:
    """Parse a process config object; unknown fields are rejected."""
    _check_keys(doc, {"family", "decoration", "window"}, {"alpha", "c", "scale", "shift"},
                "process")
    family = doc.get("family")
    if family in _SCALE_FAMILIES:
        if "alpha" not in doc:
            raise ConfigError("scale families require 'alpha'")
        if "c" in doc:
            raise ConfigError("scale families use 'alpha', not 'c'")
        alpha = _num(doc, "alpha", "process")
        law = _scale_law_from_config(doc["scale"]) if "scale" in doc else None
        if family == "scdppp" and law is not None:
            raise ConfigError("scdppp takes no 'scale' law; use family sscdppp")
        if family == "sscdppp" and law is None:
            raise ConfigError("sscdppp requires a 'scale' law")
        if "shift" in doc:
            raise ConfigError("scale families take no 'shift' law")
        dec = decoration_from_config(doc["decoration"], "scale")
        try:
            return ProcessSpec(family, alpha, dec, _num(doc, "window", "process"), scale_law=law)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if family in _SHIFT_FAMILIES:
        if "c" not in doc:
            raise ConfigError("shift families require 'c'")
        if "alpha" in doc:
            raise ConfigError("shift families use 'c', not 'alpha'")
        c = _num(doc, "c", "process")
        law = _shift_law_from_config(doc["shift"]) if "shift" in doc else None
        if family == "dppp" and law is not None:
            raise ConfigError("dppp takes no 'shift' law; use family sdppp")
        if family == "sdppp" and law is None:
            raise ConfigError("sdppp requires a 'shift' law")
        if "scale" in doc:
            raise ConfigError("shift families take no 'scale' law")
        dec = decoration_from_config(doc["decoration"], "shift")
        try:
            return ProcessSpec(family, c, dec, _num(doc, "window", "process"), shift_law=law)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown family: {family!r}")


# -- core block sampling -------------------------------------------------------

def _guard_mean(mean: np.ndarray, window) -> None:
    top = float(np.max(mean)) if mean.size else 0.0
    if not math.isfinite(top) or top > _MEAN_CAP:
        raise RangeError(
            f"truncated-series Poisson mean {top:.3g} exceeds the cap {_MEAN_CAP:.0e} "
            f"(window {window!r} too aggressive for this spec)"
        )


def _scale_block(spec: ProcessSpec, key: np.ndarray, size: int, window: float):
    """One vectorized block of scale-family replicas, exact on {|x| > window}."""
    rng = np.random.Generator(np.random.Philox(key=key))
    law = spec.effective_scale_law()
    w_draw = law.sample_block(rng, size)
    bound = spec.decoration.bound
    # Count mean (eta^-alpha with eta = window / (bound * W)); the W in eta and
    # the global dilation by W cancel in the atom amplitude, which is why the
    # amplitude below does not reference W.
    mean = (bound * w_draw / window) ** spec.alpha
    _guard_mean(mean, window)
    counts = rng.poisson(mean)
    total = int(counts.sum())
    rep_pt = np.repeat(np.arange(size, dtype=np.int64), counts)
    radial = (1.0 - rng.random(total)) ** (-1.0 / spec.alpha)
    amp = (window / bound) * radial
    copy_idx, dloc, dw = spec.decoration.sample_atoms_block(rng, total)
    if dloc.size and float(np.abs(dloc).max()) > bound * (1.0 + 1e-12):
        raise DecorationBoundError(
            "a sampled decoration atom exceeded the declared modulus bound"
        )
    locs = amp[copy_idx] * dloc
    rep = rep_pt[copy_idx]
    keep = np.abs(locs) > window
    return locs[keep], rep[keep], dw[keep]


_LOG_MEAN_CAP = math.log(_MEAN_CAP)


def _shift_block(spec: ProcessSpec, key: np.ndarray, size: int, cutoff: float):
    """One vectorized block of shift-family replicas, exact on (cutoff, inf).

    Log-dictionary image of the scale construction; the deterministic
    normalization shift log(c)/c is folded into sigma so the sampled Poisson
    intensity is exactly e^{-c x} dx.
    """
    rng = np.random.Generator(np.random.Philox(key=key))
    c = spec.alpha
    u_draw = spec.effective_shift_law().sample_block(rng, size)
    sigma = u_draw - math.log(c) / c
    bound = spec.decoration.bound
    log_mean = -c * (cutoff - sigma - bound)
    if log_mean.size and float(np.max(log_mean)) > _LOG_MEAN_CAP:
        raise RangeError(
            f"truncated-series Poisson mean exp({float(np.max(log_mean)):.3g}) exceeds the cap "
            f"(cutoff {cutoff!r} too aggressive for this spec)"
        )
    mean = np.exp(log_mean)
    counts = rng.poisson(mean)
    total = int(counts.sum())
    rep_pt = np.repeat(np.arange(size, dtype=np.int64), counts)
    # log of a standard Pareto(c) radial, i.e. an Exponential(rate c) excess
    log_radial = -np.log1p(-rng.random(total)) / c
    base = (cutoff - bound) + log_radial
    copy_idx, dloc, dw = spec.decoration.sample_atoms_block(rng, total)
    if dloc.size and float(dloc.max()) > bound + 1e-12 * max(1.0, abs(bound)):
        raise DecorationBoundError(
            "a sampled decoration atom exceeded the declared upper bound"
        )
    locs = base[copy_idx] + dloc
    rep = rep_pt[copy_idx]
    keep = locs > cutoff
    return locs[keep], rep[keep], dw[keep]


def _one_block(spec: ProcessSpec, key: np.ndarray, size: int, window: float):
    if spec.is_scale_family:
        return _scale_block(spec, key, size, window)
    return _shift_block(spec, key, size, window)


# -- single-draw operations ----------------------------------------------------

def _seed_pair(seed) -> tuple[int, int]:
    if isinstance(seed, SeedSpec):
        return seed.master_seed, seed.replica_index
    return int(seed), 0


def sample_truncated_poisson(alpha: float, eta: float, seed) -> PointMeasure:
    """One draw of the dilation process restricted to (eta, inf).

    The count is Poisson(eta^-alpha) and, given the count, points are i.i.d.
    eta * X with X standard Pareto(alpha).
    """
    intensity = StableIntensity(alpha)
    if not (eta > 0.0 and math.isfinite(eta)):
        raise DomainError("eta must be finite and > 0")
    mean = float(intensity.tail(eta))
    if mean > _MEAN_CAP:
        raise RangeError(f"Poisson mean {mean:.3g} exceeds the cap {_MEAN_CAP:.0e}")
    master, replica = _seed_pair(seed)
    rng = make_generator(master, ROLE_SCALAR, replica)
    k = int(rng.poisson(mean))
    pts = eta * (1.0 - rng.random(k)) ** (-1.0 / alpha)
    return PointMeasure(pts)


def sample_decoration(dec: DecorationSpec, seed):
    """One decoration realization as a canonical measure."""
    master, replica = _seed_pair(seed)
    rng = make_generator(master, ROLE_SCALAR, replica)
    _, locs, w = dec.sample_atoms_block(rng, 1)
    cls = PointMeasure if dec.carrier == "scale" else ShiftPointMeasure
    return cls(locs, w)


def sample_process(spec: ProcessSpec, seed: SeedSpec):
    """One replica, restricted to the spec's observation window, exactly in law.

    Pure in (spec, seed.master_seed, seed.replica_index): the replica owns a
    Philox stream keyed by that pair and nothing else.
    """
    if not isinstance(seed, SeedSpec):
        seed = SeedSpec(int(seed), 0)
    key = derive_key(seed.master_seed, ROLE_REPLICA, seed.replica_index)
    locs, _, w = _one_block(spec, key, 1, spec.window)
    cls = PointMeasure if spec.is_scale_family else ShiftPointMeasure
    return cls(locs, w)


# -- campaigns -------------------------------------------------------------------

@dataclass(frozen=True)
class FlatCampaign:
    """Replicated samples in flat arrays: one row per atom, replica ascending.

    ``window`` records the exactness region the campaign was drawn on: the
    modulus radius (scale carrier) or lower cutoff (shift carrier).
    """

    locations: np.ndarray
    replica: np.ndarray
    weights: np.ndarray
    n_reps: int
    carrier: str
    window: float

    def laplace_integrals(self, f, y: float) -> np.ndarray:
        """Per-replica integral of the translated/dilated test function.

        Scale carrier: integral of x -> f(x / y); shift carrier: integral of
        x -> f(x - y).
        """
        if self.carrier == "scale":
            vals = f.eval(self.locations / y)
        else:
            vals = f.eval(self.locations - y)
        return np.bincount(self.replica, weights=self.weights * vals, minlength=self.n_reps)

    def maxmods(self) -> np.ndarray:
        """Per-replica largest atom modulus (scale carrier); 0 for empty replicas."""
        out = np.zeros(self.n_reps)
        np.maximum.at(out, self.replica, np.abs(self.locations))
        return out

    def max_locations(self) -> np.ndarray:
        """Per-replica largest atom (shift carrier); -inf for empty replicas."""
        out = np.full(self.n_reps, -math.inf)
        np.maximum.at(out, self.replica, self.locations)
        return out

    def counts(self) -> np.ndarray:
        return np.bincount(self.replica, minlength=self.n_reps)

    def replica_measure(self, r: int):
        lo = np.searchsorted(self.replica, r, side="left")
        hi = np.searchsorted(self.replica, r, side="right")
        cls = PointMeasure if self.carrier == "scale" else ShiftPointMeasure
        return cls(self.locations[lo:hi], self.weights[lo:hi].astype(np.int64))


class ProcessSource:
    """Campaign source drawing replicas of one spec, optionally on a finer window."""

    def __init__(self, spec: ProcessSpec, window: float | None = None):
        self.spec = spec
        self.window = spec.window if window is None else float(window)
        if spec.is_scale_family and not self.window > 0.0:
            raise DomainError("scale-family window radius must be > 0")
        self.carrier = spec.carrier

    def sample_block(self, master_seed: int, path: tuple, size: int):
        key = derive_key(master_seed, ROLE_BLOCK, *path)
        return _one_block(self.spec, key, size, self.window)


class ScaledSource:
    """Dilation of a scale-carrier source by a fixed factor b > 0."""

    def __init__(self, inner, b: float):
        if inner.carrier != "scale":
            raise DomainError("only scale-carrier sources can be dilated")
        if not (b > 0.0 and math.isfinite(b)):
            raise DomainError("dilation factor must be finite and > 0")
        self.inner = inner
        self.b = float(b)
        self.window = inner.window * self.b
        self.carrier = "scale"

    def sample_block(self, master_seed, path, size):
        locs, rep, w = self.inner.sample_block(master_seed, path, size)
        return locs * self.b, rep, w


class SuperposeSource:
    """Independent superposition of sources sharing a carrier and window."""

    def __init__(self, *children):
        if not children:
            raise DomainError("superposition needs at least one source")
        self.children = children
        self.carrier = children[0].carrier
        for ch in children[1:]:
            if ch.carrier != self.carrier:
                raise DomainError("superposed sources must share a carrier")
            if not math.isclose(ch.window, children[0].window,
                                rel_tol=1e-9, abs_tol=1e-9):
                raise DomainError("superposed sources must share the observation window")
        # rounding in scaled children can shift windows by ulps; the coarsest
        # declared window is exact for every child
        self.window = max(ch.window for ch in children)

    def sample_block(self, master_seed, path, size):
        parts = [ch.sample_block(master_seed, path + (i,), size) for i, ch in enumerate(self.children)]
        locs = np.concatenate([p[0] for p in parts])
        rep = np.concatenate([p[1] for p in parts])
        w = np.concatenate([p[2] for p in parts])
        order = np.argsort(rep, kind="stable")
        return locs[order], rep[order], w[order]


class MixtureSource:
    """Each replica is drawn from one of several sources, chosen independently."""

    def __init__(self, children, probs):
        children = tuple(children)
        self.probs = _as_prob_vector(probs, len(children), "mixture")
        self.children = children
        self.carrier = children[0].carrier
        for ch in children[1:]:
            if ch.carrier != self.carrier or not math.isclose(
                    ch.window, children[0].window, rel_tol=1e-9, abs_tol=1e-9):
                raise DomainError("mixture components must share carrier and window")
        self.window = max(ch.window for ch in children)

    def sample_block(self, master_seed, path, size):
        pick_rng = np.random.Generator(
            np.random.Philox(key=derive_key(master_seed, ROLE_MIXTURE, *path))
        )
        pick = pick_rng.choice(len(self.children), size=size, p=self.probs)
        locs_parts, rep_parts, w_parts = [], [], []
        for i, ch in enumerate(self.children):
            slots = np.nonzero(pick == i)[0]
            if not slots.size:
                continue
            locs, rep, w = ch.sample_block(master_seed, path + (i,), slots.size)
            locs_parts.append(locs)
            rep_parts.append(slots[rep])
            w_parts.append(w)
        if not locs_parts:
            return (np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        locs = np.concatenate(locs_parts)
        rep = np.concatenate(rep_parts)
        w = np.concatenate(w_parts)
        order = np.argsort(rep, kind="stable")
        return locs[order], rep[order], w[order]


def resolve_threads(threads: int | None) -> int:
    """Explicit value, else the STABLEPP_THREADS env var, else 1."""
    if threads is None:
        raw = os.environ.get("STABLEPP_THREADS", "")
        threads = int(raw) if raw.strip() else 1
    threads = int(threads)
    if threads < 1:
        raise DomainError("threads must be >= 1")
    return threads


def run_campaign(source, master_seed: int, n_reps: int, threads: int | None = 1,
                 role: tuple = ()) -> FlatCampaign:
    """Draw ``n_reps`` replicas from a source into one flat campaign.

    Replicas are partitioned into fixed blocks of BLOCK_SIZE; block b uses the
    stream keyed by (master_seed, ROLE_BLOCK, *role, b). Results are identical
    for every thread count.
    """
    n_reps = int(n_reps)
    if n_reps < 1:
        raise DomainError("n_reps must be >= 1")
    n_blocks = (n_reps + BLOCK_SIZE - 1) // BLOCK_SIZE

    def job(b: int):
        size = min(BLOCK_SIZE, n_reps - b * BLOCK_SIZE)
        return source.sample_block(master_seed, role + (b,), size)

    threads = resolve_threads(threads)
    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(n_blocks)))
    else:
        parts = [job(b) for b in range(n_blocks)]
    locs = np.concatenate([p[0] for p in parts])
    rep = np.concatenate(
        [p[1] + b * BLOCK_SIZE for b, p in enumerate(parts)]
    ).astype(np.int64)
    w = np.concatenate([p[2] for p in parts]).astype(np.float64)
    return FlatCampaign(locs, rep, w, n_reps, source.carrier, source.window)


def maxmod_samples(spec: ProcessSpec, n_reps: int, seed: int, window: float | None = None,
                   threads: int | None = 1, role: tuple = ()) -> np.ndarray:
    """Per-replica maxmod draws of a scale-family spec (0 marks an empty window)."""
    if not spec.is_scale_family:
        raise DomainError("maxmod sampling applies to scale families")
    campaign = run_campaign(ProcessSource(spec, window), seed, n_reps, threads, role)
    return campaign.maxmods()
