"""Point measures on the punctured line and the test functions paired with them.

Two carriers appear throughout the package. The scale carrier hosts atoms on
R \\ {0}; its measures are acted on by dilations and its test functions vanish
in a neighbourhood of the origin and beyond a finite radius. The shift carrier
hosts atoms anywhere on R; its measures are acted on by translations and its
test functions have compact support on the line. Both measure classes are
canonical on construction: atoms sorted by location, exactly equal locations
merged by summing multiplicities (bit equality, no tolerance), multiplicities
positive integers.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .errors import ConfigError, DomainError, RangeError

__all__ = [
    "PointMeasure",
    "ShiftPointMeasure",
    "TestFunction",
    "ShiftTestFunction",
    "scale",
    "shift",
    "superpose",
    "maxmod",
    "integrate",
    "restrict",
    "scale_fn",
    "tent",
    "indicator_approx",
    "maxmod_indicator",
    "tent_family",
    "shift_tent",
    "shift_indicator_approx",
]


def _canonical_atoms(locations, multiplicities, forbid_origin: bool):
    locs = np.atleast_1d(np.asarray(locations, dtype=np.float64))
    if locs.ndim != 1:
        raise DomainError("atom locations must form a one-dimensional sequence")
    if multiplicities is None:
        mults = np.ones(locs.shape, dtype=np.int64)
    else:
        raw = np.atleast_1d(np.asarray(multiplicities))
        if raw.shape != locs.shape:
            raise DomainError("multiplicities must match locations one-to-one")
        if raw.dtype.kind == "f":
            if not np.all(raw == np.round(raw)):
                raise DomainError("multiplicities must be integers")
        mults = raw.astype(np.int64)
    if locs.size and not np.all(np.isfinite(locs)):
        raise DomainError("atom locations must be finite")
    if forbid_origin and locs.size and np.any(locs == 0.0):
        raise DomainError("atoms at the origin are not allowed on the scale carrier")
    if mults.size and np.any(mults < 1):
        raise DomainError("multiplicities must be >= 1")
    if locs.size:
        uniq, inverse = np.unique(locs, return_inverse=True)
        merged = np.zeros(uniq.shape, dtype=np.int64)
        np.add.at(merged, inverse, mults)
        locs, mults = uniq, merged
    locs.flags.writeable = False
    mults.flags.writeable = False
    return locs, mults


class _BaseMeasure:
    __slots__ = ("locations", "multiplicities")

    _forbid_origin = False

    def __init__(self, locations=(), multiplicities=None):
        locs, mults = _canonical_atoms(locations, multiplicities, self._forbid_origin)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "multiplicities", mults)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @classmethod
    def from_atoms(cls, atoms):
        """Build from an iterable of (location, multiplicity) pairs."""
        atoms = list(atoms)
        if not atoms:
            return cls()
        locs = [a[0] for a in atoms]
        mults = [a[1] for a in atoms]
        return cls(locs, mults)

    @property
    def n_atoms(self) -> int:
        return int(self.locations.size)

    @property
    def total_mass(self) -> int:
        return int(self.multiplicities.sum()) if self.multiplicities.size else 0

    def atoms(self):
        """Atoms as a tuple of (location, multiplicity) pairs in canonical order."""
        return tuple((float(x), int(m)) for x, m in zip(self.locations, self.multiplicities))

    def superpose(self, other):
        if type(other) is not type(self):
            raise DomainError("superposition requires measures on the same carrier")
        return type(self)(
            np.concatenate([self.locations, other.locations]),
            np.concatenate([self.multiplicities, other.multiplicities]),
        )

    def to_json_line(self) -> str:
        return json.dumps({"atoms": [[float(x), int(m)] for x, m in zip(self.locations, self.multiplicities)]})

    @classmethod
    def from_json_line(cls, line: str):
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed point-measure line: {exc}") from exc
        if not isinstance(doc, dict) or set(doc) != {"atoms"}:
            raise ConfigError("point-measure line must be an object with the single key 'atoms'")
        atoms = doc["atoms"]
        if not isinstance(atoms, list) or any(not isinstance(a, list) or len(a) != 2 for a in atoms):
            raise ConfigError("'atoms' must be a list of [location, multiplicity] pairs")
        try:
            return cls.from_atoms([(float(a[0]), int(a[1])) for a in atoms])
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.locations, other.locations) and np.array_equal(
            self.multiplicities, other.multiplicities
        )

    def __hash__(self):
        return hash((type(self).__name__, self.locations.tobytes(), self.multiplicities.tobytes()))

    def __repr__(self):
        inner = ", ".join(f"{x:g}x{m}" for x, m in zip(self.locations, self.multiplicities))
        return f"{type(self).__name__}([{inner}])"


class PointMeasure(_BaseMeasure):
    """Finite counting measure on R \\ {0} (scale carrier)."""

    __slots__ = ()
    _forbid_origin = True

    def maxmod(self) -> float:
        """Largest atom modulus; 0.0 for the empty measure."""
        if not self.locations.size:
            return 0.0
        return float(np.abs(self.locations).max())

    def scale(self, b: float) -> "PointMeasure":
        """Dilation by b > 0: every atom location is multiplied by b."""
        b = float(b)
        if not (b > 0.0) or not math.isfinite(b):
            raise DomainError("scale factor must be finite and > 0")
        with np.errstate(over="ignore"):
            out = self.locations * b
        if out.size and not np.all(np.isfinite(out)):
            raise RangeError("scaling overflowed an atom location")
        if out.size and np.any(out == 0.0):
            raise RangeError("scaling underflowed an atom location to the origin")
        return PointMeasure(out, self.multiplicities)

    def shift(self, x: float) -> "PointMeasure":
        """Translation by x; an atom landing exactly at the origin is an error."""
        x = float(x)
        if not math.isfinite(x):
            raise DomainError("shift must be finite")
        out = self.locations + x
        if out.size and np.any(out == 0.0):
            raise DomainError("shift places an atom at the origin")
        return PointMeasure(out, self.multiplicities)

    def restrict(self, radius: float) -> "PointMeasure":
        """Restriction to the window {|x| > radius}."""
        radius = float(radius)
        keep = np.abs(self.locations) > radius
        return PointMeasure(self.locations[keep], self.multiplicities[keep])


class ShiftPointMeasure(_BaseMeasure):
    """Finite counting measure on R (shift carrier); atoms at 0 are fine here."""

    __slots__ = ()
    _forbid_origin = False

    def max_location(self) -> float:
        """Largest atom location; -inf for the empty measure."""
        if not self.locations.size:
            return -math.inf
        return float(self.locations.max())

    def shift(self, x: float) -> "ShiftPointMeasure":
        x = float(x)
        if not math.isfinite(x):
            raise DomainError("shift must be finite")
        with np.errstate(over="ignore"):
            out = self.locations + x
        if out.size and not np.all(np.isfinite(out)):
            raise RangeError("shift overflowed an atom location")
        return ShiftPointMeasure(out, self.multiplicities)

    def restrict_above(self, cutoff: float) -> "ShiftPointMeasure":
        """Restriction to the half line {x > cutoff}."""
        keep = self.locations > float(cutoff)
        return ShiftPointMeasure(self.locations[keep], self.multiplicities[keep])


def _pl_eval(xs: np.ndarray, vs: np.ndarray, x):
    """Evaluate a piecewise-linear function with value 0 outside the knot range.

    Exact at knots: a query equal to a knot abscissa returns the knot value
    bit-for-bit, so integrals of measures whose atoms sit on knots are exact.
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.zeros(arr.shape, dtype=np.float64)
    idx = np.searchsorted(xs, arr, side="left")
    inside = idx < xs.size
    hit = np.zeros(arr.shape, dtype=bool)
    hit[inside] = xs[idx[inside]] == arr[inside]
    out[hit] = vs[idx[hit]]
    interior = (~hit) & (idx > 0) & inside
    if np.any(interior):
        i = idx[interior]
        x0, x1 = xs[i - 1], xs[i]
        v0, v1 = vs[i - 1], vs[i]
        out[interior] = v0 + (v1 - v0) * ((arr[interior] - x0) / (x1 - x0))
    return float(out[0]) if scalar else out


def _support_scan(xs: np.ndarray, vs: np.ndarray):
    """Endpoints of the support union: list of (lo, hi) per maximal positive run."""
    runs = []
    n = xs.size
    k = 0
    while k < n - 1:
        if vs[k] > 0.0 or vs[k + 1] > 0.0:
            lo = xs[k]
            hi = xs[k + 1]
            k += 1
            while k < n - 1 and (vs[k] > 0.0 or vs[k + 1] > 0.0):
                hi = xs[k + 1]
                k += 1
            runs.append((lo, hi))
        else:
            k += 1
    return runs


class _BaseTestFunction:
    __slots__ = ("knots_x", "knots_v", "plateau")
    __test__ = False  # not a pytest collection target

    def __init__(self, knots, plateau: float | None = None):
        pairs = [(float(x), float(v)) for x, v in knots]
        if len(pairs) < 2:
            raise DomainError("a test function needs at least two knots")
        xs = np.array([p[0] for p in pairs], dtype=np.float64)
        vs = np.array([p[1] for p in pairs], dtype=np.float64)
        if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(vs)):
            raise DomainError("knots must be finite")
        if np.any(np.diff(xs) <= 0.0):
            raise DomainError("knot abscissae must be strictly increasing")
        if np.any(vs < 0.0):
            raise DomainError("test functions are nonnegative")
        if vs[0] != 0.0 or vs[-1] != 0.0:
            raise DomainError("the first and last knot values must be 0")
        xs.flags.writeable = False
        vs.flags.writeable = False
        object.__setattr__(self, "knots_x", xs)
        object.__setattr__(self, "knots_v", vs)
        object.__setattr__(self, "plateau", None if plateau is None else float(plateau))
        self._validate_support()

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _validate_support(self):
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.knots_v == 0.0))

    @property
    def sup_norm(self) -> float:
        return float(self.knots_v.max())

    def eval(self, x):
        return _pl_eval(self.knots_x, self.knots_v, x)

    __call__ = eval

    def knots(self):
        return [(float(x), float(v)) for x, v in zip(self.knots_x, self.knots_v)]

    def __repr__(self):
        lo, hi = self.knots_x[0], self.knots_x[-1]
        return f"{type(self).__name__}({self.knots_x.size} knots on [{lo:g}, {hi:g}])"


class TestFunction(_BaseTestFunction):
    """Nonnegative piecewise-linear function on the scale carrier.

    It vanishes identically on a neighbourhood of the origin and outside a
    finite radius; `support_bounds` returns (inner, outer) radii with the
    inner radius +inf (and outer 0) for the zero function.
    """

    __slots__ = ("inner_radius", "outer_radius")

    def _validate_support(self):
        runs = _support_scan(self.knots_x, self.knots_v)
        if not runs:
            object.__setattr__(self, "inner_radius", math.inf)
            object.__setattr__(self, "outer_radius", 0.0)
            return
        inner = math.inf
        outer = 0.0
        for lo, hi in runs:
            if lo <= 0.0 <= hi or lo == 0.0 or hi == 0.0:
                raise DomainError("test functions on the scale carrier must vanish near the origin")
            inner = min(inner, min(abs(lo), abs(hi)))
            outer = max(outer, max(abs(lo), abs(hi)))
        object.__setattr__(self, "inner_radius", float(inner))
        object.__setattr__(self, "outer_radius", float(outer))

    @property
    def support_bounds(self):
        return (self.inner_radius, self.outer_radius)

    def scaled(self, y: float) -> "TestFunction":
        """The function x -> f(y * x); knots move to knot/y."""
        y = float(y)
        if not (y > 0.0) or not math.isfinite(y):
            raise DomainError("scale_fn factor must be finite and > 0")
        return TestFunction(
            [(x / y, v) for x, v in zip(self.knots_x, self.knots_v)], plateau=self.plateau
        )


class ShiftTestFunction(_BaseTestFunction):
    """Nonnegative piecewise-linear function with compact support on R."""

    __slots__ = ("support_low", "support_high")

    def _validate_support(self):
        runs = _support_scan(self.knots_x, self.knots_v)
        if not runs:
            object.__setattr__(self, "support_low", math.inf)
            object.__setattr__(self, "support_high", -math.inf)
            return
        object.__setattr__(self, "support_low", float(runs[0][0]))
        object.__setattr__(self, "support_high", float(runs[-1][1]))

    @property
    def support_bounds(self):
        return (self.support_low, self.support_high)


# -- module-level operation aliases -----------------------------------------

def scale(m: PointMeasure, b: float) -> PointMeasure:
    return m.scale(b)


def shift(m, x: float):
    return m.shift(x)


def superpose(a, b):
    return a.superpose(b)


def maxmod(m: PointMeasure) -> float:
    return m.maxmod()


def restrict(m: PointMeasure, radius: float) -> PointMeasure:
    return m.restrict(radius)


def integrate(m, f) -> float:
    """Integral of f against the counting measure, sum of mult * f(location)."""
    if isinstance(m, PointMeasure) != isinstance(f, TestFunction):
        raise DomainError("measure and test function live on different carriers")
    if not m.locations.size:
        return 0.0
    return float(np.dot(m.multiplicities.astype(np.float64), f.eval(m.locations)))


def scale_fn(f: TestFunction, y: float) -> TestFunction:
    """The dilated test function x -> f(y * x)."""
    return f.scaled(y)


# -- shaped constructors ------------------------------------------------------

def tent(left: float, peak: float, right: float, height: float = 1.0) -> TestFunction:
    """Triangle with value `height` at `peak`, zero at `left` and `right`."""
    return TestFunction([(left, 0.0), (peak, height), (right, 0.0)])


def indicator_approx(
    level: float,
    edge: float = 1.0,
    outer: float = 1e8,
    ramp: float = 1e-7,
    symmetric: bool = False,
) -> TestFunction:
    """Continuous approximation to level * 1_{(edge, inf)} with an outer cutoff.

    Rises linearly on (edge, edge*(1+ramp)), holds `level` out to `outer`, and
    returns to zero by outer*(1+ramp). With ``symmetric=True`` the same shape
    is mirrored onto the negative half-line, approximating
    level * 1_{|x| > edge}.

    Parameters
    ----------
    level : plateau value.
    edge : inner support radius, > 0.
    outer : start of the outer down-ramp; the exact indicator has none, so
        `outer` (and the ramp width) quantify the approximation gap.
    ramp : relative ramp width.
    """
    if not (edge > 0.0 and outer > edge * (1.0 + ramp) and ramp > 0.0 and level > 0.0):
        raise DomainError("indicator approximation requires 0 < edge, edge*(1+ramp) < outer, ramp > 0, level > 0")
    right = [(edge, 0.0), (edge * (1.0 + ramp), level), (outer, level), (outer * (1.0 + ramp), 0.0)]
    if not symmetric:
        return TestFunction(right, plateau=level)
    left = [(-x, v) for x, v in reversed(right)]
    return TestFunction(left + right, plateau=level)


def maxmod_indicator(plateau: float, edge: float = 1.0, outer: float = 1e8, ramp: float = 1e-7) -> TestFunction:
    """Two-sided plateau approximating inf * 1_{|x| > edge}.

    Integrating exp(-integral) against this function approximates the
    probability that no atom exceeds modulus `edge`, with bias at most
    e^{-plateau} plus the ramp and outer-cutoff mass.
    """
    return indicator_approx(plateau, edge=edge, outer=outer, ramp=ramp, symmetric=True)


def tent_family(n: int, outer: float = 1e8) -> TestFunction:
    """Member n of the canonical plateau family: value n for |x| >= 1 + 1/n,
    linear ramp n^2 * (|x| - 1) on 1 < |x| < 1 + 1/n, with an outer cutoff."""
    n = int(n)
    if n < 1:
        raise DomainError("family index must be >= 1")
    return indicator_approx(float(n), edge=1.0, outer=outer, ramp=1.0 / n, symmetric=True)


def shift_tent(left: float, peak: float, right: float, height: float = 1.0) -> ShiftTestFunction:
    return ShiftTestFunction([(left, 0.0), (peak, height), (right, 0.0)])


def shift_indicator_approx(level: float, edge: float, outer: float, ramp: float = 1e-6) -> ShiftTestFunction:
    """Continuous approximation to level * 1_{(edge, inf)} on the shift carrier.

    Ramp widths here are absolute (the carrier is additive).
    """
    if not (outer > edge + ramp and ramp > 0.0 and level > 0.0):
        raise DomainError("shift indicator approximation requires edge + ramp < outer, ramp > 0, level > 0")
    return ShiftTestFunction(
        [(edge, 0.0), (edge + ramp, level), (outer, level), (outer + ramp, 0.0)], plateau=level
    )
