"""Finite-support probability measures and the functionals built on them.

The atomic measure is the universal carrier here: empirical measures of
observed sequences, posterior draws from every prior in ``priors``, and
mixtures of both are all finite collections of weighted points.  Points
live in one of three spaces: a finite label alphabet, the real line, or
a d-dimensional Euclidean space.  Continuous laws appear only through
the analytic CDF families of ``families``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import FiniPostError
from .families import AnalyticLaw, PointMassLaw, UniformLaw

__all__ = [
    "FiniteAlphabet",
    "RealLine",
    "Euclidean",
    "Space",
    "Point",
    "AtomicMeasure",
    "Cdf",
    "Sample",
    "empirical",
    "mixture",
    "integrate",
    "cdf_of",
    "l21_functional",
    "gini_md",
    "moment",
    "measure_to_csv",
    "measure_from_csv",
]

_WEIGHT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Spaces and points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteAlphabet:
    """A finite label alphabet, carried as the ordered tuple of labels."""

    labels: tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class RealLine:
    pass


@dataclass(frozen=True)
class Euclidean:
    d: int


Space = FiniteAlphabet | RealLine | Euclidean

# A point is a label (str), a scalar (float), or a vector (tuple of floats);
# all points of one measure or sample share a variant.
Point = str | float | tuple


def _infer_space(values: Sequence[Point]) -> Space:
    first = values[0]
    if isinstance(first, str):
        return FiniteAlphabet(tuple(sorted({str(v) for v in values})))
    if isinstance(first, (tuple, np.ndarray)):
        return Euclidean(len(first))
    return RealLine()


def _check_point(p: Point, space: Space) -> Point:
    if isinstance(space, FiniteAlphabet):
        if not isinstance(p, str) or p not in space.labels:
            raise FiniPostError("space-mismatch", f"point {p!r} not in alphabet {space.labels}")
        return p
    if isinstance(space, RealLine):
        if isinstance(p, (str, tuple, np.ndarray)):
            raise FiniPostError("space-mismatch", f"point {p!r} is not a scalar")
        x = float(p)
        if not math.isfinite(x):
            raise FiniPostError("space-mismatch", f"non-finite scalar point {p!r}")
        return x
    if not isinstance(p, (tuple, np.ndarray)) or len(p) != space.d:
        raise FiniPostError("space-mismatch", f"point {p!r} is not a {space.d}-vector")
    vec = tuple(float(c) for c in p)
    if not all(math.isfinite(c) for c in vec):
        raise FiniPostError("space-mismatch", f"non-finite vector point {p!r}")
    return vec


def _norm(p: Point) -> float:
    if isinstance(p, tuple):
        return math.sqrt(sum(c * c for c in p))
    return abs(float(p))


def _dist(p: Point, q: Point) -> float:
    if isinstance(p, tuple):
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))
    return abs(float(p) - float(q))


# ---------------------------------------------------------------------------
# Atomic measures
# ---------------------------------------------------------------------------

class AtomicMeasure:
    """Probability measure with finitely many atoms.

    Atoms with bitwise-equal points are merged at construction; weights
    must be nonnegative and sum to one within 1e-12.  Instances are
    immutable value objects, safe to share across threads.
    """

    __slots__ = ("points", "weights", "space")

    def __init__(self, atoms: Iterable[tuple[Point, float]], space: Space | None = None):
        pairs = list(atoms)
        if not pairs:
            raise FiniPostError("empty-sample", "a measure needs at least one atom")
        if space is None:
            space = _infer_space([p for p, _ in pairs])
        merged: dict[Point, float] = {}
        for p, w in pairs:
            w = float(w)
            if w < -_WEIGHT_TOL:
                raise FiniPostError("bad-weights", f"negative weight {w}")
            p = _check_point(p, space)
            merged[p] = merged.get(p, 0.0) + w
        total = math.fsum(merged.values())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise FiniPostError("bad-weights", f"weights sum to {total!r}, not 1")
        if len(merged) > 1:
            merged = {p: w for p, w in merged.items() if w != 0.0}
        pts = tuple(merged.keys())
        self.points = pts
        self.weights = np.array([max(merged[p], 0.0) for p in pts], dtype=float)
        self.space = space

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"AtomicMeasure({len(self.points)} atoms on {self.space})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        if self.space != other.space:
            return False
        mine = dict(zip(self.points, self.weights))
        theirs = dict(zip(other.points, other.weights))
        return mine.keys() == theirs.keys() and all(mine[p] == theirs[p] for p in mine)

    def mass_at(self, point: Point) -> float:
        """Weight of one atom (0.0 if the point is not an atom)."""
        for p, w in zip(self.points, self.weights):
            if p == point:
                return float(w)
        return 0.0

    def scalars(self) -> np.ndarray:
        if not isinstance(self.space, RealLine):
            raise FiniPostError("space-mismatch", "scalar view needs a real-line measure")
        return np.asarray(self.points, dtype=float)

    def weight_vector(self, alphabet: FiniteAlphabet) -> np.ndarray:
        """Dense weights aligned with an alphabet's label order."""
        idx = {lab: i for i, lab in enumerate(alphabet.labels)}
        out = np.zeros(alphabet.k)
        for p, w in zip(self.points, self.weights):
            if p not in idx:
                raise FiniPostError("space-mismatch", f"label {p!r} outside alphabet")
            out[idx[p]] = w
        return out


def dirac(point: Point, space: Space | None = None) -> AtomicMeasure:
    return AtomicMeasure([(point, 1.0)], space=space)


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    """An observed finite sequence, tagged with the space it lives in."""

    values: tuple[Point, ...]
    space: Space | None = None

    def __post_init__(self):
        if self.space is None and self.values:
            object.__setattr__(self, "space", _infer_space(self.values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def length(self) -> int:
        return len(self.values)

    def scalars(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def empirical(sample: Sample) -> AtomicMeasure:
    """Uniform atomic measure on the sample values (multiplicity / n)."""
    n = len(sample)
    if n == 0:
        raise FiniPostError("empty-sample", "cannot take the empirical measure of an empty sample")
    w = 1.0 / n
    return AtomicMeasure([(v, w) for v in sample.values], space=sample.space)


# ---------------------------------------------------------------------------
# Measure-level operations
# ---------------------------------------------------------------------------

def mixture(first: AtomicMeasure, second: AtomicMeasure, w: float) -> AtomicMeasure:
    """Convex combination w*first + (1-w)*second with duplicate atoms merged."""
    if first.space != second.space:
        raise FiniPostError("space-mismatch", f"{first.space} vs {second.space}")
    if not (0.0 <= w <= 1.0):
        raise FiniPostError("bad-weights", f"mixture weight {w} outside [0, 1]")
    atoms = [(p, w * wt) for p, wt in zip(first.points, first.weights)]
    atoms += [(p, (1.0 - w) * wt) for p, wt in zip(second.points, second.weights)]
    return AtomicMeasure(atoms, space=first.space)


def integrate(measure: AtomicMeasure, f: Callable[[Point], float]) -> float:
    """Weighted sum of f over the atoms."""
    vals = np.array([float(f(p)) for p in measure.points])
    if not np.all(np.isfinite(vals)):
        raise FiniPostError("non-finite-integrand", "integrand is not finite at an atom")
    return float(np.dot(measure.weights, vals))


def moment(measure: AtomicMeasure, order: float) -> float:
    """Weighted sum of ||x||^order over the atoms (scalar or vector space)."""
    if isinstance(measure.space, FiniteAlphabet):
        raise FiniPostError("space-mismatch", "moments need scalar or vector points")
    norms = np.array([_norm(p) for p in measure.points])
    return float(np.dot(measure.weights, norms ** order))


def gini_md(measure: AtomicMeasure) -> float:
    """Mean absolute difference of two independent draws from the measure."""
    if not isinstance(measure.space, RealLine):
        raise FiniPostError("space-mismatch", "mean difference needs scalar points")
    x = measure.scalars()
    w = measure.weights
    return float(w @ np.abs(x[:, None] - x[None, :]) @ w)


# ---------------------------------------------------------------------------
# CDFs
# ---------------------------------------------------------------------------

class Cdf:
    """Right-continuous distribution function, step or analytic.

    Step form: sorted thresholds with non-decreasing cumulative values
    ending at 1.  Analytic form: one of the named families.
    """

    __slots__ = ("thresholds", "cumulative", "family")

    def __init__(
        self,
        thresholds: Sequence[float] | None = None,
        cumulative: Sequence[float] | None = None,
        family: AnalyticLaw | None = None,
    ):
        if family is not None:
            if thresholds is not None or cumulative is not None:
                raise FiniPostError("config-error", "a Cdf is either step or analytic, not both")
            self.thresholds = None
            self.cumulative = None
            self.family = family
            return
        t = np.asarray(thresholds, dtype=float)
        c = np.asarray(cumulative, dtype=float)
        if t.ndim != 1 or t.shape != c.shape or t.size == 0:
            raise FiniPostError("config-error", "step Cdf needs matching 1-d thresholds and values")
        if np.any(np.diff(t) <= 0):
            raise FiniPostError("config-error", "thresholds must be strictly increasing")
        if np.any(np.diff(c) < 0) or abs(float(c[-1]) - 1.0) > _WEIGHT_TOL:
            raise FiniPostError("config-error", "cumulative values must be non-decreasing and end at 1")
        self.thresholds = t
        self.cumulative = c
        self.family = None

    @property
    def is_step(self) -> bool:
        return self.family is None

    def __call__(self, x) -> np.ndarray | float:
        if self.family is not None:
            return self.family.cdf(x)
        idx = np.searchsorted(self.thresholds, np.asarray(x, dtype=float), side="right")
        vals = np.concatenate([[0.0], self.cumulative])[idx]
        return vals if np.ndim(x) else float(vals)


def cdf_of(measure: AtomicMeasure) -> Cdf:
    """Step CDF of a real-line atomic measure."""
    if not isinstance(measure.space, RealLine):
        raise FiniPostError("space-mismatch", "cdf_of needs a real-line measure")
    order = np.argsort(measure.scalars(), kind="stable")
    x = measure.scalars()[order]
    c = np.cumsum(measure.weights[order])
    c[-1] = 1.0  # exact endpoint; partial sums already within 1e-12
    return Cdf(thresholds=x, cumulative=c)


# ---------------------------------------------------------------------------
# The sqrt(F(1-F)) integral
# ---------------------------------------------------------------------------

def _adaptive_simpson(f, a, b, tol, depth=52):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return (
        _simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + _simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    )


def l21_functional(cdf: Cdf, tol: float = 1e-9) -> float:
    """Integral of sqrt(F(1-F)) over the line.

    Exact for step CDFs (F is constant between thresholds); adaptive
    bisection for analytic families, clipped where F or 1-F drops below
    1e-15.  Finiteness of the integral implies a finite second moment.
    """
    if cdf.is_step:
        t = cdf.thresholds
        if t.size == 1:
            return 0.0
        F = cdf.cumulative[:-1]
        return float(np.dot(np.sqrt(F * (1.0 - F)), np.diff(t)))

    fam = cdf.family
    if isinstance(fam, PointMassLaw):
        return 0.0
    if isinstance(fam, UniformLaw):
        # F linear on [a, b]: closed form (b - a) * pi / 8.
        return (fam.b - fam.a) * math.pi / 8.0

    # Clip the domain where the integrand is below resolvable size.
    lo = float(fam.quantile(1e-15))
    hi = float(fam.quantile(1.0 - 1e-15))
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi - lo > 1e12:
        raise FiniPostError("l21-divergent", "tail bound test failed; integral looks divergent")

    def integrand(x: float) -> float:
        F = float(fam.cdf(x))
        return math.sqrt(max(F * (1.0 - F), 0.0))

    return _adaptive_simpson(integrand, lo, hi, tol)


# ---------------------------------------------------------------------------
# CSV serialization (point,weight / p1..pd,weight / label,weight)
# ---------------------------------------------------------------------------

def measure_to_csv(measure: AtomicMeasure) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if isinstance(measure.space, FiniteAlphabet):
        writer.writerow(["label", "weight"])
        for p, w in zip(measure.points, measure.weights):
            writer.writerow([p, f"{w:.17g}"])
    elif isinstance(measure.space, RealLine):
        writer.writerow(["point", "weight"])
        for p, w in zip(measure.points, measure.weights):
            writer.writerow([f"{p:.17g}", f"{w:.17g}"])
    else:
        d = measure.space.d
        writer.writerow([f"p{i + 1}" for i in range(d)] + ["weight"])
        for p, w in zip(measure.points, measure.weights):
            writer.writerow([f"{c:.17g}" for c in p] + [f"{w:.17g}"])
    return buf.getvalue()


def measure_from_csv(text: str, space: Space | None = None) -> AtomicMeasure:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise FiniPostError("empty-sample", "CSV has no atom rows")
    header = rows[0]
    atoms: list[tuple[Point, float]] = []
    if header == ["label", "weight"]:
        for row in rows[1:]:
            atoms.append((row[0], float(row[1])))
    elif header == ["point", "weight"]:
        for row in rows[1:]:
            atoms.append((float(row[0]), float(row[1])))
    elif header[-1] == "weight" and all(h == f"p{i + 1}" for i, h in enumerate(header[:-1])):
        for row in rows[1:]:
            atoms.append((tuple(float(c) for c in row[:-1]), float(row[-1])))
    else:
        raise FiniPostError("config-error", f"unrecognized atom CSV header {header}")
    return AtomicMeasure(atoms, space=space)
