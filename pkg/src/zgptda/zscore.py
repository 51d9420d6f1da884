"""Fuzzy Z-number scoring of per-law conformity metrics.

Each fitted law contributes a 4-vector of per-metric "badness" scalars
(graded through triangular membership sets over R^2, KL, JS, and MAPE) and a
reliability figure (the dispersion of that vector). The law vectors are
aggregated into a Z-number (A_t, B_t), mapped through a Mamdani rule base to
a non-suitability distribution S', and defuzzified by centroid; the final
suitability is s = 1 - centroid(S').
"""

import math
from dataclasses import dataclass

import numpy as np

from .fitkit import FitMetrics

__all__ = [
    "NoSignal",
    "TriMF",
    "MetricGrade",
    "LawVector",
    "ZNumber",
    "Suitability",
    "WEIGHTS",
    "grade_metric",
    "law_vector",
    "aggregate",
    "infer_suitability",
    "describe_rulebase",
]


class NoSignal(Exception):
    """No fittable laws: there is nothing to aggregate."""


@dataclass(frozen=True)
class TriMF:
    """Triangular membership function on points a <= b <= c.

    Degenerate edges (a == b or b == c) act as shoulders: membership is 1 at
    the apex even when it coincides with a foot.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c):
            raise ValueError(f"invalid trimf points ({self.a}, {self.b}, {self.c})")

    def membership(self, x: float) -> float:
        if x == self.b:
            return 1.0
        if x <= self.a or x >= self.c:
            return 0.0
        if x < self.b:
            return (x - self.a) / (self.b - self.a)
        return (self.c - x) / (self.c - self.b)


# Per-metric grading sets (Low, Medium, High). R^2 is graded via 1 - R^2 and
# shares its breakpoints with JS; MAPE reuses the KL breakpoints.
_RJ_SETS = (TriMF(0.0, 0.05, 0.1), TriMF(0.1, 0.15, 0.2), TriMF(0.2, 0.6, 1.0))
_KM_SETS = (TriMF(0.0, 0.1, 0.2), TriMF(0.2, 0.35, 0.5), TriMF(0.5, 0.75, 1.0))

GRADE_TABLES: dict[str, tuple[TriMF, TriMF, TriMF]] = {
    "r2": _RJ_SETS,
    "kl": _KM_SETS,
    "js": _RJ_SETS,
    "mape": _KM_SETS,
}

METRIC_ORDER = ("r2", "kl", "js", "mape")

# empirically chosen metric weights, in METRIC_ORDER
WEIGHTS = np.array([0.1, 0.2, 0.2, 0.5])


@dataclass(frozen=True)
class MetricGrade:
    """Membership degrees and the defuzzified badness of one metric value.

    ``fallback`` marks values that fell on a boundary where every set has
    zero membership and were assigned to the nearest set.
    """

    low: float
    medium: float
    high: float
    badness: float
    fallback: bool = False


def grade_metric(metric_kind: str, value: float) -> MetricGrade:
    """Grade one metric value into (Low, Medium, High) and a badness scalar.

    For ``metric_kind == "r2"`` the graded quantity is ``1 - value``. Values
    above the High apex clamp to full High membership. The badness is the
    membership-weighted centroid of the set apexes, rescaled so the Low apex
    maps to 0 and the High apex to 1; it is non-decreasing in the graded
    value and reaches 0 exactly for perfect metrics.
    """
    if metric_kind not in GRADE_TABLES:
        raise ValueError(f"unknown metric kind {metric_kind!r}")
    if not math.isfinite(value):
        raise ValueError(f"{metric_kind}: value must be finite")
    graded = 1.0 - value if metric_kind == "r2" else value
    if graded < 0:
        graded = 0.0
    sets = GRADE_TABLES[metric_kind]
    apexes = tuple(s.b for s in sets)
    graded = min(graded, apexes[2])
    degrees = [s.membership(graded) for s in sets]
    fallback = False
    if sum(degrees) == 0.0:
        # boundary points between adjacent sets (shared feet) carry zero
        # membership everywhere; assign the nearest set, lower on ties
        fallback = True
        nearest = min(range(3), key=lambda i: (abs(graded - apexes[i]), i))
        degrees = [0.0, 0.0, 0.0]
        degrees[nearest] = 1.0
    centroid = sum(d * p for d, p in zip(degrees, apexes)) / sum(degrees)
    badness = (centroid - apexes[0]) / (apexes[2] - apexes[0])
    return MetricGrade(
        low=degrees[0],
        medium=degrees[1],
        high=degrees[2],
        badness=badness,
        fallback=fallback,
    )


@dataclass
class LawVector:
    """Badness 4-vector of one law (order: R^2, KL, JS, MAPE) and its
    reliability figure, the population standard deviation of the four."""

    badness: np.ndarray
    reliability: float


def law_vector(metrics: FitMetrics) -> LawVector:
    values = (metrics.r2, metrics.kl, metrics.js, metrics.mape)
    badness = np.array(
        [grade_metric(kind, v).badness for kind, v in zip(METRIC_ORDER, values)]
    )
    return LawVector(badness=badness, reliability=float(badness.std()))


@dataclass(frozen=True)
class ZNumber:
    """Aggregated badness A_t, aggregated dispersion B_t, and how many laws
    entered the aggregation."""

    a_t: float
    b_t: float
    laws_used: int


def aggregate(law_vectors) -> ZNumber:
    """Mean over laws of |W . A_i| and of B_i.

    Unfittable laws are simply not passed in; the mean renormalizes over
    whatever remains.

    Raises:
        NoSignal: the sequence is empty.
    """
    vectors = list(law_vectors)
    if not vectors:
        raise NoSignal("no fittable laws to aggregate")
    a_t = float(np.mean([abs(float(WEIGHTS @ v.badness)) for v in vectors]))
    b_t = float(np.mean([v.reliability for v in vectors]))
    return ZNumber(a_t=a_t, b_t=b_t, laws_used=len(vectors))


@dataclass(frozen=True)
class Suitability:
    """Defuzzified suitability s = 1 - centroid(S')."""

    s: float
    s_prime_centroid: float


# Output-side fuzzification. A_t lives on [0, 1]; B_t is clamped to [0, 0.5];
# the non-suitability S' universe is [0, 1]. Shoulder sets guarantee that
# every input activates at least one rule.
A_SETS = {"low": TriMF(0.0, 0.0, 0.3), "medium": TriMF(0.2, 0.5, 0.8), "high": TriMF(0.7, 1.0, 1.0)}
B_SETS = {"low": TriMF(0.0, 0.0, 0.1), "medium": TriMF(0.05, 0.15, 0.25), "high": TriMF(0.2, 0.5, 0.5)}
S_SETS = {"low": TriMF(0.0, 0.0, 0.35), "medium": TriMF(0.25, 0.5, 0.75), "high": TriMF(0.65, 1.0, 1.0)}

B_CLAMP = 0.5

# Mamdani rules: (A_t set, B_t sets or None for "any B", S' sets activated).
# High aggregate badness maps to high non-suitability regardless of
# reliability; low badness with unreliable metrics hedges between low and
# medium; the (medium, high-B) rule completes the grid monotonically.
RULES: tuple[tuple[str, tuple[str, ...] | None, tuple[str, ...]], ...] = (
    ("high", None, ("high",)),
    ("medium", ("medium", "low"), ("medium",)),
    ("low", ("high",), ("low", "medium")),
    ("low", ("low", "medium"), ("low",)),
    ("medium", ("high",), ("medium",)),
)

_CENTROID_GRID = np.linspace(0.0, 1.0, 1001)


def infer_suitability(z: ZNumber) -> Suitability:
    """Mamdani min-activation / max-aggregation inference to suitability.

    A_t is clamped to [0, 1] and B_t to [0, 0.5] before fuzzification. The
    aggregated S' membership is defuzzified by its centroid on a 1001-point
    grid (trapezoidal integration); the completed rule base guarantees a
    nonzero aggregate for every input.
    """
    a_t = min(max(z.a_t, 0.0), 1.0)
    b_t = min(max(z.b_t, 0.0), B_CLAMP)
    activations = {name: 0.0 for name in S_SETS}
    for a_name, b_names, s_names in RULES:
        mu_a = A_SETS[a_name].membership(a_t)
        if b_names is None:
            mu_b = 1.0
        else:
            mu_b = max(B_SETS[n].membership(b_t) for n in b_names)
        strength = min(mu_a, mu_b)
        for s_name in s_names:
            activations[s_name] = max(activations[s_name], strength)

    x = _CENTROID_GRID
    agg = np.zeros_like(x)
    for name, level in activations.items():
        if level <= 0.0:
            continue
        mf = S_SETS[name]
        np.maximum(agg, np.minimum(level, _vector_membership(mf, x)), out=agg)
    mass = np.trapezoid(agg, x)
    if mass <= 0.0:
        raise RuntimeError("rule base produced an empty aggregate; inputs out of range?")
    centroid = float(np.trapezoid(x * agg, x) / mass)
    return Suitability(s=1.0 - centroid, s_prime_centroid=centroid)


def _vector_membership(mf: TriMF, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    if mf.b > mf.a:
        rising = (x > mf.a) & (x < mf.b)
        out[rising] = (x[rising] - mf.a) / (mf.b - mf.a)
    if mf.c > mf.b:
        falling = (x > mf.b) & (x < mf.c)
        out[falling] = (mf.c - x[falling]) / (mf.c - mf.b)
    out[x == mf.b] = 1.0
    return out


def describe_rulebase() -> dict:
    """JSON-serializable snapshot of every breakpoint and rule, so reported
    scores are auditable."""

    def mf(t: TriMF) -> list[float]:
        return [t.a, t.b, t.c]

    return {
        "metric_weights": {k: float(w) for k, w in zip(METRIC_ORDER, WEIGHTS)},
        "grade_tables": {
            kind: {"low": mf(s[0]), "medium": mf(s[1]), "high": mf(s[2])}
            for kind, s in GRADE_TABLES.items()
        },
        "a_t_sets": {k: mf(v) for k, v in A_SETS.items()},
        "b_t_sets": {k: mf(v) for k, v in B_SETS.items()},
        "b_t_clamp": B_CLAMP,
        "s_prime_sets": {k: mf(v) for k, v in S_SETS.items()},
        "rules": [
            {
                "a_t": a,
                "b_t": list(b) if b is not None else "any",
                "s_prime": list(s),
            }
            for a, b, s in RULES
        ],
        "defuzzification": "centroid, trapezoidal on 1001-point grid",
        "suitability": "s = 1 - centroid(S')",
    }
