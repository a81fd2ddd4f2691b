"""Closed-form space bounds for missing item finding, and curve export.

All logarithms are base 2.  Lower bounds whose constants are only
asymptotic are evaluated with constant 1 and flagged as such in exports.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

from .algorithms import rt_depth, rt_params
from .engine import Instance

LN2 = math.log(2)


def oracle_lb(n, ell, delta):
    if delta >= 1:
        raise ValueError("the bound is undefined at delta = 1")
    return ell * ell / (4 * n * LN2) + math.log2(1 - delta)


def trivial_lb(ell):
    return math.log2(ell + 1)


def corner_ratio(k):
    """(k^2 + k + 4) / (k + 1)^2 as an exact fraction."""
    return Fraction(k * k + k + 4, (k + 1) ** 2)


@dataclass(frozen=True)
class RtLowerBound:
    bits: float
    witness_k: int | None
    exponent: float  # log(bits) / log(ell)
    closed_form: float  # ell ** ((15/32) log ell / log n)
    k_max: int


def rt_search_limit(n, ell):
    """A k range past the peak of the max-over-k objective."""
    L, N = math.log2(ell), math.log2(n)
    return max(math.ceil(L), math.ceil(4 * N / L) + 4)


def rt_lb(n, ell, k_max=None):
    """max over k >= 1 of (ell^(k+1) / n)^(2 / (k^2 + 3k - 2)), with its argmax."""
    if not 1 <= ell < n:
        raise ValueError("need 1 <= ell < n")
    if ell == 1:
        # every term is below 1 and they increase towards 1: no maximum
        return RtLowerBound(1.0, None, 0.0, 1.0, 0)
    L, N = math.log2(ell), math.log2(n)
    ratio = N / L
    if k_max is None:
        k_max = rt_search_limit(n, ell)
    best, witness = -math.inf, None
    for k in range(1, k_max + 1):
        expo = 2 * ((k + 1) - ratio) / (k * k + 3 * k - 2)
        if expo > best:
            best, witness = expo, k
    closed = ell ** (15 / 32 * L / N)
    return RtLowerBound(2 ** (best * L), witness, best, closed, k_max)


@dataclass(frozen=True)
class RtUpperBound:
    bits: float
    exact_bits: float | None
    in_range: bool


def rt_ub_bits(n, ell, delta):
    """Space of the random-tape construction, or ell bits outside its range."""
    if ell < 4 or 64 * ell > n:
        return RtUpperBound(float(ell), None, False)
    d, _ = rt_depth(n, ell)
    alpha = (4 * ell) ** (2 / (d - 1)) / (n / 4) ** (2 / (d * (d - 1)))
    log_ell = math.log2(ell)
    tail = ell if delta == 0 else min(ell, math.log2(1 / delta))
    bits = math.ceil(alpha) * log_ell**2 + tail * log_ell
    exact = rt_params(Instance(n, ell, delta)).exact_bits()
    return RtUpperBound(bits, exact, True)


def pd_lb_branches(n, ell, delta):
    if delta > 1 / 3:
        raise ValueError("delta must be at most 1/3")
    if ell < 1:
        return 0.0, 0.0
    lg = math.log2(2 * n / ell)
    left = max(ell / (36 * lg), math.sqrt(ell / 108))
    if delta == 0:
        return left, math.inf
    gain = ell * math.log2(1 / (2 * delta))
    right = max(gain / (17280 * lg * lg * math.log2(64 * n)), (gain / 1244160) ** 0.25)
    return left, right


def pd_lb(n, ell, delta):
    return min(pd_lb_branches(n, ell, delta))


# constants of the random-seed bound
RS_SQRT_BASE = 8 * 2 * 17280  # ell/(8z) slack times log(3/2) >= 1/2
RS_SQRT_CONST = RS_SQRT_BASE * 28  # (log 2n)^2 log 64n <= 28 (log n)^3
RS_FIFTH_CONST = 8 * 2 * 1244160


def rs_lb(n, ell):
    return max(oracle_lb(n, ell, 1 / 6),
               math.sqrt(ell / (RS_SQRT_CONST * math.log2(n) ** 3)),
               (ell / RS_FIFTH_CONST) ** 0.2)


def rs_lb_reduction(n, ell, z_max=None):
    """Smallest integer z >= 1 with z >= pd_lb(n, floor(ell / (2z + 2)), 1/3)."""
    z_max = z_max or max(1, ell)
    for z in range(1, z_max + 1):
        part = ell // (2 * z + 2)
        if part < 1 or z >= pd_lb(n, part, 1 / 3):
            return z
    return z_max


@dataclass(frozen=True)
class BoundPoint:
    model: str
    direction: str
    n: int
    ell: int
    delta: float
    bits: float
    witness_k: int | None = None
    constants_explicit: bool = False

    def __post_init__(self):
        if self.bits < 0:
            object.__setattr__(self, "bits", 0.0)


CSV_FIELDS = ["model", "direction", "n", "ell", "delta", "bits", "witness_k",
              "constants_explicit", "log2_ell", "log2_bits"]


def bound_points(n, ell, delta):
    """Every upper and lower bound curve evaluated at one (n, ell, delta)."""
    lg = math.log2(n)
    pts = []

    def add(model, direction, bits, explicit, witness=None):
        pts.append(BoundPoint(model, direction, n, ell, delta, float(bits), witness, explicit))

    add("static-seed", "upper", lg * lg if ell <= n / 2 else ell, False)
    add("oracle", "upper", (ell * ell / n + lg) * lg, False)
    add("oracle", "lower", oracle_lb(n, ell, delta), True)
    add("tape", "upper", rt_ub_bits(n, ell, delta).bits, False)
    low = rt_lb(n, ell)
    add("tape", "lower", low.bits, False, low.witness_k)
    add("seed", "upper", (ell * ell / n + math.sqrt(ell) + lg) * lg, False)
    add("seed", "lower", rs_lb(n, ell), True)
    add("pseudo-det", "lower", pd_lb(n, ell, delta), True)
    add("det", "lower", ell / math.log2(2 * n / ell) + math.sqrt(ell), False)
    log_ell = math.log2(ell)
    add("det", "upper", ell * log_ell / lg + math.sqrt(ell * log_ell), False)
    return pts


def _fmt(x):
    return repr(float(x))


def emit_bounds_csv(n, delta, ell_grid):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for ell in ell_grid:
        if not 1 <= ell <= n:
            raise ValueError("grid values must lie in [1, n]")
        if ell == n:
            raise ValueError("ell = n leaves no missing item")
        for p in bound_points(n, ell, delta):
            writer.writerow([
                p.model, p.direction, p.n, p.ell, _fmt(p.delta), _fmt(p.bits),
                "" if p.witness_k is None else p.witness_k, int(p.constants_explicit),
                _fmt(math.log2(p.ell)), _fmt(math.log2(p.bits)) if p.bits > 0 else "",
            ])
    return buf.getvalue()


def default_grid(n):
    """Powers of two from 2 up to n/2."""
    return [1 << i for i in range(1, n.bit_length() - 1)]
