"""Interval annotations over [0, 1] and the annotation functions used in rule heads.

Intervals form a lower semilattice: the bottom element ``[0, 1]`` means "no
knowledge" and every point interval ``[x, x]`` is maximal.  Moving up the order
tightens the bounds, so ``[l, u] <= [l', u']`` holds iff ``l <= l'`` and
``u' <= u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ArityMismatch, DegenerateResult

EPSILON = 1e-9


@dataclass(frozen=True, slots=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise ValueError(f"invalid interval [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def leq(self, other: Interval) -> bool:
        """Lattice order: True when ``other`` is at least as tight as ``self``."""
        return self.lower <= other.lower and other.upper <= self.upper

    def __iter__(self):
        yield self.lower
        yield self.upper

    def __str__(self):
        return f"[{self.lower},{self.upper}]"


BOTTOM = Interval(0.0, 1.0)
TRUE = Interval(1.0, 1.0)
FALSE = Interval(0.0, 0.0)


def tighten(current: Interval, incoming: Interval) -> Interval:
    """Least upper bound of two consistent intervals: ``[max(l, l'), min(u, u')]``."""
    lo = current.lower if current.lower >= incoming.lower else incoming.lower
    hi = current.upper if current.upper <= incoming.upper else incoming.upper
    if lo == current.lower and hi == current.upper:
        return current
    return Interval(lo, hi)


def negate(x: Interval) -> Interval:
    return Interval(1.0 - x.upper, 1.0 - x.lower)


def check_consistent(current: Interval, incoming: Interval) -> bool:
    return not (incoming.lower > current.upper or incoming.upper < current.lower)


def moved(old: Interval, new: Interval, epsilon: float = EPSILON) -> bool:
    """Whether ``new`` differs from ``old`` by at least ``epsilon`` in some bound."""
    return abs(new.lower - old.lower) >= epsilon or abs(new.upper - old.upper) >= epsilon


# -- annotation functions ---------------------------------------------------

def _t_prod(xs):
    out = 1.0
    for x in xs:
        out *= x
    return out


def _t_luk(xs):
    out = xs[0]
    for x in xs[1:]:
        out = max(0.0, out + x - 1.0)
    return out


def _s_prod(xs):
    out = 0.0
    for x in xs:
        out = out + x - out * x
    return out


def _s_luk(xs):
    out = 0.0
    for x in xs:
        out = min(1.0, out + x)
    return out


def _average(xs):
    return math.fsum(xs) / len(xs)


# name -> (scalar fold, needs a numeric parameter, fixed arity or None for variadic)
_FUNCTIONS: dict[str, tuple[Callable, bool, int | None]] = {
    "t_min": (min, False, None),
    "t_prod": (_t_prod, False, None),
    "t_luk": (_t_luk, False, None),
    "s_max": (max, False, None),
    "s_prod": (_s_prod, False, None),
    "s_luk": (_s_luk, False, None),
    "max": (max, False, None),
    "min": (min, False, None),
    "avg": (_average, False, None),
    "kth": (None, True, None),
    "scale": (None, True, 1),
    "id": (None, False, 1),
    "constant": (None, True, 0),
}

FUNCTION_NAMES = frozenset(_FUNCTIONS)


@dataclass(frozen=True, slots=True)
class AnnotationFn:
    """A built-in annotation function.

    ``param`` carries ``k`` for ``kth`` (k-th highest value), the factor ``c`` for
    ``scale`` and the value for ``constant``.
    """

    name: str
    param: float | None = None

    def __post_init__(self):
        if self.name not in _FUNCTIONS:
            raise ValueError(f"unknown annotation function {self.name!r}")
        needs_param = _FUNCTIONS[self.name][1]
        if needs_param and self.param is None:
            raise ValueError(f"{self.name} requires a parameter")
        if not needs_param and self.param is not None:
            raise ValueError(f"{self.name} takes no parameter")
        if self.name == "kth" and (self.param != int(self.param) or self.param < 1):
            raise ValueError("kth requires an integer k >= 1")

    @property
    def arity(self) -> int | None:
        return _FUNCTIONS[self.name][2]

    def check_arity(self, n: int) -> None:
        arity = self.arity
        if arity is not None and n != arity:
            raise ArityMismatch(f"{self.name} takes {arity} argument(s), got {n}")
        if arity is None and n == 0:
            raise ArityMismatch(f"{self.name} needs at least one argument")
        if self.name == "kth" and n < self.param:
            raise ArityMismatch(f"kth({int(self.param)}) needs at least {int(self.param)} values, got {n}")

    def scalar(self, values: Sequence[float]) -> float:
        """Evaluate on one component (all lower bounds, or all upper bounds)."""
        self.check_arity(len(values))
        name = self.name
        if name == "scale":
            return self.param * values[0]
        if name == "id":
            return values[0]
        if name == "constant":
            return self.param
        if name == "kth":
            return sorted(values, reverse=True)[int(self.param) - 1]
        return _FUNCTIONS[name][0](list(values))


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def make_interval(lower: float, upper: float, source: str = "annotation function") -> Interval:
    """Clamp both bounds into [0, 1]; refuse to repair an inverted result."""
    lo, hi = clamp01(lower), clamp01(upper)
    if lo > hi:
        raise DegenerateResult(f"{source} produced lower {lo} > upper {hi}")
    return Interval(lo, hi)


def apply_annotation_fn(fn: AnnotationFn, args: Sequence[Interval]) -> Interval:
    """Apply ``fn`` componentwise to the lower and the upper bounds of ``args``.

    ``scale`` and ``constant`` only act on the lower bound and pin the upper
    bound at 1, the usual encoding of a scalar truth value.
    """
    fn.check_arity(len(args))
    lowers = [a.lower for a in args]
    if fn.name in ("scale", "constant"):
        return make_interval(fn.scalar(lowers), 1.0, fn.name)
    uppers = [a.upper for a in args]
    return make_interval(fn.scalar(lowers), fn.scalar(uppers), fn.name)
