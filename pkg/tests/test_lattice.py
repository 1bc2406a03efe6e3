import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from annolog.errors import ArityMismatch, DegenerateResult
from annolog.lattice import (
    BOTTOM,
    FALSE,
    TRUE,
    AnnotationFn,
    Interval,
    apply_annotation_fn,
    check_consistent,
    make_interval,
    moved,
    negate,
    tighten,
)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def intervals(draw):
    a, b = draw(unit), draw(unit)
    return Interval(min(a, b), max(a, b))


@st.composite
def overlapping_triples(draw):
    # three intervals sharing a common point, so every pair is consistent
    p = draw(unit)
    out = []
    for _ in range(3):
        lo = draw(st.floats(min_value=0.0, max_value=p))
        hi = draw(st.floats(min_value=p, max_value=1.0))
        out.append(Interval(lo, hi))
    return out


class TestInterval:
    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            Interval(0.7, 0.3)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Interval(-0.1, 0.5)
        with pytest.raises(ValueError):
            Interval(0.5, 1.2)

    def test_order(self):
        assert BOTTOM.leq(TRUE)
        assert BOTTOM.leq(Interval(0.3, 0.4))
        assert not TRUE.leq(BOTTOM)


class TestTighten:
    def test_first_update(self):
        assert tighten(BOTTOM, Interval(0.6, 1.0)) == Interval(0.6, 1.0)

    def test_idempotent_example(self):
        x = Interval(0.2, 0.8)
        assert tighten(x, x) == x

    def test_max_min(self):
        assert tighten(Interval(0.3, 0.9), Interval(0.5, 1.0)) == Interval(0.5, 0.9)

    @given(overlapping_triples())
    def test_commutative_associative(self, xs):
        a, b, c = xs
        assert tighten(a, b) == tighten(b, a)
        assert tighten(tighten(a, b), c) == tighten(a, tighten(b, c))

    @given(intervals())
    def test_idempotent(self, a):
        assert tighten(a, a) == a

    @given(overlapping_triples())
    def test_never_widens(self, xs):
        a, b, _ = xs
        r = tighten(a, b)
        assert r.width <= a.width and r.width <= b.width


class TestNegate:
    def test_examples(self):
        assert negate(TRUE) == FALSE
        assert negate(BOTTOM) == BOTTOM
        n = negate(Interval(0.2, 0.9))
        assert n.lower == pytest.approx(0.1) and n.upper == pytest.approx(0.8)

    @given(intervals())
    def test_width_preserved(self, x):
        assert negate(x).width == pytest.approx(x.width, abs=1e-12)


class TestConsistency:
    def test_examples(self):
        assert not check_consistent(FALSE, TRUE)
        assert check_consistent(BOTTOM, Interval(0.3, 0.3))
        assert check_consistent(Interval(0.4, 0.6), Interval(0.5, 0.7))

    @given(intervals(), intervals())
    def test_symmetric(self, a, b):
        assert check_consistent(a, b) == check_consistent(b, a)

    def test_moved_uses_epsilon(self):
        assert not moved(Interval(0.5, 1.0), Interval(0.5 + 1e-12, 1.0))
        assert moved(Interval(0.5, 1.0), Interval(0.5 + 1e-6, 1.0))


class TestAnnotationFunctions:
    def test_lukasiewicz_t_norm(self):
        r = apply_annotation_fn(AnnotationFn("t_luk"), [Interval(0.6, 1.0), Interval(0.7, 1.0)])
        assert r.lower == pytest.approx(0.3)

    def test_product_identity(self):
        x = Interval(0.35, 0.8)
        assert apply_annotation_fn(AnnotationFn("t_prod"), [TRUE, x]) == x

    def test_average(self):
        r = apply_annotation_fn(AnnotationFn("avg"), [Interval(0.8, 1.0), Interval(0.6, 1.0)])
        assert r.lower == pytest.approx(0.7)

    def test_kth_highest(self):
        args = [Interval(0.9, 1.0), Interval(0.5, 1.0), Interval(0.7, 1.0)]
        assert apply_annotation_fn(AnnotationFn("kth", 2), args).lower == 0.7

    def test_kth_too_few(self):
        with pytest.raises(ArityMismatch):
            apply_annotation_fn(AnnotationFn("kth", 3), [TRUE, TRUE])

    def test_scale_pins_upper(self):
        assert apply_annotation_fn(AnnotationFn("scale", 0.5), [Interval(0.8, 0.9)]) == Interval(0.4, 1.0)

    def test_scale_arity(self):
        with pytest.raises(ArityMismatch):
            apply_annotation_fn(AnnotationFn("scale", 0.5), [TRUE, TRUE])

    def test_unknown_function(self):
        with pytest.raises(ValueError):
            AnnotationFn("median")

    def test_degenerate_is_an_error(self):
        with pytest.raises(DegenerateResult):
            make_interval(0.8, 0.2)

    def test_outputs_stay_in_unit_interval(self):
        rng = random.Random(5)
        fns = [AnnotationFn(n) for n in ("t_min", "t_prod", "t_luk", "s_max", "s_prod", "s_luk",
                                          "max", "min", "avg")]
        fns += [AnnotationFn("kth", 1), AnnotationFn("kth", 2), AnnotationFn("scale", 0.7)]
        for i in range(10_000):
            fn = fns[i % len(fns)]
            n = 1 if fn.name == "scale" else rng.randint(2, 5)
            args = []
            for _ in range(n):
                a, b = rng.random(), rng.random()
                args.append(Interval(min(a, b), max(a, b)))
            r = apply_annotation_fn(fn, args)
            assert 0.0 <= r.lower <= r.upper <= 1.0
