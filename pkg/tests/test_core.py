import math

import pytest
from hypothesis import given, strategies as st

from dynbin.core import (
    Instance,
    Item,
    ScaledSize,
    UnresolvedDurationError,
    concat,
    mu,
    read_jsonl,
    span,
    validate,
    vol,
    with_durations,
    write_jsonl,
)


def make(items, scale=4, **kw):
    return Instance(items=tuple(items), scale=scale, **kw)


class TestScaledSize:
    def test_value_and_fraction(self):
        s = ScaledSize(3, 8)
        assert s.value == 0.375
        assert s.as_fraction() == pytest.approx(0.375)


class TestItem:
    def test_departure(self):
        assert Item(0, 2.0, 1, 3.0).departure == 5.0

    def test_deferred_departure_raises(self):
        with pytest.raises(UnresolvedDurationError):
            Item(0, 0.0, 1, None).departure


class TestVolSpan:
    def test_vol(self):
        inst = make([Item(0, 0.0, 2, 3.0), Item(1, 1.0, 1, 4.0)])
        assert vol(inst) == 2 / 4 * 3 + 1 / 4 * 4

    def test_span_merges_half_open_abutment(self):
        # [0,1) and [1,2) leave no gap
        inst = make([Item(0, 0.0, 1, 1.0), Item(1, 1.0, 1, 1.0)])
        assert span(inst) == 2.0

    def test_span_with_gap(self):
        inst = make([Item(0, 0.0, 1, 1.0), Item(1, 5.0, 1, 2.0)])
        assert span(inst) == 3.0

    def test_deferred_raises(self):
        inst = make([Item(0, 0.0, 1, None)])
        with pytest.raises(UnresolvedDurationError):
            vol(inst)
        with pytest.raises(UnresolvedDurationError):
            span(inst)

    @given(
        st.lists(
            st.tuples(
                st.floats(0, 100, allow_nan=False),
                st.floats(0.01, 50, allow_nan=False),
            ),
            min_size=1,
            max_size=30,
        )
    )
    def test_span_bounds(self, windows):
        items = [Item(i, a, 1, d) for i, (a, d) in enumerate(windows)]
        inst = make(items)
        s = span(inst)
        assert max(d for _, d in windows) <= s + 1e-9
        assert s <= sum(d for _, d in windows) + 1e-9


def test_mu():
    inst = make([Item(0, 0.0, 1, 2.0), Item(1, 0.0, 1, 8.0)])
    assert mu(inst) == 4.0


def test_with_durations():
    inst = make([Item(0, 0.0, 1, None), Item(1, 0.0, 1, 2.0)])
    resolved = with_durations(inst, {0: 5.0})
    assert not resolved.has_deferred()
    assert resolved.items[0].duration == 5.0
    assert resolved.items[1].duration == 2.0


def test_with_durations_missing_id():
    inst = make([Item(0, 0.0, 1, None)])
    with pytest.raises(UnresolvedDurationError):
        with_durations(inst, {})


class TestConcat:
    def test_lifetimes_disjoint_and_rescaled(self):
        a = make([Item(0, 0.0, 1, 2.0)], scale=2)
        b = make([Item(0, 0.0, 2, 1.0)], scale=3)
        joined = concat([a, b], gap=1.0)
        assert joined.scale == 6
        first, second = joined.items
        assert first.size_num == 3 and second.size_num == 4
        assert second.arrival >= first.departure + 1.0
        assert [it.id for it in joined.items] == [0, 1]

    def test_rejects_nonpositive_gap(self):
        a = make([Item(0, 0.0, 1, 1.0)])
        with pytest.raises(ValueError):
            concat([a, a], gap=0.0)


class TestValidate:
    def test_clean(self):
        assert validate(make([Item(0, 0.0, 1, 1.0)])) == []

    def test_duplicate_id(self):
        bad = make([Item(0, 0.0, 1, 1.0), Item(0, 1.0, 1, 1.0)])
        assert any("duplicate id" in v for v in validate(bad))

    def test_oversize_and_nonpositive(self):
        bad = make([Item(0, 0.0, 9, 1.0), Item(1, 0.0, 0, 1.0)])
        msgs = validate(bad)
        assert any("exceeds bin capacity" in v for v in msgs)
        assert any("size must be positive" in v for v in msgs)

    def test_negative_times(self):
        bad = make([Item(0, -1.0, 1, 0.0)])
        msgs = validate(bad)
        assert any("negative arrival" in v for v in msgs)
        assert any("duration must be positive" in v for v in msgs)


def test_jsonl_roundtrip(tmp_path):
    inst = make(
        [Item(0, 0.0, 2, 1.5), Item(1, 0.25, 1, None)],
        seed=7,
        adversary={"name": "longest-per-bin", "mu": 5.0, "long_count": 2},
        rng="python-random-mt19937",
    )
    path = tmp_path / "inst.jsonl"
    write_jsonl(inst, path)
    back = read_jsonl(path)
    assert back == inst
