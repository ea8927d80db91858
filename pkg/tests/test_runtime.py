import pytest
from hypothesis import given, strategies as st

from smartml.runtime import (UNIT, AdtValue, EmptyRollback, MissingField, PermanentMemory, Ref, UnknownField,
                             UnknownInstance, alloc_contract, canonical, revert, snapshot, value_from_json,
                             value_to_json)
from smartml.runtime import Configuration

values = st.recursive(
    st.one_of(st.integers(), st.booleans(), st.text(max_size=5), st.builds(Ref, st.integers(0, 50)),
              st.just(UNIT)),
    lambda inner: st.builds(AdtValue, st.sampled_from(["nil", "cons", "entry"]),
                            st.lists(inner, max_size=3).map(tuple)),
    max_leaves=8,
)


@given(values)
def test_value_json_round_trip(v):
    assert value_from_json(value_to_json(v)) == v


def test_bool_is_not_int_in_json():
    assert value_to_json(True) == {"bool": True}
    assert value_to_json(1) == {"int": 1}


def test_memory_is_persistent():
    pm0, i = PermanentMemory().alloc("C", {"x": 1})
    pm1 = pm0.write(i, "x", 2)
    assert pm0.read(i, "x") == 1 and pm1.read(i, "x") == 2
    assert pm0 != pm1


def test_memory_errors():
    pm, i = PermanentMemory().alloc("C", {"x": 1})
    with pytest.raises(UnknownInstance):
        pm.read(99, "x")
    with pytest.raises(UnknownField):
        pm.write(i, "y", 1)
    with pytest.raises(MissingField):
        alloc_contract(pm, "C", {"x": 1}, expected=["x", "y"])


@given(st.dictionaries(st.sampled_from("abcd"), values, min_size=1))
def test_memory_json_round_trip(fields):
    pm, _ = PermanentMemory().alloc("C", fields)
    back = PermanentMemory.from_json(pm.to_json())
    assert back == pm
    assert canonical(back.to_json()) == canonical(pm.to_json())


def test_snapshot_and_revert():
    pm, i = PermanentMemory().alloc("C", {"x": 1})
    cfg = Configuration(i, (), {}, pm, (pm,), "m", ())
    inner = snapshot(cfg).with_(permanent=pm.write(i, "x", 5))
    back = revert(inner)
    assert back.permanent == pm and back.rollback == (pm,)
    with pytest.raises(EmptyRollback):
        revert(cfg.with_(rollback=()))
