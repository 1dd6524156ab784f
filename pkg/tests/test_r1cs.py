import pytest

from veil.field import DEFAULT_FIELD, field_by_name
from veil.gadgets import Builder, lc_of
from veil.r1cs import ConstraintSystem


def small_system():
    # x * y = z with public x
    bld = Builder(DEFAULT_FIELD)
    x = bld.alloc_public()
    y = bld.alloc()
    z = bld.alloc()
    bld.enforce(lc_of(x), lc_of(y), lc_of(z), "product")
    p = bld.p
    bld.hint([z], [lc_of(x), lc_of(y)], lambda v: [(v[0] * v[1]) % p])
    return bld.finish(), x, y, z


def test_witness_generation_and_check():
    cs, x, y, z = small_system()
    wit = cs.generate_witness({x: 6, y: 7})
    assert wit[z] == 42
    assert cs.satisfied(wit)
    wit[z] = 41
    idx, tag = cs.check(wit)
    assert tag == "product"


def test_empty_system_trivially_satisfiable():
    cs = ConstraintSystem(DEFAULT_FIELD)
    wit = cs.generate_witness({})
    assert wit == [1]
    assert cs.satisfied(wit)


def test_serialize_roundtrip_and_digest():
    cs, *_ = small_system()
    blob = cs.serialize()
    back = ConstraintSystem.deserialize(blob)
    assert back.serialize() == blob
    assert back.n_vars == cs.n_vars
    assert back.n_public == cs.n_public
    assert back.constraints == cs.constraints
    assert cs.digest() == back.digest()


def test_digest_changes_with_coefficients():
    cs1, *_ = small_system()
    cs2, *_ = small_system()
    assert cs1.digest() == cs2.digest()
    a, b, c = cs2.constraints[0]
    cs2.constraints[0] = (tuple((i, v + 1) for i, v in a), b, c)
    assert cs1.digest() != cs2.digest()


def test_bad_magic_rejected():
    with pytest.raises(ValueError):
        ConstraintSystem.deserialize(b"NOPE" + b"\x00" * 32)


def test_big_coefficients_roundtrip():
    f = field_by_name("bn254")
    cs = ConstraintSystem(f)
    cs.n_vars = 2
    big = f.p - 1
    cs.constraints.append((((0, big), (1, 123456789)), ((0, 1),), ((1, big),)))
    cs.tags.append("")
    back = ConstraintSystem.deserialize(cs.serialize())
    assert back.constraints == cs.constraints


def test_public_prefix_allocation_discipline():
    bld = Builder(DEFAULT_FIELD)
    bld.alloc_public(3)
    bld.alloc(2)
    with pytest.raises(AssertionError):
        bld.alloc_public()
