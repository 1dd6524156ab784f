"""Public-input hashing: exact compression counts and host/circuit
equivalence over the identical byte serialization."""
import hashlib
import random

import pytest

from veil.field import DEFAULT_FIELD
from veil.gadgets import Builder, lc_of
from veil.sha256gadget import (CONCAT, LEGACY_CHAIN, circuit_hash,
                               compressions_for_bytes, concat_compressions,
                               hash_public_io, legacy_compressions,
                               truncate_digest)


def test_compression_formula_concat():
    for n in range(1, 17):
        assert concat_compressions(n) == n // 2 + 1


def test_compression_formula_legacy():
    for n in range(1, 17):
        assert legacy_compressions(n) == 2 * n


def test_single_call_block_counts():
    assert compressions_for_bytes(32) == 1   # one padded block
    assert compressions_for_bytes(64) == 2   # payload fills a block, padding adds one
    assert compressions_for_bytes(55) == 1
    assert compressions_for_bytes(56) == 2


def test_host_concat_matches_hashlib():
    rng = random.Random(5)
    values = [rng.getrandbits(250) for _ in range(4)]
    digest, comps = hash_public_io(values, DEFAULT_FIELD, CONCAT)
    raw = hashlib.sha256(b"".join(v.to_bytes(32, "big") for v in values)).digest()
    assert digest == truncate_digest(raw, DEFAULT_FIELD)
    assert comps == 3


def test_host_legacy_chain_structure():
    rng = random.Random(6)
    values = [rng.getrandbits(250) for _ in range(3)]
    digest, comps = hash_public_io(values, DEFAULT_FIELD, LEGACY_CHAIN)
    d = b"\x00" * 32
    for v in values:
        d = hashlib.sha256(d + v.to_bytes(32, "big")).digest()
    assert digest == truncate_digest(d, DEFAULT_FIELD)
    assert comps == 6


def _circuit_digest(values, mode):
    bld = Builder(DEFAULT_FIELD)
    slot_vars = [bld.alloc_public() for _ in values]
    slot_bits = [bld.decompose(lc_of(v), 256, "slot") for v in slot_vars]
    digest_lc = circuit_hash(bld, slot_bits, DEFAULT_FIELD, mode)
    out = bld.alloc()
    bld.enforce(digest_lc, {0: 1}, lc_of(out), "digest")
    p = bld.p
    bld.hint([out], [digest_lc], lambda v: [v[0] % p])
    cs = bld.finish()
    wit = cs.generate_witness({v: val for v, val in zip(slot_vars, values)})
    assert cs.check(wit) is None
    return wit[out]


@pytest.mark.parametrize("n", list(range(1, 17)))
def test_circuit_equals_host_concat(n):
    rng = random.Random(100 + n)
    values = [rng.getrandbits(253) for _ in range(n)]
    host, _ = hash_public_io(values, DEFAULT_FIELD, CONCAT)
    assert _circuit_digest(values, CONCAT) == host


@pytest.mark.parametrize("n", (1, 2, 3))
def test_circuit_equals_host_legacy(n):
    rng = random.Random(200 + n)
    values = [rng.getrandbits(253) for _ in range(n)]
    host, _ = hash_public_io(values, DEFAULT_FIELD, LEGACY_CHAIN)
    assert _circuit_digest(values, LEGACY_CHAIN) == host
