"""Lowering-level behaviors: guard algebra by truth-table enumeration, the
zero-ciphertext rule, and the threshold switch for public-input hashing."""
import itertools

import pytest

from veil.circuits import (AbstractCircuit, BOOL_T, CEnc, CEq, CGuardPop,
                           CGuardPush, CircType, CircuitVar, KeyRef, ROLE_PRIV,
                           ROLE_PUB_IN, ROLE_PUB_OUT)
from veil.crypto import DummyBackend, backend_by_name
from veil.field import DEFAULT_FIELD
from veil.lowering import lower
from veil.sha256gadget import hash_public_io


def guarded_eq_circuit(expectations):
    """A circuit asserting x == y under a stack of guard bits."""
    c = AbstractCircuit(name="g")
    k = len(expectations)
    for i in range(k):
        c.add_var(CircuitVar(f"g{i}", ROLE_PUB_IN, BOOL_T, slot_offset=i))
    c.add_var(CircuitVar("x", ROLE_PUB_IN, CircType(8), slot_offset=k))
    c.add_var(CircuitVar("y", ROLE_PUB_IN, CircType(8), slot_offset=k + 1))
    c.own_in_slots = k + 2
    for i, expected in enumerate(expectations):
        c.stmts.append(CGuardPush(f"g{i}", expected))
    c.stmts.append(CEq("x", "y"))
    for _ in expectations:
        c.stmts.append(CGuardPop())
    c.validate()
    return c


@pytest.mark.parametrize("k", (1, 2, 3))
def test_guard_algebra_truth_table(k):
    """A constraint under guards (g1..gk) is enforced iff every gi matches
    its expected value; enumerated exhaustively for k <= 3."""
    backend = DummyBackend(DEFAULT_FIELD)
    for expectations in itertools.product((True, False), repeat=k):
        circuit = guarded_eq_circuit(list(expectations))
        lowered = lower(circuit, backend, DEFAULT_FIELD, k + 2, 0, 10 ** 6)
        for bits in itertools.product((0, 1), repeat=k):
            ins = list(bits) + [3, 7]  # x != y: violated when enforced
            wit = lowered.cs.generate_witness(
                lowered.witness_inputs(ins, [], {}))
            enforced = all(b == int(e) for b, e in zip(bits, expectations))
            satisfied = lowered.cs.check(wit) is None
            assert satisfied == (not enforced), (expectations, bits)
            # equal values always satisfy
            ins_eq = list(bits) + [7, 7]
            wit = lowered.cs.generate_witness(
                lowered.witness_inputs(ins_eq, [], {}))
            assert lowered.cs.check(wit) is None


def enc_circuit(user_provided=False, mode="enc"):
    backend = DummyBackend(DEFAULT_FIELD)
    c = AbstractCircuit(name="e")
    role_c = ROLE_PUB_OUT if mode == "enc" else ROLE_PUB_IN
    c.add_var(CircuitVar("key_me", "key", CircType(256), slot_offset=0,
                         label="me"))
    c.key_labels = ["me"]
    c.add_var(CircuitVar("cipher", role_c, None, backend.cipher_slots,
                         slot_offset=1 if mode == "dec" else 0))
    c.add_var(CircuitVar("plain", ROLE_PRIV, CircType(8)))
    c.add_var(CircuitVar("rnd", ROLE_PRIV, None))
    c.stmts.append(CEnc("plain", KeyRef("global", "me"), "rnd", "cipher",
                        mode, user_provided=user_provided))
    c.own_in_slots = 1 + (backend.cipher_slots if mode == "dec" else 0)
    c.own_out_slots = backend.cipher_slots if mode == "enc" else 0
    c.validate()
    return backend, c


def test_zero_cipher_rule_dec_mode():
    """(cipher = 0 => plain = 0) and (cipher != 0 => correct encryption)."""
    backend, circuit = enc_circuit(mode="dec")
    lowered = lower(circuit, backend, DEFAULT_FIELD, circuit.own_in_slots, 0,
                    10 ** 6)
    keys = backend.keygen(b"k")
    # all-zero stored cipher with plaintext 0: satisfied
    wit = lowered.cs.generate_witness(lowered.witness_inputs(
        [keys.pk, 0], [], {"plain": 0, "rnd": 0}))
    assert lowered.cs.check(wit) is None
    # all-zero cipher with nonzero plaintext: violated
    wit = lowered.cs.generate_witness(lowered.witness_inputs(
        [keys.pk, 0], [], {"plain": 5, "rnd": 0}))
    assert lowered.cs.check(wit) is not None
    # genuine cipher decrypts to its plaintext only
    cipher = backend.enc(9, keys.pk, keys, 0)
    wit = lowered.cs.generate_witness(lowered.witness_inputs(
        [keys.pk, cipher[0]], [], {"plain": 9, "rnd": 0}))
    assert lowered.cs.check(wit) is None
    wit = lowered.cs.generate_witness(lowered.witness_inputs(
        [keys.pk, cipher[0]], [], {"plain": 8, "rnd": 0}))
    assert lowered.cs.check(wit) is not None


def test_user_provided_cipher_never_zero():
    backend, circuit = enc_circuit(user_provided=True)
    lowered = lower(circuit, backend, DEFAULT_FIELD, 1, backend.cipher_slots,
                    10 ** 6)
    keys = backend.keygen(b"k")
    cipher = backend.enc(4, keys.pk, keys, 0)
    wit = lowered.cs.generate_witness(lowered.witness_inputs(
        [keys.pk], list(cipher), {"plain": 4, "rnd": 0}))
    assert lowered.cs.check(wit) is None
    # the reserved all-zero ciphertext is rejected even with plaintext 0
    wit = lowered.cs.generate_witness(lowered.witness_inputs(
        [keys.pk], [0], {"plain": 0, "rnd": 0}))
    assert lowered.cs.check(wit) is not None


def test_hash_public_io_threshold_switch():
    values = [1, 2, 3, 4]
    digest, comps = hash_public_io(values, DEFAULT_FIELD, threshold=4)
    assert digest is None and comps == 0  # n <= threshold: skipped
    digest, comps = hash_public_io(values, DEFAULT_FIELD, threshold=3)
    assert digest is not None and comps == 3
