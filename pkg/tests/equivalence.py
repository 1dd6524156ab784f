"""Harness comparing the transformed system against the plaintext reference
interpreter over random transaction sequences.

Owner discipline: state variables annotated @me belong to whoever wrote them
last, so sequences touching such variables stay within one account; mappings
tagged by their key are safe for multiple accounts.  The harness tracks the
last successful writer of every private variable so it can decrypt final
state with the right keys.
"""
import random

from veil.crypto import is_zero_cipher
from veil.lang import MappingType
from veil.parser import parse
from veil.source import SourceFile
from veil import runtime

from reference import Env, PlainContract, RefRevert

# per-contract transaction generators: (function, argument generator, accounts)
SUITE_OPS = {
    "token": {
        "multi_account": True,
        "ops": [
            ("register", lambda rng: []),
            ("buy", lambda rng: [rng.randrange(0, 1 << 32)]),
            ("buy", lambda rng: [rng.randrange(0, 50)]),
        ],
    },
    "reveal": {
        "multi_account": False,
        "ops": [
            ("put", lambda rng: [rng.randrange(0, 1 << 32)]),
            ("open", lambda rng: []),
        ],
    },
    "privif": {
        "multi_account": False,
        "ops": [
            ("bump", lambda rng: [rng.randrange(0, 1 << 16), rng.randrange(2)]),
            ("drain", lambda rng: []),
        ],
    },
    "nested": {
        "multi_account": False,
        "ops": [
            ("f", lambda rng: [rng.randrange(0, 1 << 16)]),
        ],
    },
    "zeroinit": {
        "multi_account": False,
        "ops": [
            ("touch", lambda rng: []),
            ("show", lambda rng: []),
        ],
    },
}


def run_sequence(world, source_text: str, name: str, seed: int,
                 max_len: int = 10):
    """One random transaction sequence on both systems; returns the number of
    transactions executed.  Raises AssertionError on any divergence."""
    rng = random.Random(f"{name}/{seed}")
    spec = SUITE_OPS[name]
    contract = parse(SourceFile(f"{name}.zkay", source_text))
    ref = PlainContract(contract)
    ref.deploy(Env(sender=world.accounts[0]), [])
    owner_map = {}
    n_accounts = len(world.accounts) if spec["multi_account"] else 1
    length = rng.randrange(1, max_len + 1)
    for _ in range(length):
        acct_idx = rng.randrange(n_accounts)
        fn, arggen = spec["ops"][rng.randrange(len(spec["ops"]))]
        args = arggen(rng)
        receipt = world.iface(acct_idx).call(fn, args)
        env = Env(sender=world.accounts[acct_idx])
        try:
            ref.call(fn, env, list(args))
            ref_ok = True
        except RefRevert:
            ref_ok = False
        assert receipt.success == ref_ok, \
            f"{name}/{seed}: outcome diverged on {fn}{args}: " \
            f"chain={receipt.success} ({receipt.revert_reason}) ref={ref_ok}"
        if receipt.success:
            for var in receipt.state_diff:
                owner_map[var] = world.accounts[acct_idx]
    compare_final_state(world, ref, owner_map)
    return length


def compare_final_state(world, ref: PlainContract, owner_map):
    artifact = world.artifact
    tast = artifact.tc.tast
    storage = world.chain.storage_of(world.address)
    backend = artifact.backend

    def keys_for(account):
        return runtime.account_keys(world.data_dir, backend, account,
                                    world.chain, announce=False)

    def decrypt(cipher, account):
        plain, _ = backend.dec(tuple(cipher), keys_for(account))
        return plain

    for name, info in tast.state.items():
        dtype = info.atype.dtype
        label = info.atype.label
        if isinstance(dtype, MappingType):
            entries = storage.get(name, {}) or {}
            ref_entries = ref.state.get(name, {}) or {}
            value_label = dtype.value.label
            for key in sorted(set(entries) | set(ref_entries)):
                ref_val = ref_entries.get(key)
                expect = ref_val.pattern if ref_val is not None else 0
                have = entries.get(key)
                if value_label.is_public:
                    got = have or 0
                elif dtype.tag is not None:
                    got = decrypt(have, key) if have is not None and \
                        not is_zero_cipher(tuple(have)) else 0
                else:
                    owner = owner_map.get(name)
                    got = decrypt(have, owner) if have is not None and \
                        owner is not None else 0
                assert got == expect, \
                    f"{name}[{key}]: decrypted {got} != reference {expect}"
        else:
            ref_val = ref.state.get(name)
            expect = ref_val.pattern if ref_val is not None else 0
            have = storage.get(name)
            if label.is_public:
                got = have or 0
            else:
                if have is None or is_zero_cipher(tuple(have)):
                    got = 0
                else:
                    owner = owner_map.get(name, world.accounts[0])
                    got = decrypt(have, owner)
            assert got == expect, f"{name}: decrypted {got} != reference {expect}"
