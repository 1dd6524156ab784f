#!/usr/bin/env python3
"""End-to-end walkthrough on the mock chain: compile the private-balance
token, deploy it, run transactions from two accounts and show what each
party can (and cannot) read.

    python scripts/demo_token.py [--backend dummy|dh-arx]
"""
import argparse
import os
import random
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from veil.chain import MockChain
from veil.compiler import BuildSettings, compile_source
from veil.source import SourceFile
from veil import runtime

TOKEN = os.path.join(os.path.dirname(__file__), "..", "tests", "contracts",
                     "token.zkay")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--backend", default="dummy", choices=["dummy", "dh-arx"])
    args = ap.parse_args()

    source = SourceFile.load(TOKEN)
    print(f"compiling token.zkay with the '{args.backend}' backend ...")
    artifact = compile_source(source, BuildSettings(crypto_backend=args.backend))
    for name, lowered in artifact.lowered.items():
        print(f"  circuit {name}: {len(lowered.cs.constraints)} constraints, "
              f"{lowered.in_total}+{lowered.out_total} public slots"
              f"{' (hashed)' if lowered.hashing_active else ''}")

    chain = MockChain(artifact.field)
    alice = chain.create_account("alice")
    bob = chain.create_account("bob")
    with tempfile.TemporaryDirectory() as data_dir:
        address, receipt = runtime.deploy(artifact, chain, alice, [],
                                          data_dir=data_dir,
                                          rng=random.Random(1))
        print(f"deployed at {address:#042x}")

        a = runtime.connect(artifact, chain, address, alice,
                            data_dir=data_dir, rng=random.Random(2))
        b = runtime.connect(artifact, chain, address, bob,
                            data_dir=data_dir, rng=random.Random(3))

        for iface, who in ((a, "alice"), (b, "bob")):
            r = iface.call("register", [])
            print(f"{who}.register(): success={r.success}")
        for amount in (100, 42):
            r = a.call("buy", [amount])
            print(f"alice.buy({amount}): success={r.success} "
                  f"gas_proxy={r.gas_proxy}")
        r = b.call("buy", [7])
        print(f"bob.buy(7): success={r.success}")

        print(f"alice reads her balance:   {a.state('balance', (alice,))}")
        print(f"bob reads his balance:     {b.state('balance', (bob,))}")
        foreign = b.state("balance", (alice,))
        print(f"bob reads alice's balance: cipher{list(foreign)}")

        tx = a.simulate_call("buy", [1])
        bad = list(tx.out)
        bad[0] = (bad[0] + 1) % artifact.field.p
        r = chain.transact(address, "buy", tx.args, alice, 0, bad, tx.proof,
                           artifact)
        print(f"tampered output cipher: success={r.success} "
              f"({r.exit_kind}: {r.revert_reason})")


if __name__ == "__main__":
    main()
