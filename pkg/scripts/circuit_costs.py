#!/usr/bin/env python3
"""Print constraint counts and gas-proxy costs for the test corpus across
backends and hashing settings.

    python scripts/circuit_costs.py
"""
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from veil.chain import GAS_PER_COMPRESSION, GAS_PER_SLOT, GAS_PER_VERIFICATION
from veil.compiler import BuildSettings, compile_source
from veil.source import SourceFile

CONTRACTS = ("token", "reveal", "privif", "nested", "zeroinit", "shortcircuit")
DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "contracts")


def gas(vk):
    slots = 1 if vk.hashing_active else vk.n_in + vk.n_out
    return (GAS_PER_SLOT * slots + GAS_PER_COMPRESSION * vk.hash_compressions
            + GAS_PER_VERIFICATION)


def main():
    settings = [
        ("dummy", BuildSettings()),
        ("dummy+hash", BuildSettings(hash_threshold=0)),
        ("dh-arx", BuildSettings(crypto_backend="dh-arx", hash_threshold=999)),
    ]
    print(f"{'contract':<14}{'backend':<13}{'circuit':<22}"
          f"{'constraints':>12}{'pub slots':>10}{'gas':>9}")
    for name in CONTRACTS:
        source = SourceFile.load(os.path.join(DIR, f"{name}.zkay"))
        for label, s in settings:
            artifact = compile_source(source, s)
            for cname, lowered in sorted(artifact.lowered.items()):
                vk = artifact.keys[cname].verifier
                print(f"{name:<14}{label:<13}{cname:<22}"
                      f"{len(lowered.cs.constraints):>12}"
                      f"{lowered.in_total + lowered.out_total:>10}"
                      f"{gas(vk):>9}")


if __name__ == "__main__":
    main()
