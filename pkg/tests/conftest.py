import os
import random
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from veil.chain import MockChain
from veil.compiler import BuildSettings, compile_source
from veil.source import SourceFile
from veil import runtime

CONTRACT_DIR = os.path.join(os.path.dirname(__file__), "contracts")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

SUITE = ("token", "reveal", "privif", "nested", "zeroinit")


def contract_path(name: str) -> str:
    return os.path.join(CONTRACT_DIR, f"{name}.zkay")


def load_source(name: str) -> SourceFile:
    return SourceFile.load(contract_path(name))


@pytest.fixture(scope="session")
def dummy_settings():
    return BuildSettings(crypto_backend="dummy")


@pytest.fixture(scope="session")
def artifacts(dummy_settings):
    """Session-cached dummy-backend artifacts for the whole corpus."""
    names = SUITE + ("shortcircuit", "publicif", "features", "payable")
    return {name: compile_source(load_source(name), dummy_settings)
            for name in names}


@pytest.fixture(scope="session")
def hybrid_token():
    return compile_source(load_source("token"),
                          BuildSettings(crypto_backend="dh-arx",
                                        hash_threshold=64))


class World:
    """A deployed contract with funded accounts and per-account interfaces."""

    def __init__(self, artifact, tmp_path, ctor_args=(), seed=0, n_accounts=3):
        self.artifact = artifact
        self.chain = MockChain(artifact.field)
        self.data_dir = str(tmp_path / "data")
        self.accounts = [self.chain.create_account(f"acct{i}")
                         for i in range(n_accounts)]
        self.address, self.deploy_receipt = runtime.deploy(
            artifact, self.chain, self.accounts[0], list(ctor_args),
            data_dir=self.data_dir, rng=random.Random(seed))
        assert self.deploy_receipt.success, self.deploy_receipt.revert_reason
        self._ifaces = {}
        self._seed = seed

    def iface(self, account_index: int = 0) -> runtime.ContractInterface:
        if account_index not in self._ifaces:
            self._ifaces[account_index] = runtime.connect(
                self.artifact, self.chain, self.address,
                self.accounts[account_index], data_dir=self.data_dir,
                rng=random.Random(self._seed * 1000 + account_index))
        return self._ifaces[account_index]


@pytest.fixture
def world_factory(tmp_path):
    def make(artifact, ctor_args=(), seed=0, n_accounts=3):
        return World(artifact, tmp_path, ctor_args, seed, n_accounts)
    return make
