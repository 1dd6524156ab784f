"""Spot checks of the transformed system against the plaintext reference
interpreter; the full 50-sequence sweeps run in the acceptance suite."""
import pytest

from equivalence import run_sequence
from conftest import SUITE, load_source


@pytest.mark.parametrize("name", SUITE)
def test_equivalence_spot(name, world_factory, artifacts):
    source = load_source(name)
    for seed in range(5):
        world = world_factory(artifacts[name], seed=seed)
        run_sequence(world, source.text, name, seed)


def test_reference_is_plaintext(artifacts):
    """The oracle stores plain values and never sees ciphertext tuples."""
    from veil.parser import parse
    from reference import Env, PlainContract
    from veil.source import SourceFile
    source = load_source("token")
    ref = PlainContract(parse(SourceFile("t", source.text)))
    ref.deploy(Env(sender=7), [])
    ref.call("register", Env(sender=7), [])
    ref.call("buy", Env(sender=7), [200])
    assert ref.state["balance"][7].pattern == 200


def test_reference_width_wrapping():
    from veil.parser import parse
    from reference import Env, PlainContract
    from veil.source import SourceFile
    ref = PlainContract(parse(SourceFile("w", """
    contract W {
        uint8 x;
        int8 y;
        function f() public {
            x = uint8(200) + uint8(100);
            y = int8(100) + int8(100);
        }
    }""")))
    ref.deploy(Env(sender=1), [])
    ref.call("f", Env(sender=1), [])
    assert ref.state["x"].pattern == 44
    assert ref.state["y"].pattern == 200  # -56 two's complement
