import json
import os

import pytest

from veil.cli import main
from veil.config import ConfigError, load_config

from conftest import contract_path


@pytest.fixture
def config_env(tmp_path, monkeypatch):
    """Redirect every configuration layer into the sandbox."""
    site = tmp_path / "site.json"
    user = tmp_path / "user.json"
    local = tmp_path / "local.json"
    monkeypatch.setenv("VEIL_SITE_CONFIG", str(site))
    monkeypatch.setenv("VEIL_USER_CONFIG", str(user))
    monkeypatch.setenv("VEIL_DATA_DIR", str(tmp_path / "data"))
    monkeypatch.setenv("VEIL_CHAIN_FILE", str(tmp_path / "chain.json"))
    monkeypatch.chdir(tmp_path)
    return {"site": site, "user": user, "local": local}


def write(path, data):
    with open(path, "w") as f:
        json.dump(data, f)


def test_defaults(config_env):
    cfg = load_config()
    assert cfg.crypto_backend == "dummy"
    assert cfg.hash_mode == "concat"
    assert cfg.hash_threshold == 10
    assert cfg.prime == "bn254"


@pytest.mark.parametrize("setting,values", [
    ("crypto_backend", ["dh-arx", "dummy", "dh-arx", "dummy"]),
    ("hash_threshold", [3, 5, 7, 9]),
    ("hash_mode", ["legacy-chain", "concat", "legacy-chain", "concat"]),
    ("prime", ["t64", "bn254", "t64", "bn254"]),
])
def test_layering_matrix(config_env, setting, values):
    """Each later layer wins for every setting: site < user < local < flags."""
    site_v, user_v, local_v, flag_v = values
    write(config_env["site"], {setting: site_v})
    assert getattr(load_config(), setting) == site_v
    write(config_env["user"], {setting: user_v})
    assert getattr(load_config(), setting) == user_v
    write(config_env["local"], {setting: local_v})
    cfg = load_config(local_path=str(config_env["local"]))
    assert getattr(cfg, setting) == local_v
    cfg = load_config({setting: flag_v}, local_path=str(config_env["local"]))
    assert getattr(cfg, setting) == flag_v


def test_local_file_in_working_directory(config_env):
    write("veil.config.json", {"hash_threshold": 2})
    assert load_config().hash_threshold == 2


def test_unknown_setting_rejected(config_env):
    write(config_env["user"], {"no_such_setting": 1})
    with pytest.raises(ConfigError):
        load_config()


def test_dummy_requires_local_chain(config_env):
    write(config_env["user"], {"chain_backend": "http"})
    with pytest.raises(ConfigError) as err:
        load_config()
    assert "dummy" in str(err.value)
    # a non-dummy backend may target other chains (they fail later, not here)
    write(config_env["user"], {"chain_backend": "http",
                               "crypto_backend": "dh-arx"})
    assert load_config().chain_backend == "http"
    # and dummy with the mock chain is allowed
    write(config_env["user"], {"chain_backend": "mock"})
    assert load_config().crypto_backend == "dummy"


def test_invalid_values_rejected(config_env):
    with pytest.raises(ConfigError):
        load_config({"hash_mode": "bogus"})
    with pytest.raises(ConfigError):
        load_config({"prime": "p999"})
    with pytest.raises(ConfigError):
        load_config({"hash_threshold": -1})


# --- cli ------------------------------------------------------------------------


def test_cli_check_ok(config_env, capsys):
    assert main(["check", contract_path("token")]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_check_errors_exit_1(config_env, tmp_path, capsys):
    bad = tmp_path / "bad.zkay"
    bad.write_text("contract C { uint@me x; function f() public "
                   "{ uint y = x; } }")
    assert main(["check", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "error:" in err and "bad.zkay:1:" in err


def test_cli_solify_output(config_env, capsys):
    assert main(["solify", contract_path("token")]) == 0
    out = capsys.readouterr().out
    assert "@" not in out
    assert len(out) == len(open(contract_path("token")).read())


def test_cli_usage_exit_64(config_env):
    assert main([]) == 64
    assert main(["frobnicate"]) == 64


def test_cli_compile_deploy_connect_run(config_env, tmp_path, capsys, monkeypatch):
    build = str(tmp_path / "build")
    assert main(["compile", contract_path("token"), "-o", build]) == 0
    listing = sorted(os.listdir(build))
    assert "contract.sol" in listing and "manifest.json" in listing
    assert main(["deploy-pki"]) == 0
    pki_addr = capsys.readouterr().out.strip().splitlines()[-1]
    assert pki_addr.startswith("0x")
    assert main(["deploy", build, "--account", "alice"]) == 0
    address = capsys.readouterr().out.strip().splitlines()[-1]
    assert address.startswith("0x")

    feed = iter(["call register()", "call buy(7)", "state balance[me]", "exit"])
    monkeypatch.setattr("builtins.input", lambda prompt="": next(feed))
    assert main(["connect", build, address, "--account", "alice"]) == 0
    out = capsys.readouterr().out
    assert "balance[me] = 7" in out


def test_cli_connect_tampered_exit_4(config_env, tmp_path, capsys, monkeypatch):
    build = str(tmp_path / "build")
    main(["compile", contract_path("token"), "-o", build])
    main(["deploy-pki"])
    main(["deploy", build, "--account", "alice"])
    address = capsys.readouterr().out.strip().splitlines()[-1]
    # tamper the recorded digest in the chain state file
    chain_file = os.environ["VEIL_CHAIN_FILE"]
    with open(chain_file) as f:
        state = json.load(f)
    rec = state["contracts"][str(int(address, 16))]
    rec["instance_digest"] = ("0" if rec["instance_digest"][0] != "0" else "1") \
        + rec["instance_digest"][1:]
    with open(chain_file, "w") as f:
        json.dump(state, f)
    assert main(["connect", build, address, "--account", "alice"]) == 4


def test_cli_export_import(config_env, tmp_path, capsys):
    build = str(tmp_path / "build")
    main(["compile", contract_path("token"), "-o", build])
    archive = str(tmp_path / "token.zkp")
    assert main(["export", build, archive]) == 0
    assert os.path.exists(archive)
    target = str(tmp_path / "imported")
    assert main(["import", archive, target]) == 0
    assert os.path.exists(os.path.join(target, "manifest.json"))


def test_cli_run_deploys_fresh(config_env, tmp_path, capsys, monkeypatch):
    build = str(tmp_path / "build")
    main(["compile", contract_path("token"), "-o", build])
    main(["deploy-pki"])
    capsys.readouterr()
    feed = iter(["exit"])
    monkeypatch.setattr("builtins.input", lambda prompt="": next(feed))
    assert main(["run", build, "--account", "alice"]) == 0
    assert "deployed fresh instance" in capsys.readouterr().out
