"""Command-line interface.

Subcommands: check, solify, compile, export, import, deploy-pki, deploy,
connect, run.  Exit codes: 0 ok, 1 diagnostic errors, 2 require failure,
3 verification failure, 4 integrity failure, 64 usage.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from .chain import ChainError, MockChain
from .compiler import (ArtifactError, BuildSettings, compile_source,
                       load_artifact)
from .config import Config, ConfigError, load_config
from .emit import ArchiveError, export_archive, import_archive
from .field import field_by_name
from .interpreter import RequireException, VerificationFailed
from .parser import parse
from .proving import ProvingError
from .source import CompileError, SourceFile, render_all
from .solify import solify
from . import runtime

EXIT_USAGE = 64


def build_parser() -> argparse.ArgumentParser:
    # the shared options are accepted both before and after the subcommand;
    # SUPPRESS defaults keep the subparser from clobbering values parsed at
    # the top level
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="path to a local configuration file")
    common.add_argument("--crypto-backend", dest="crypto_backend",
                        help="encryption backend (dummy, dh-arx)")
    common.add_argument("--hash-threshold", dest="hash_threshold", type=int,
                        help="public input count above which inputs are hashed")
    common.add_argument("--hash-mode", dest="hash_mode",
                        help="public input hashing construction "
                             "(concat, legacy-chain)")
    common.add_argument("--prime", help="field prime id (bn254, t64)")
    common.add_argument("--chain-file", dest="chain_file",
                        help="mock chain state file")
    common.add_argument("--data-dir", dest="data_dir", help="key/data directory")
    common.add_argument("--trace", action="store_const", const=True,
                        help="print each simulated step (writes a sensitive "
                             "witness log)")
    p = argparse.ArgumentParser(prog="veil", parents=[common],
                                description="compiler and runtime for "
                                            "privacy-annotated contracts")
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("check", parents=[common],
                       help="run the static checks on a contract")
    c.add_argument("file")

    s = sub.add_parser("solify", parents=[common],
                       help="strip privacy features, print plain "
                            "Solidity-compatible text")
    s.add_argument("file")

    comp = sub.add_parser("compile", parents=[common], help="compile a contract")
    comp.add_argument("file")
    comp.add_argument("-o", "--output", default=None,
                      help="output directory (default: <file>_out)")

    exp = sub.add_parser("export", parents=[common],
                         help="bundle a compiled directory into a .zkp archive")
    exp.add_argument("build_dir")
    exp.add_argument("archive")

    imp = sub.add_parser("import", parents=[common], help="import a .zkp archive")
    imp.add_argument("archive")
    imp.add_argument("target_dir")

    sub.add_parser("deploy-pki", parents=[common], help="deploy the PKI contract")

    d = sub.add_parser("deploy", parents=[common], help="deploy a compiled contract")
    d.add_argument("build_dir")
    d.add_argument("args", nargs="*", help="constructor arguments")
    d.add_argument("--account", default="default")
    d.add_argument("--value", type=int, default=0)

    co = sub.add_parser("connect", parents=[common],
                        help="connect to a deployed contract and open the "
                             "interactive shell")
    co.add_argument("build_dir")
    co.add_argument("address")
    co.add_argument("--account", default="default")

    r = sub.add_parser("run", parents=[common],
                       help="deploy to a fresh instance (or connect with "
                            "--address) and open the shell")
    r.add_argument("build_dir")
    r.add_argument("--address", default=None)
    r.add_argument("--account", default="default")
    return p


def _load_chain(cfg: Config) -> MockChain:
    field = field_by_name(cfg.prime)
    path = cfg.resolved_chain_file()
    if os.path.exists(path):
        return MockChain.load(path, field)
    return MockChain(field)


def _save_chain(cfg: Config, chain: MockChain):
    chain.save(cfg.resolved_chain_file())


def _account(cfg: Config, chain: MockChain, name: str) -> int:
    try:
        return int(name, 0)
    except ValueError:
        return chain.create_account(name)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    overrides = {k: getattr(args, k, None) for k in
                 ("crypto_backend", "hash_threshold", "hash_mode", "prime",
                  "chain_file", "data_dir", "trace")}
    try:
        cfg = load_config(overrides, local_path=getattr(args, "config", None))
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return dispatch(args, cfg)
    except CompileError as e:
        print(render_all(e.diagnostics, e.source) if e.source else str(e),
              file=sys.stderr)
        return runtime.EXIT_DIAGNOSTIC
    except (ArtifactError, ArchiveError, ChainError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return runtime.EXIT_DIAGNOSTIC
    except RequireException as e:
        print(f"require failed: {e}", file=sys.stderr)
        return runtime.EXIT_REQUIRE
    except (VerificationFailed, ProvingError) as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return runtime.EXIT_VERIFICATION
    except runtime.IntegrityError as e:
        print(f"integrity check failed: {e.mismatch}", file=sys.stderr)
        return runtime.EXIT_INTEGRITY


def dispatch(args, cfg: Config) -> int:
    cmd = args.command
    if cmd == "check":
        source = SourceFile.load(args.file)
        from .analysis import analyze
        tast = analyze(source, parse(source))
        warnings = [d for d in tast.diagnostics if d.severity == "warning"]
        if warnings:
            print(render_all(warnings, source), file=sys.stderr)
        print(f"{args.file}: ok")
        return 0
    if cmd == "solify":
        source = SourceFile.load(args.file)
        sys.stdout.write(solify(source))
        return 0
    if cmd == "compile":
        source = SourceFile.load(args.file)
        out_dir = args.output or (os.path.splitext(args.file)[0] + "_out")
        settings = BuildSettings.from_config(cfg)
        artifact = compile_source(source, settings, output_dir=out_dir)
        print(f"compiled {args.file} -> {out_dir} "
              f"({len(artifact.lowered)} circuit(s), "
              f"{artifact.keygen_generated} generated, "
              f"{artifact.keygen_reused} reused key pair(s))")
        return 0
    if cmd == "export":
        archive = args.archive
        if not archive.endswith(".zkp"):
            archive += ".zkp"
        export_archive(args.build_dir, archive)
        print(f"exported {args.build_dir} -> {archive}")
        return 0
    if cmd == "import":
        manifest = import_archive(args.archive, args.target_dir)
        # recompiling validates the manifest digests and regenerates the
        # emitted artifacts from source plus cached keys
        load_artifact(args.target_dir)
        print(f"imported {args.archive} -> {args.target_dir} "
              f"(contract {manifest['contract']})")
        return 0

    chain = _load_chain(cfg)
    data_dir = cfg.resolved_data_dir()
    if cmd == "deploy-pki":
        from .emit import emit_pki_contract
        addr = chain.deploy_pki(cfg.crypto_backend,
                                emit_pki_contract(cfg.crypto_backend))
        _save_chain(cfg, chain)
        print(f"{addr:#042x}")
        return 0
    if cmd == "deploy":
        artifact = load_artifact(args.build_dir)
        account = _account(cfg, chain, args.account)
        ctor_args = [int(a, 0) for a in args.args]
        address, receipt = runtime.deploy(artifact, chain, account, ctor_args,
                                          value=args.value, data_dir=data_dir,
                                          trace=cfg.trace)
        if not receipt.success:
            print(f"deployment reverted: {receipt.revert_reason}", file=sys.stderr)
            return runtime.EXIT_REQUIRE
        _save_chain(cfg, chain)
        print(f"{address:#042x}")
        return 0
    if cmd == "connect":
        artifact = load_artifact(args.build_dir)
        account = _account(cfg, chain, args.account)
        iface = runtime.connect(artifact, chain, int(args.address, 0), account,
                                data_dir=data_dir, trace=cfg.trace)
        runtime.repl(iface)
        _save_chain(cfg, chain)
        return 0
    if cmd == "run":
        artifact = load_artifact(args.build_dir)
        account = _account(cfg, chain, args.account)
        if args.address:
            iface = runtime.connect(artifact, chain, int(args.address, 0),
                                    account, data_dir=data_dir, trace=cfg.trace)
        else:
            address, receipt = runtime.deploy(artifact, chain, account, [],
                                              data_dir=data_dir, trace=cfg.trace)
            if not receipt.success:
                print(f"deployment reverted: {receipt.revert_reason}",
                      file=sys.stderr)
                return runtime.EXIT_REQUIRE
            print(f"deployed fresh instance at {address:#042x}")
            iface = runtime.connect(artifact, chain, address, account,
                                    data_dir=data_dir, trace=cfg.trace)
        runtime.repl(iface)
        _save_chain(cfg, chain)
        return 0
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
