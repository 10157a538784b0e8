"""Command-line entry point.

Subcommands: simulate (run a session), table (emit the decode table and
reference audit), verify (check the algebra end to end), analyze (quantify
eavesdropper knowledge from a transcript document), serve/connect (the two
halves of a networked two-process session).

Exit codes: 0 success, 1 usage or capacity error, 2 verification failure,
3 transport or session failure. Every path is deterministic given flags
and seed. SWAPCOMM_OUT_DIR, when set, prefixes relative --out paths.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, documents
from .adversary import (
    ALL_OP_PAIRS,
    EveView,
    estimate_mi_monte_carlo,
    eve_posterior,
    information_summary,
    uniform_priors,
)
from .channel import ChannelError, FrameError, SessionListener, dial_session
from .protocol import (
    CapacityError,
    SessionConfig,
    SessionError,
    SessionMode,
    SilentFallback,
    parse_message,
    run_remote_party,
    run_session,
)
from .swap import audit_reference_table, generate_decode_table
from .verify import run_verification

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_TRANSPORT = 3

_MODES = {m.value: m for m in SessionMode}
_FALLBACKS = {f.value: f for f in SilentFallback}


class _Parser(argparse.ArgumentParser):
    # Usage errors exit 1 here; argparse's default of 2 is reserved for
    # verification failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_message(value: str):
    if value.startswith("@"):
        value = Path(value[1:]).read_text(encoding="utf-8").strip()
    return parse_message(value)


def _resolve_out(path: str | None) -> Path | None:
    if path is None:
        return None
    out = Path(path)
    base = os.environ.get("SWAPCOMM_OUT_DIR")
    if base and not out.is_absolute():
        out = Path(base) / out
    return out


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _host_port(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {value!r}")
    return host or "127.0.0.1", int(port)


def _session_flags(parser: argparse.ArgumentParser, *, alice=True, bob=True):
    parser.add_argument("--pairs", type=int, required=True,
                        help="number of pre-shared Bell pairs (N)")
    parser.add_argument("--seed", type=int, default=0, help="session seed")
    parser.add_argument("--mode", choices=sorted(_MODES), default="bidirectional")
    parser.add_argument("--fallback", choices=sorted(_FALLBACKS), default="random",
                        help="behaviour of a party with no message (unilateral modes)")
    if alice:
        parser.add_argument("--alice-msg", default=None, metavar="BITS|@FILE",
                            help="bit string, 0x-prefixed hex, or @file")
    if bob:
        parser.add_argument("--bob-msg", default=None, metavar="BITS|@FILE")
    parser.add_argument("--format", choices=sorted(documents.RENDERERS),
                        default="json")
    parser.add_argument("--out", default=None, help="output path (default stdout)")


def _config_from_args(args, *, alice_msg=None, bob_msg=None) -> SessionConfig:
    return SessionConfig(
        n_pairs=args.pairs,
        mode=_MODES[args.mode],
        fallback=_FALLBACKS[args.fallback],
        seed=args.seed,
        alice_message=alice_msg,
        bob_message=bob_msg,
    )


def _trial_seed(seed: int, trial: int) -> int:
    seq = np.random.SeedSequence(entropy=seed & ((1 << 64) - 1), spawn_key=(trial,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _run_trial(payload: tuple) -> dict:
    pairs, mode, fallback, seed, a_bits, b_bits, trial = payload
    config = SessionConfig(
        n_pairs=pairs,
        mode=_MODES[mode],
        fallback=_FALLBACKS[fallback],
        seed=_trial_seed(seed, trial),
        alice_message=parse_message(a_bits) if a_bits is not None else None,
        bob_message=parse_message(b_bits) if b_bits is not None else None,
    )
    result = run_session(config)
    doc = documents.run_document(config, result)
    return {
        "trial": trial,
        "seed": config.seed,
        "decode_ok_alice": doc["summary"]["decode_ok_alice"],
        "decode_ok_bob": doc["summary"]["decode_ok_bob"],
        "session_id": doc["session"]["id"],
    }


def _cmd_simulate(args) -> int:
    alice_msg = _read_message(args.alice_msg) if args.alice_msg is not None else None
    bob_msg = _read_message(args.bob_msg) if args.bob_msg is not None else None

    if args.trials > 1:
        payloads = [
            (args.pairs, args.mode, args.fallback, args.seed,
             args.alice_msg, args.bob_msg, t)
            for t in range(args.trials)
        ]
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                rows = list(pool.map(_run_trial, payloads))
        else:
            rows = [_run_trial(p) for p in payloads]
        ok = sum(
            1 for r in rows
            if r["decode_ok_alice"] in (True, None) and r["decode_ok_bob"] in (True, None)
        )
        doc = {
            "tool": dict(documents.TOOL),
            "kind": "simulate-trials",
            "trials": rows,
            "summary": {"trials": len(rows), "all_decodes_exact": ok == len(rows)},
        }
        _emit(documents.render_json(doc), _resolve_out(args.out))
        return EXIT_OK

    config = _config_from_args(args, alice_msg=alice_msg, bob_msg=bob_msg)
    result = run_session(config)
    doc = documents.run_document(config, result)
    _emit(documents.render(doc, args.format), _resolve_out(args.out))
    return EXIT_OK


def _cmd_table(args) -> int:
    table = generate_decode_table()
    infer_rows = [
        {
            "a_side": outcome.a_side.value,
            "b_side": outcome.b_side.value,
            "second_pair": label.value,
        }
        for outcome, label in sorted(
            table.infer.items(),
            key=lambda kv: (kv[1].value, kv[0].a_side.value, kv[0].b_side.value),
        )
    ]
    combos = {
        label.value: sorted([a.name, b.name] for a, b in pairs)
        for label, pairs in table.combos.items()
    }
    composite = {
        f"{a.name},{b.name}": table.composite[(a, b)].value for a, b in ALL_OP_PAIRS
    }
    doc = {
        "tool": dict(documents.TOOL),
        "kind": "decode-table",
        "infer": infer_rows,
        "combos": combos,
        "composite": composite,
        "audit": audit_reference_table().to_dict(),
    }
    _emit(documents.render_json(doc), _resolve_out(args.out))
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = run_verification()
    for check in report.checks:
        status = "ok" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: {check.detail}")
        for failure in check.failures:
            print(f"       {failure}")
    print(report.summary_line())
    return EXIT_OK if report.ok else EXIT_VERIFY


def _load_priors(value: str) -> dict:
    if value == "uniform":
        return uniform_priors()
    if not value.startswith("@"):
        raise ValueError(f"priors must be 'uniform' or @file, got {value!r}")
    raw = json.loads(Path(value[1:]).read_text(encoding="utf-8"))
    by_name = {f"{a.name},{b.name}": (a, b) for a, b in ALL_OP_PAIRS}
    try:
        return {by_name[key]: float(value) for key, value in raw.items()}
    except KeyError as exc:
        raise ValueError(f"unknown operation pair {exc} in priors file") from exc


def _cmd_analyze(args) -> int:
    doc = documents.load_document(args.input)
    try:
        transcript = documents.transcript_from_document(doc)
    except FrameError as exc:
        raise ValueError(f"corrupt transcript in {args.input}: {exc}") from exc
    priors = _load_priors(args.priors)
    report = eve_posterior(EveView(transcript), priors)
    summary = information_summary(report, priors)

    block_rows = []
    for block in report.blocks:
        posterior = {
            f"{a.name},{b.name}": p
            for (a, b), p in block.posterior.items()
            if p > 0.0
        }
        block_rows.append({
            "index": block.index,
            "pattern": block.pattern,
            "announced_a": block.announced_a.value if block.announced_a else None,
            "announced_b": block.announced_b.value if block.announced_b else None,
            "consistent": block.consistent,
            "posterior": posterior,
            "prior_entropy_bits": block.prior_entropy_bits,
            "posterior_entropy_bits": block.posterior_entropy_bits,
            "mi_alice_bits": block.mi_alice_bits,
            "mi_bob_bits": block.mi_bob_bits,
            "mi_joint_bits": block.mi_joint_bits,
        })
    out_doc = {
        "tool": dict(documents.TOOL),
        "kind": "posterior-report",
        "session": {
            "id": transcript.session_id,
            "n_pairs": transcript.n_pairs,
            "mode": transcript.mode.value,
            "fallback": transcript.fallback.value,
        },
        "priors": args.priors,
        "blocks": block_rows,
        "session_totals": summary["session"],
    }
    if args.mc_blocks:
        patterns = {b.pattern for b in report.blocks}
        out_doc["monte_carlo"] = {
            pattern: estimate_mi_monte_carlo(
                priors, pattern, n_blocks=args.mc_blocks, seed=args.seed
            )
            for pattern in sorted(patterns)
        }
    _emit(documents.render_json(out_doc), _resolve_out(args.out))
    return EXIT_OK


def _finish_networked(args, side: str, config: SessionConfig, result) -> None:
    doc = documents.run_document(config, result)
    doc["session"]["party"] = side
    _emit(documents.render(doc, args.format), _resolve_out(args.out))


def _cmd_serve(args) -> int:
    alice_msg = _read_message(args.alice_msg) if args.alice_msg is not None else None
    config = _config_from_args(args, alice_msg=alice_msg)
    listener = SessionListener(*args.listen, timeout=args.timeout)
    host, port = listener.address
    print(f"listening {host}:{port}", flush=True)
    try:
        substrate, endpoint = listener.accept()
        try:
            result = run_remote_party("A", config, substrate, endpoint)
        finally:
            substrate.close()
            endpoint.close()
    finally:
        listener.close()
    _finish_networked(args, "A", config, result)
    return EXIT_OK


def _cmd_connect(args) -> int:
    bob_msg = _read_message(args.bob_msg) if args.bob_msg is not None else None
    config = _config_from_args(args, bob_msg=bob_msg)
    substrate, endpoint = dial_session(*args.peer, timeout=args.timeout)
    try:
        result = run_remote_party("B", config, substrate, endpoint)
    finally:
        substrate.close()
        endpoint.close()
    _finish_networked(args, "B", config, result)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _Parser(prog="swapcomm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_sim = sub.add_parser("simulate", help="run a full session in one process")
    _session_flags(p_sim)
    p_sim.add_argument("--trials", type=int, default=1,
                       help="run this many sessions with derived seeds")
    p_sim.add_argument("--workers", type=int, default=1,
                       help="parallel workers for --trials")
    p_sim.set_defaults(func=_cmd_simulate)

    p_table = sub.add_parser("table", help="emit the decode table and audit report")
    p_table.add_argument("--out", default=None)
    p_table.set_defaults(func=_cmd_table)

    p_verify = sub.add_parser("verify", help="run the full identity-check suite")
    p_verify.set_defaults(func=_cmd_verify)

    p_an = sub.add_parser("analyze", help="eavesdropper analysis of a transcript document")
    p_an.add_argument("input", help="path to a session-run or transcript document")
    p_an.add_argument("--priors", default="uniform", metavar="uniform|@FILE")
    p_an.add_argument("--mc-blocks", type=int, default=0,
                      help="add Monte Carlo MI estimates over this many blocks")
    p_an.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    p_an.add_argument("--out", default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_serve = sub.add_parser("serve", help="host side A of a two-process session")
    p_serve.add_argument("--listen", type=_host_port, required=True, metavar="HOST:PORT")
    p_serve.add_argument("--timeout", type=float, default=30.0)
    _session_flags(p_serve, bob=False)
    p_serve.set_defaults(func=_cmd_serve)

    p_conn = sub.add_parser("connect", help="join as side B of a two-process session")
    p_conn.add_argument("--peer", type=_host_port, required=True, metavar="HOST:PORT")
    p_conn.add_argument("--timeout", type=float, default=30.0)
    _session_flags(p_conn, alice=False)
    p_conn.set_defaults(func=_cmd_connect)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"swapcomm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChannelError, SessionError) as exc:
        print(f"swapcomm: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ValueError, OSError) as exc:
        print(f"swapcomm: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
