"""Serialized session documents.

JSON is the machine-normative format; csv holds the per-block table and
text prints a block-by-block trace. Documents carry no timestamps, so the
same flags and seed always produce byte-identical output. The private
section (operations, outcomes, messages, decodes) is clearly segregated
from the public transcript; an analyzer must only ever read the public
parts.
"""
from __future__ import annotations

import csv
import io
import json

from . import __version__
from .channel import Announcement, AnnouncementKind
from .protocol import (
    BlockRecord,
    MessageBits,
    SessionConfig,
    SessionMode,
    SessionResult,
    SilentFallback,
    Transcript,
    replay,
)
from .quantum import BellLabel, PauliCode
from .swap import SwapOutcome

TOOL = {"name": "swapcomm", "version": __version__}


def _message_field(message: MessageBits | None) -> str | None:
    return message.declared_bits if message is not None else None


def _session_section(config: SessionConfig, transcript: Transcript) -> dict:
    return {
        "id": transcript.session_id,
        "n_pairs": transcript.n_pairs,
        "usable_blocks": transcript.usable_blocks,
        "idle_final_pair": transcript.n_pairs % 2 == 1,
        "mode": transcript.mode.value,
        "fallback": transcript.fallback.value,
        "seed": config.seed,
        "alice_declared_length": transcript.alice_declared_length,
        "bob_declared_length": transcript.bob_declared_length,
    }


def _block_row(rec: BlockRecord) -> dict:
    return {
        "index": rec.index,
        "op_a": rec.op_a.name if rec.op_a is not None else None,
        "op_b": rec.op_b.name if rec.op_b is not None else None,
        "outcome_a": rec.outcome.a_side.value,
        "outcome_b": rec.outcome.b_side.value,
        "announced_a": rec.announced_a,
        "announced_b": rec.announced_b,
    }


def _decode_ok(decoded: MessageBits | None, sent: MessageBits | None) -> bool | None:
    if decoded is None or sent is None:
        return None
    return decoded.declared_bits == sent.declared_bits


def run_document(config: SessionConfig, result: SessionResult) -> dict:
    t = result.transcript
    measurement_count = sum(
        1 for ann in t.announcements if ann.kind is AnnouncementKind.MEASUREMENT
    )
    return {
        "tool": dict(TOOL),
        "kind": "session-run",
        "session": _session_section(config, t),
        "transcript": t.wire_lines(),
        "private": {
            "alice_message": _message_field(config.alice_message),
            "bob_message": _message_field(config.bob_message),
            "blocks": [_block_row(rec) for rec in result.blocks],
            "decoded_by_alice": _message_field(result.decoded_by_alice),
            "decoded_by_bob": _message_field(result.decoded_by_bob),
        },
        "summary": {
            "announcements": len(t.announcements),
            "measurement_announcements": measurement_count,
            "decode_ok_alice": _decode_ok(result.decoded_by_alice, config.bob_message),
            "decode_ok_bob": _decode_ok(result.decoded_by_bob, config.alice_message),
        },
    }


def transcript_from_document(doc: dict) -> Transcript:
    """Rebuild the public transcript; reads only the public sections."""
    try:
        session = doc["session"]
        lines = doc["transcript"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"not a transcript document: missing {exc}") from exc
    announcements = tuple(Announcement.from_wire(line) for line in lines)
    return Transcript(
        session_id=session["id"],
        n_pairs=session["n_pairs"],
        mode=SessionMode(session["mode"]),
        fallback=SilentFallback(session["fallback"]),
        alice_declared_length=session["alice_declared_length"],
        bob_declared_length=session["bob_declared_length"],
        announcements=announcements,
    )


def _blocks_from_document(doc: dict) -> tuple[BlockRecord, ...]:
    rows = doc["private"]["blocks"]
    records = []
    for row in rows:
        records.append(BlockRecord(
            index=row["index"],
            op_a=PauliCode[row["op_a"]] if row["op_a"] is not None else None,
            op_b=PauliCode[row["op_b"]] if row["op_b"] is not None else None,
            outcome=SwapOutcome(
                BellLabel(row["outcome_a"]), BellLabel(row["outcome_b"])
            ),
            announced_a=row["announced_a"],
            announced_b=row["announced_b"],
        ))
    return tuple(records)


def replay_document(doc: dict) -> SessionResult:
    """Re-derive the decoded messages recorded in a session document."""
    if doc.get("kind") != "session-run":
        raise ValueError(f"cannot replay a {doc.get('kind')!r} document")
    return replay(transcript_from_document(doc), _blocks_from_document(doc))


def render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def render_csv(doc: dict) -> str:
    """Per-block table; private columns, so only for session-run documents."""
    if doc.get("kind") != "session-run":
        raise ValueError("csv format applies to session-run documents only")
    out = io.StringIO()
    fields = ["index", "op_a", "op_b", "outcome_a", "outcome_b",
              "announced_a", "announced_b"]
    writer = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in doc["private"]["blocks"]:
        writer.writerow(row)
    return out.getvalue()


def render_text(doc: dict) -> str:
    """Block-by-block trace of a session run."""
    if doc.get("kind") != "session-run":
        raise ValueError("text format applies to session-run documents only")
    s = doc["session"]
    p = doc["private"]
    lines = [
        f"session {s['id']}  mode={s['mode']}  fallback={s['fallback']}  "
        f"pairs={s['n_pairs']}  seed={s['seed']}",
        f"blocks: {s['usable_blocks']}"
        + ("  (final odd pair idle)" if s["idle_final_pair"] else ""),
    ]
    if p["alice_message"] is not None:
        lines.append(f"alice sends: {p['alice_message'] or '(empty)'}")
    if p["bob_message"] is not None:
        lines.append(f"bob sends:   {p['bob_message'] or '(empty)'}")
    for row in p["blocks"]:
        k = row["index"]
        ops = (f"ops A={row['op_a'] or '--'} B={row['op_b'] or '--'}").lower()
        announced = ",".join(
            side for side, on in (("A", row["announced_a"]), ("B", row["announced_b"]))
            if on
        ) or "none"
        lines.append(
            f"block {k}: pairs ({2 * k - 1},{2 * k})  {ops}  "
            f"measured A={row['outcome_a']} B={row['outcome_b']}  announced {announced}"
        )
    if p["decoded_by_alice"] is not None:
        lines.append(f"decoded by alice: {p['decoded_by_alice'] or '(empty)'}")
    if p["decoded_by_bob"] is not None:
        lines.append(f"decoded by bob:   {p['decoded_by_bob'] or '(empty)'}")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "text": render_text}


def render(doc: dict, fmt: str) -> str:
    try:
        return RENDERERS[fmt](doc)
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}") from None


def load_document(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
