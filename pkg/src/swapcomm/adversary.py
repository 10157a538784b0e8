"""Transcript-only eavesdropper analysis.

The eavesdropper holds no photons; her entire view is the public
announcement transcript. This module turns that qualitative setting into
computed information measures: exact Bayesian posteriors over the parties'
operation pairs given the announcements, Shannon entropies, and mutual
information between the view and the operations, per block and per session.

The channel model is analytic, not sampled. Given operations with
composite label L, the announced outcome pair is uniform over the four
outcomes of L's column, so

    P(announcements | ops) = 1/4   if the outcome lies in the column,
                             0     otherwise,

and marginals follow by summing the unannounced side out. Every a-side
label occurs exactly once in every column, which is why a single side's
announcement carries no information at all: its likelihood is 1/4 under
every operation pair.

Mutual information here is the standard discrete definition,

    I(V; X) = sum_{v,x} P(v,x) log2( P(v,x) / (P(v) P(x)) ),

computed over the finite view and operation spaces. With uniform
independent priors this gives I = 0 bits for either party's marginal under
any announcement pattern, and 2 bits for the joint pair when both sides
announce: the transcript reveals the composite label and nothing more.
Non-uniform priors are supported because skewed or correlated message
statistics change what the composite reveals; the report measures that
instead of asserting blanket security.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .protocol import Transcript
from .quantum import BellLabel, PauliCode
from .swap import ENCODING_ORDER, generate_decode_table

OpPair = tuple[PauliCode, PauliCode]

ALL_OP_PAIRS: tuple[OpPair, ...] = tuple(itertools.product(PauliCode, PauliCode))

_LABEL_INDEX: dict[BellLabel, int] = {lab: i for i, lab in enumerate(ENCODING_ORDER)}

# Announcement patterns a block can show.
PATTERN_BOTH = "both"
PATTERN_A_ONLY = "a-only"
PATTERN_B_ONLY = "b-only"
PATTERN_NONE = "none"


def uniform_priors() -> dict[OpPair, float]:
    """Independent uniform operations on both sides: 1/16 per pair."""
    return {pair: 1.0 / 16.0 for pair in ALL_OP_PAIRS}


def independent_priors(
    alice: Mapping[PauliCode, float], bob: Mapping[PauliCode, float]
) -> dict[OpPair, float]:
    """Product prior from per-party operation distributions."""
    return {
        (a, b): alice.get(a, 0.0) * bob.get(b, 0.0) for a, b in ALL_OP_PAIRS
    }


def point_prior(op_a: PauliCode, op_b: PauliCode) -> dict[OpPair, float]:
    return {pair: 1.0 if pair == (op_a, op_b) else 0.0 for pair in ALL_OP_PAIRS}


def _validate_priors(priors: Mapping[OpPair, float]) -> np.ndarray:
    """Priors as a 16-vector indexed by 4*a.code + b.code."""
    vec = np.zeros(16)
    for pair, p in priors.items():
        if pair not in set(ALL_OP_PAIRS):
            raise ValueError(f"unknown operation pair {pair!r}")
        if p < 0:
            raise ValueError(f"negative prior for {pair!r}")
        vec[4 * pair[0].code + pair[1].code] = p
    if abs(vec.sum() - 1.0) > 1e-9:
        raise ValueError(f"priors sum to {vec.sum()!r}, not 1")
    return vec


def _column_matrix() -> np.ndarray:
    """col[a_idx, b_idx] = encoding index of the column holding that outcome."""
    table = generate_decode_table()
    col = np.zeros((4, 4), dtype=np.int64)
    for outcome, label in table.infer.items():
        col[_LABEL_INDEX[outcome.a_side], _LABEL_INDEX[outcome.b_side]] = (
            _LABEL_INDEX[label]
        )
    return col


def _composite_codes() -> np.ndarray:
    """comp[ops_index] = encoding index of the pair's composite label."""
    table = generate_decode_table()
    comp = np.zeros(16, dtype=np.int64)
    for a, b in ALL_OP_PAIRS:
        comp[4 * a.code + b.code] = _LABEL_INDEX[table.composite[(a, b)]]
    return comp


def _likelihood_matrix(pattern: str) -> np.ndarray:
    """lik[ops_index, view_index] = P(view | ops) for one block.

    View index: 4*a_idx + b_idx when both sides announce, the announced
    label's index for one side, and a single dummy view for none.
    """
    col = _column_matrix()
    comp = _composite_codes()
    if pattern == PATTERN_BOTH:
        lik = np.zeros((16, 16))
        for a_idx in range(4):
            for b_idx in range(4):
                view = 4 * a_idx + b_idx
                lik[comp == col[a_idx, b_idx], view] = 0.25
        return lik
    if pattern == PATTERN_A_ONLY:
        lik = np.zeros((16, 4))
        for a_idx in range(4):
            for b_idx in range(4):
                lik[comp == col[a_idx, b_idx], a_idx] += 0.25
        return lik
    if pattern == PATTERN_B_ONLY:
        lik = np.zeros((16, 4))
        for a_idx in range(4):
            for b_idx in range(4):
                lik[comp == col[a_idx, b_idx], b_idx] += 0.25
        return lik
    if pattern == PATTERN_NONE:
        return np.ones((16, 1))
    raise ValueError(f"unknown announcement pattern {pattern!r}")


def _entropy_bits(probs: np.ndarray) -> float:
    p = probs[probs > 0]
    return float(-(p * np.log2(p)).sum())


def _mi_bits(joint: np.ndarray) -> float:
    """MI of a joint probability matrix (rows: X, columns: V)."""
    px = joint.sum(axis=1, keepdims=True)
    pv = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    ratio = np.ones_like(joint)
    np.divide(joint, px * pv, out=ratio, where=mask)
    return float((joint[mask] * np.log2(ratio[mask])).sum())


def _pattern_information(priors_vec: np.ndarray, pattern: str) -> dict[str, float]:
    lik = _likelihood_matrix(pattern)
    joint_ops = priors_vec[:, None] * lik  # (16 ops, n_views)
    by_alice = joint_ops.reshape(4, 4, -1).sum(axis=1)
    by_bob = joint_ops.reshape(4, 4, -1).sum(axis=0)
    return {
        "mi_alice_bits": _mi_bits(by_alice),
        "mi_bob_bits": _mi_bits(by_bob),
        "mi_joint_bits": _mi_bits(joint_ops),
    }


def pattern_information(priors: Mapping[OpPair, float], pattern: str) -> dict[str, float]:
    """Analytic MI between one block's view and the operations, in bits.

    Keys: mi_alice_bits, mi_bob_bits (the marginals) and mi_joint_bits (the
    operation pair). Depends only on the announcement pattern and priors,
    never on which outcome was announced.
    """
    return _pattern_information(_validate_priors(priors), pattern)


@dataclass(frozen=True)
class EveView:
    """The eavesdropper's entire knowledge: the public transcript.

    Holds no operation codes and no private measurement records, only what
    was announced.
    """

    transcript: Transcript

    def block_announcements(self) -> list[tuple[int, BellLabel | None, BellLabel | None]]:
        a_seen = self.transcript.measurements("A")
        b_seen = self.transcript.measurements("B")
        return [
            (k, a_seen.get(k), b_seen.get(k))
            for k in range(1, self.transcript.usable_blocks + 1)
        ]


def _pattern_of(a_label: BellLabel | None, b_label: BellLabel | None) -> str:
    if a_label is not None and b_label is not None:
        return PATTERN_BOTH
    if a_label is not None:
        return PATTERN_A_ONLY
    if b_label is not None:
        return PATTERN_B_ONLY
    return PATTERN_NONE


@dataclass(frozen=True)
class BlockPosterior:
    """Exact Bayesian update for one block's announcements."""

    index: int
    announced_a: BellLabel | None
    announced_b: BellLabel | None
    pattern: str
    consistent: bool
    posterior: Mapping[OpPair, float]
    prior_entropy_bits: float
    posterior_entropy_bits: float
    mi_alice_bits: float
    mi_bob_bits: float
    mi_joint_bits: float


@dataclass(frozen=True)
class PosteriorReport:
    blocks: tuple[BlockPosterior, ...]

    @property
    def inconsistent_blocks(self) -> tuple[int, ...]:
        return tuple(b.index for b in self.blocks if not b.consistent)


def _observed_likelihood(
    a_label: BellLabel | None, b_label: BellLabel | None
) -> np.ndarray:
    """P(the observed announcement | ops) as a 16-vector."""
    pattern = _pattern_of(a_label, b_label)
    lik = _likelihood_matrix(pattern)
    if pattern == PATTERN_BOTH:
        view = 4 * _LABEL_INDEX[a_label] + _LABEL_INDEX[b_label]
    elif pattern == PATTERN_A_ONLY:
        view = _LABEL_INDEX[a_label]
    elif pattern == PATTERN_B_ONLY:
        view = _LABEL_INDEX[b_label]
    else:
        view = 0
    return lik[:, view]


def eve_posterior(view: EveView, priors: Mapping[OpPair, float]) -> PosteriorReport:
    """Exact per-block posterior over operation pairs given the transcript.

    A block whose announced outcome has zero probability under the priors
    is flagged inconsistent; its posterior is left empty rather than
    normalizing a zero vector.
    """
    priors_vec = _validate_priors(priors)
    prior_entropy = _entropy_bits(priors_vec)
    blocks = []
    for index, a_label, b_label in view.block_announcements():
        pattern = _pattern_of(a_label, b_label)
        info = _pattern_information(priors_vec, pattern)
        weighted = priors_vec * _observed_likelihood(a_label, b_label)
        evidence = float(weighted.sum())
        consistent = evidence > 0.0
        if consistent:
            post_vec = weighted / evidence
            posterior = {
                pair: float(post_vec[4 * pair[0].code + pair[1].code])
                for pair in ALL_OP_PAIRS
            }
            posterior_entropy = _entropy_bits(post_vec)
        else:
            posterior = {}
            posterior_entropy = float("nan")
        blocks.append(BlockPosterior(
            index=index,
            announced_a=a_label,
            announced_b=b_label,
            pattern=pattern,
            consistent=consistent,
            posterior=posterior,
            prior_entropy_bits=prior_entropy,
            posterior_entropy_bits=posterior_entropy,
            **info,
        ))
    return PosteriorReport(blocks=tuple(blocks))


def information_summary(
    report: PosteriorReport, priors: Mapping[OpPair, float]
) -> dict:
    """Per-block rows and session totals of the entropy and MI bookkeeping.

    Blocks are independent, so session totals are sums; inconsistent blocks
    are excluded from the posterior-entropy total and listed instead.
    """
    priors_vec = _validate_priors(priors)
    prior_entropy = _entropy_bits(priors_vec)
    per_block = [
        {
            "index": b.index,
            "pattern": b.pattern,
            "consistent": b.consistent,
            "prior_entropy_bits": b.prior_entropy_bits,
            "posterior_entropy_bits": b.posterior_entropy_bits,
            "mi_alice_bits": b.mi_alice_bits,
            "mi_bob_bits": b.mi_bob_bits,
            "mi_joint_bits": b.mi_joint_bits,
        }
        for b in report.blocks
    ]
    consistent = [b for b in report.blocks if b.consistent]
    session = {
        "blocks": len(report.blocks),
        "prior_entropy_bits": prior_entropy * len(report.blocks),
        "posterior_entropy_bits": sum(b.posterior_entropy_bits for b in consistent),
        "mi_alice_bits": sum(b.mi_alice_bits for b in report.blocks),
        "mi_bob_bits": sum(b.mi_bob_bits for b in report.blocks),
        "mi_joint_bits": sum(b.mi_joint_bits for b in report.blocks),
        "inconsistent_blocks": list(report.inconsistent_blocks),
    }
    return {"per_block": per_block, "session": session}


def estimate_mi_monte_carlo(
    priors: Mapping[OpPair, float],
    pattern: str = PATTERN_BOTH,
    n_blocks: int = 100_000,
    seed: int = 0,
) -> dict[str, float]:
    """Plug-in MI estimates from simulated blocks, for cross-checking the
    analytic values.

    Each block draws an operation pair from the priors and an outcome from
    the swapping law (a-side uniform, b-side fixed by the composite's
    column), then reduces the outcome to the given announcement pattern.
    """
    priors_vec = _validate_priors(priors)
    col = _column_matrix()
    comp = _composite_codes()
    pairing = np.zeros((4, 4), dtype=np.int64)  # (column, a_idx) -> b_idx
    for a_idx in range(4):
        for b_idx in range(4):
            pairing[col[a_idx, b_idx], a_idx] = b_idx

    rng = np.random.default_rng(seed)
    ops = rng.choice(16, size=n_blocks, p=priors_vec)
    a_idx = rng.integers(4, size=n_blocks)
    b_idx = pairing[comp[ops], a_idx]
    if pattern == PATTERN_BOTH:
        views, n_views = 4 * a_idx + b_idx, 16
    elif pattern == PATTERN_A_ONLY:
        views, n_views = a_idx, 4
    elif pattern == PATTERN_B_ONLY:
        views, n_views = b_idx, 4
    elif pattern == PATTERN_NONE:
        views, n_views = np.zeros(n_blocks, dtype=np.int64), 1
    else:
        raise ValueError(f"unknown announcement pattern {pattern!r}")

    counts = np.bincount(ops * n_views + views, minlength=16 * n_views).reshape(
        16, n_views
    )
    joint = counts / n_blocks
    by_alice = joint.reshape(4, 4, -1).sum(axis=1)
    by_bob = joint.reshape(4, 4, -1).sum(axis=0)
    return {
        "mi_alice_bits": _mi_bits(by_alice),
        "mi_bob_bits": _mi_bits(by_bob),
        "mi_joint_bits": _mi_bits(joint),
        "n_blocks": float(n_blocks),
    }
