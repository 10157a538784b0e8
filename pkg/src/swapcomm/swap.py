"""Entanglement-swapping correlation structure.

A block starts as |first>_{a1 b1} (x) |second>_{a2 b2}. Measuring the
(a1, a2) and (b1, b2) pairs in the Bell basis projects onto one of four
equally likely outcome pairs; which four, and with which signs, depends
only on the input labels. This module derives that structure from the
state-vector core, exposes it as lookup tables, and audits the generated
tables against the hand-transcribed reference table as printed, which is
known to carry bit-code misprints.

Register order inside a block is (a1, b1, a2, b2), so the measured pairs
are qubits (0, 2) and (1, 3).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from .quantum import (
    ATOL_OP,
    BELL_ORDER,
    BellLabel,
    PauliCode,
    PureState,
    apply_local,
    bell_state,
    state_equal_up_to_phase,
    tensor,
)

A_PAIR = (0, 2)  # qubits a1, a2
B_PAIR = (1, 3)  # qubits b1, b2

# Label order matching the two-bit encoding: the label produced by u_k
# alone sits at position k.
ENCODING_ORDER: tuple[BellLabel, ...] = (
    BellLabel.PSI_PLUS,
    BellLabel.PSI_MINUS,
    BellLabel.PHI_PLUS,
    BellLabel.PHI_MINUS,
)


class SwapOutcome(NamedTuple):
    """Joint result of the two Bell measurements in one block."""

    a_side: BellLabel  # measured on photons a1, a2
    b_side: BellLabel  # measured on photons b1, b2

    def __repr__(self) -> str:
        return f"({self.a_side.value},{self.b_side.value})"


ALL_OUTCOMES: tuple[SwapOutcome, ...] = tuple(
    SwapOutcome(a, b) for a, b in itertools.product(BELL_ORDER, BELL_ORDER)
)

ALL_OP_PAIRS: tuple[tuple[PauliCode, PauliCode], ...] = tuple(
    itertools.product(PauliCode, PauliCode)
)


class OutcomeTerm(NamedTuple):
    amplitude: complex
    probability: float


@dataclass(frozen=True)
class OutcomeDistribution:
    """Signed expansion of a Bell product in the Bell-x-Bell outcome basis.

    Signed amplitudes are retained even though measurements cannot see
    them; they allow exact term-by-term verification of the decomposition
    identities.
    """

    first: BellLabel
    second: BellLabel
    entries: Mapping[SwapOutcome, OutcomeTerm]

    def probability(self, outcome: SwapOutcome) -> float:
        return self.entries[outcome].probability

    def support(self, threshold: float = ATOL_OP) -> tuple[SwapOutcome, ...]:
        return tuple(o for o, t in self.entries.items() if t.probability > threshold)


def _bell_product_basis(a_label: BellLabel, b_label: BellLabel) -> np.ndarray:
    """4-qubit vector of |a_label>_{a1 a2} (x) |b_label>_{b1 b2}."""
    ba = bell_state(a_label).amplitudes.reshape(2, 2)
    bb = bell_state(b_label).amplitudes.reshape(2, 2)
    # indices: [x_a1, x_b1, x_a2, x_b2]
    return np.einsum("ac,bd->abcd", ba, bb).reshape(16)


def block_input_state(first: BellLabel, second: BellLabel) -> PureState:
    """|first>_{a1 b1} (x) |second>_{a2 b2} in block register order."""
    return tensor(bell_state(first), bell_state(second))


def swap_decompose(first: BellLabel, second: BellLabel) -> OutcomeDistribution:
    """Expand a Bell product in the outcome basis of the measured pairs.

    Exactly 4 of the 16 entries carry nonzero probability, 1/4 each.
    """
    state = block_input_state(first, second).amplitudes
    entries: dict[SwapOutcome, OutcomeTerm] = {}
    for outcome in ALL_OUTCOMES:
        amp = complex(np.vdot(_bell_product_basis(*outcome), state))
        entries[outcome] = OutcomeTerm(amp, abs(amp) ** 2)
    return OutcomeDistribution(first, second, entries)


@dataclass(frozen=True)
class DecodeTable:
    """Inference structure derived from the swapping algebra.

    infer maps each of the 16 outcomes (first pair fixed at PsiPlus) to the
    second pair's pre-measurement Bell state; combos maps each Bell label to
    the four operation pairs whose composite produces it; composite and
    pairing are the derived lookups the protocol uses per block. Everything
    is generated from the state-vector core, never hand-entered.
    """

    infer: Mapping[SwapOutcome, BellLabel]
    combos: Mapping[BellLabel, frozenset[tuple[PauliCode, PauliCode]]]
    composite: Mapping[tuple[PauliCode, PauliCode], BellLabel]
    pairing: Mapping[tuple[BellLabel, BellLabel], BellLabel]

    def partner_b_side(self, column: BellLabel, a_side: BellLabel) -> BellLabel:
        """The unique b-side label paired with `a_side` inside a column."""
        return self.pairing[(column, a_side)]

    def decode(self, own: PauliCode, inferred: BellLabel) -> PauliCode:
        for op_a, op_b in self.combos[inferred]:
            if op_a is own:
                return op_b
        raise KeyError((own, inferred))


def composite_label(op_a: PauliCode, op_b: PauliCode) -> BellLabel:
    """Bell label of the second pair after both parties' local operations.

    op_a acts on photon a2, op_b on photon b2 of a PsiPlus pair. Local
    encoding operations permute the Bell basis, so the result is always a
    single label up to global phase.
    """
    state = apply_local(op_b, 1, apply_local(op_a, 0, bell_state(BellLabel.PSI_PLUS)))
    for label in BELL_ORDER:
        if state_equal_up_to_phase(state, bell_state(label), 1e-9):
            return label
    raise AssertionError(f"composite of ({op_a}, {op_b}) is not a Bell state")


@lru_cache(maxsize=1)
def generate_decode_table() -> DecodeTable:
    """Build and validate the inference tables from the swapping algebra."""
    infer: dict[SwapOutcome, BellLabel] = {}
    for second in BELL_ORDER:
        for outcome in swap_decompose(BellLabel.PSI_PLUS, second).support():
            if outcome in infer:
                raise AssertionError(f"outcome {outcome} appears in two columns")
            infer[outcome] = second
    if len(infer) != 16:
        raise AssertionError("outcome columns do not cover all 16 outcomes")

    composite = {(a, b): composite_label(a, b) for a, b in ALL_OP_PAIRS}
    combos: dict[BellLabel, frozenset[tuple[PauliCode, PauliCode]]] = {}
    for label in BELL_ORDER:
        members = frozenset(pair for pair, lab in composite.items() if lab is label)
        if len(members) != 4:
            raise AssertionError(f"{label} has {len(members)} operation pairs, not 4")
        combos[label] = members

    pairing = {
        (label, outcome.a_side): outcome.b_side for outcome, label in infer.items()
    }
    if len(pairing) != 16:
        raise AssertionError("a-side labels do not appear once per column")
    return DecodeTable(infer=infer, combos=combos, composite=composite, pairing=pairing)


def infer_second_pair(outcome: SwapOutcome) -> BellLabel:
    """Second pair's pre-measurement state, first pair fixed at PsiPlus."""
    return generate_decode_table().infer[outcome]


def decode_partner(own: PauliCode, inferred: BellLabel) -> PauliCode:
    """The unique partner operation consistent with one's own operation.

    Fixing one factor makes the composite map a bijection between the
    partner's operations and the Bell labels, so this never ambiguates.
    """
    return generate_decode_table().decode(own, inferred)


# --------------------------------------------------------------------------
# Audit against the reference table as printed.
#
# The transcription below is kept verbatim, including its misprints; the
# generated tables above are authoritative and the audit reports every cell
# where the print disagrees. Each operations cell is
# ((a_index, printed_a_bits), (b_index, printed_b_bits)).
# --------------------------------------------------------------------------

_L = {"P+": BellLabel.PSI_PLUS, "P-": BellLabel.PSI_MINUS,
      "F+": BellLabel.PHI_PLUS, "F-": BellLabel.PHI_MINUS}

REFERENCE_OUTCOME_COLUMNS: tuple[tuple[SwapOutcome, ...], ...] = tuple(
    tuple(SwapOutcome(_L[a], _L[b]) for a, b in column)
    for column in (
        (("F+", "F+"), ("P-", "P-"), ("P+", "P+"), ("F-", "F-")),
        (("P-", "P+"), ("F+", "F-"), ("F-", "F+"), ("P+", "P-")),
        (("P+", "F+"), ("P-", "F-"), ("F+", "P+"), ("F-", "P-")),
        (("P+", "F-"), ("P-", "F+"), ("F+", "P-"), ("F-", "P+")),
    )
)

REFERENCE_INITIAL_STATES: tuple[tuple[BellLabel, BellLabel], ...] = (
    (_L["P+"], _L["P+"]),
    (_L["P+"], _L["P-"]),
    (_L["P+"], _L["F+"]),
    (_L["P+"], _L["F-"]),
)

REFERENCE_OPERATION_COLUMNS: tuple[
    tuple[tuple[tuple[int, str], tuple[int, str]], ...], ...
] = (
    (((0, "00"), (0, "00")), ((1, "00"), (1, "00")),
     ((2, "00"), (2, "00")), ((3, "00"), (3, "00"))),
    (((1, "01"), (0, "00")), ((0, "00"), (1, "01")),
     ((2, "10"), (3, "11")), ((3, "11"), (2, "10"))),
    (((2, "10"), (0, "00")), ((0, "00"), (2, "10")),
     ((1, "01"), (3, "11")), ((3, "11"), (1, "01"))),
    (((3, "11"), (0, "00")), ((0, "00"), (3, "11")),
     ((1, "01"), (2, "10")), ((2, "10"), (1, "01"))),
)


@dataclass(frozen=True)
class Discrepancy:
    section: str  # outcome-pairs | initial-state | operations
    column: int   # 1-based, as printed
    row: int      # 1-based within the section
    detail: str
    printed: str
    derived: str

    def to_dict(self) -> dict:
        return {
            "section": self.section,
            "column": self.column,
            "row": self.row,
            "detail": self.detail,
            "printed": self.printed,
            "derived": self.derived,
        }


@dataclass(frozen=True)
class AuditReport:
    discrepancies: tuple[Discrepancy, ...]

    def in_section(self, section: str) -> tuple[Discrepancy, ...]:
        return tuple(d for d in self.discrepancies if d.section == section)

    def flagged_cells(self, section: str) -> tuple[tuple[int, int], ...]:
        return tuple(sorted({(d.column, d.row) for d in self.in_section(section)}))

    def to_dict(self) -> dict:
        return {
            "total_discrepancies": len(self.discrepancies),
            "discrepancies": [d.to_dict() for d in self.discrepancies],
            "sections": {
                s: len(self.in_section(s))
                for s in ("outcome-pairs", "initial-state", "operations")
            },
        }


def _iter_operation_cells() -> Iterator[tuple[int, int, tuple, tuple]]:
    for col_idx, column in enumerate(REFERENCE_OPERATION_COLUMNS):
        for row_idx, cell in enumerate(column):
            yield col_idx, row_idx, cell[0], cell[1]


def audit_reference_table() -> AuditReport:
    """Compare the generated tables against the reference table as printed.

    Every disagreeing cell is reported; nothing is silently corrected.
    """
    table = generate_decode_table()
    found: list[Discrepancy] = []

    for col_idx, (printed_col, (first, second)) in enumerate(
        zip(REFERENCE_OUTCOME_COLUMNS, REFERENCE_INITIAL_STATES)
    ):
        derived = set(swap_decompose(first, second).support())
        for row_idx, outcome in enumerate(printed_col):
            if outcome not in derived:
                found.append(Discrepancy(
                    section="outcome-pairs", column=col_idx + 1, row=row_idx + 1,
                    detail="outcome pair not produced by this initial state",
                    printed=repr(outcome),
                    derived="one of " + ", ".join(sorted(map(repr, derived))),
                ))
        for outcome in printed_col:
            if outcome in derived and table.infer[outcome] is not second:
                found.append(Discrepancy(
                    section="outcome-pairs", column=col_idx + 1,
                    row=printed_col.index(outcome) + 1,
                    detail="outcome assigned to the wrong column",
                    printed=second.value, derived=table.infer[outcome].value,
                ))

    for col_idx, (first, second) in enumerate(REFERENCE_INITIAL_STATES):
        if first is not BellLabel.PSI_PLUS:
            found.append(Discrepancy(
                section="initial-state", column=col_idx + 1, row=1,
                detail="first pair is not PsiPlus",
                printed=first.value, derived=BellLabel.PSI_PLUS.value,
            ))
        derived_second = table.infer[REFERENCE_OUTCOME_COLUMNS[col_idx][0]]
        if second is not derived_second:
            found.append(Discrepancy(
                section="initial-state", column=col_idx + 1, row=1,
                detail="second pair label disagrees with the outcome column",
                printed=second.value, derived=derived_second.value,
            ))

    for col_idx, row_idx, (a_idx, a_bits), (b_idx, b_bits) in _iter_operation_cells():
        column_label = REFERENCE_INITIAL_STATES[col_idx][1]
        pair = (PauliCode(a_idx), PauliCode(b_idx))
        if pair not in table.combos[column_label]:
            found.append(Discrepancy(
                section="operations", column=col_idx + 1, row=row_idx + 1,
                detail="operation pair does not produce this column's label",
                printed=f"(u{a_idx},u{b_idx})",
                derived=table.composite[pair].value,
            ))
        for side, idx, bits in (("A", a_idx, a_bits), ("B", b_idx, b_bits)):
            canonical = PauliCode(idx).bits
            if bits != canonical:
                found.append(Discrepancy(
                    section="operations", column=col_idx + 1, row=row_idx + 1,
                    detail=f"bit-code annotation beside u{idx}^{side}",
                    printed=f"({bits})", derived=f"({canonical})",
                ))

    return AuditReport(discrepancies=tuple(found))
