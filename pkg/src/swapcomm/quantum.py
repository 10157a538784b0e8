"""Dense state-vector core for 2- and 4-qubit registers.

Convention used throughout the package: qubit 0 is the most significant
bit of the computational basis index, so the amplitude of
|q0 q1 ... q_{n-1}> lives at index q0*2^(n-1) + q1*2^(n-2) + ... + q_{n-1}.
Within a protocol block the register order is (a1, b1, a2, b2).

All values are immutable after construction; operations are pure functions
plus an explicitly threaded numpy Generator where sampling is involved.
"""
from __future__ import annotations

import enum
import math

import numpy as np

# Tolerances: per-operation roundoff vs. accumulated aggregates.
ATOL_OP = 1e-12
ATOL_ACC = 1e-9

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class BellLabel(enum.Enum):
    """The four maximally entangled two-qubit states."""

    PHI_PLUS = "PhiPlus"    # (|00> + |11>)/sqrt(2)
    PHI_MINUS = "PhiMinus"  # (|00> - |11>)/sqrt(2)
    PSI_PLUS = "PsiPlus"    # (|01> + |10>)/sqrt(2)
    PSI_MINUS = "PsiMinus"  # (|01> - |10>)/sqrt(2)

    def __repr__(self) -> str:
        return self.value


# Fixed label order used wherever the four outcomes are enumerated or
# sampled; keeping one order makes every sampling path reproducible.
BELL_ORDER: tuple[BellLabel, ...] = (
    BellLabel.PHI_PLUS,
    BellLabel.PHI_MINUS,
    BellLabel.PSI_PLUS,
    BellLabel.PSI_MINUS,
)


class PauliCode(enum.Enum):
    """The four local encoding operations and their two-bit codes.

    The matrices are kept exactly as defined (U1 = |1><1| - |0><0|,
    U3 = |0><1| - |1><0|), not silently normalized to textbook Z/Y;
    the differences are global phases on Bell states and never observable.
    """

    U0 = 0  # identity,               bits 00
    U1 = 1  # |1><1| - |0><0|,        bits 01
    U2 = 2  # |0><1| + |1><0|,        bits 10
    U3 = 3  # |0><1| - |1><0|,        bits 11

    @property
    def code(self) -> int:
        return self.value

    @property
    def bits(self) -> str:
        return format(self.value, "02b")

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self]

    def __repr__(self) -> str:
        return self.name


def _frozen(rows) -> np.ndarray:
    arr = np.array(rows, dtype=np.complex128)
    arr.flags.writeable = False
    return arr


_PAULI_MATRICES: dict[PauliCode, np.ndarray] = {
    PauliCode.U0: _frozen([[1, 0], [0, 1]]),
    PauliCode.U1: _frozen([[-1, 0], [0, 1]]),
    PauliCode.U2: _frozen([[0, 1], [1, 0]]),
    PauliCode.U3: _frozen([[0, 1], [-1, 0]]),
}


class PureState:
    """Normalized complex amplitude vector over a small qubit register.

    Immutable. The constructor validates rather than normalizes: a vector
    whose squared norm is off by more than 1e-9 is a bug upstream.
    """

    __slots__ = ("amplitudes", "num_qubits")

    def __init__(self, amplitudes) -> None:
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1).copy()
        n = amps.size
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"amplitude vector length {n} is not a power of two")
        num_qubits = n.bit_length() - 1
        if num_qubits > 4:
            raise ValueError(f"register of {num_qubits} qubits exceeds the 4-qubit maximum")
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise ValueError("amplitudes must be finite")
        sq_norm = float(np.vdot(amps, amps).real)
        if abs(sq_norm - 1.0) > ATOL_ACC:
            raise ValueError(f"state is not normalized: squared norm {sq_norm!r}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "num_qubits", num_qubits)

    def __setattr__(self, name, value):
        raise AttributeError("PureState is immutable")

    def __repr__(self) -> str:
        terms = []
        for idx, amp in enumerate(self.amplitudes):
            if abs(amp) > 1e-9:
                terms.append(f"({amp:.3g})|{idx:0{self.num_qubits}b}>")
        return " + ".join(terms) or "0"


def basis_state(bits: str) -> PureState:
    """The computational basis state |bits>, e.g. basis_state('01')."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"invalid basis label {bits!r}")
    amps = np.zeros(2 ** len(bits), dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return PureState(amps)


_BELL_AMPLITUDES: dict[BellLabel, np.ndarray] = {
    BellLabel.PHI_PLUS: _frozen([_INV_SQRT2, 0, 0, _INV_SQRT2]),
    BellLabel.PHI_MINUS: _frozen([_INV_SQRT2, 0, 0, -_INV_SQRT2]),
    BellLabel.PSI_PLUS: _frozen([0, _INV_SQRT2, _INV_SQRT2, 0]),
    BellLabel.PSI_MINUS: _frozen([0, _INV_SQRT2, -_INV_SQRT2, 0]),
}


def bell_state(label: BellLabel) -> PureState:
    """The canonical normalized two-qubit state for a Bell label."""
    return PureState(_BELL_AMPLITUDES[label])


def tensor(left: PureState, right: PureState) -> PureState:
    """Tensor product; qubit indices of `right` are offset by left.num_qubits."""
    if left.num_qubits + right.num_qubits > 4:
        raise ValueError(
            f"combined register of {left.num_qubits + right.num_qubits} qubits "
            "exceeds the 4-qubit maximum"
        )
    return PureState(np.kron(left.amplitudes, right.amplitudes))


def apply_local(op: PauliCode, qubit: int, state: PureState) -> PureState:
    """Apply the 2x2 matrix of `op` to one qubit, leaving the rest untouched."""
    n = state.num_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit index {qubit} out of range for {n}-qubit register")
    t = state.amplitudes.reshape([2] * n)
    t = np.tensordot(op.matrix, t, axes=([1], [qubit]))
    t = np.moveaxis(t, 0, qubit)
    return PureState(t.reshape(-1))


def state_equal_up_to_phase(a: PureState, b: PureState, tol: float = 1e-9) -> bool:
    """True iff |<a|b>| >= 1 - tol. Global phase is unobservable."""
    if a.num_qubits != b.num_qubits:
        raise ValueError(
            f"mismatched register sizes: {a.num_qubits} vs {b.num_qubits} qubits"
        )
    return abs(np.vdot(a.amplitudes, b.amplitudes)) >= 1.0 - tol


def _bell_pair_tensor(label: BellLabel) -> np.ndarray:
    # 2x2 view: entry [x_first, x_second] is the amplitude of that bit pair.
    return _BELL_AMPLITUDES[label].reshape(2, 2)


def bell_project(
    state: PureState, pair: tuple[int, int], label: BellLabel
) -> tuple[float, PureState | None]:
    """Project onto the Bell state `label` of the indicated qubit pair.

    Returns (probability, renormalized residual). The residual is None when
    the probability is below 1e-12; renormalizing there would only amplify
    rounding noise.
    """
    i, j = pair
    n = state.num_qubits
    if i == j:
        raise ValueError(f"duplicate qubit indices in pair {pair}")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"pair {pair} out of range for {n}-qubit register")
    bell = _bell_pair_tensor(label)
    t = state.amplitudes.reshape([2] * n)
    # Contract the pair against <label|; what remains is the unmeasured factor.
    rest = np.tensordot(bell.conj(), t, axes=([0, 1], [i, j]))
    probability = float(np.vdot(rest, rest).real)
    if probability < ATOL_OP:
        return probability, None
    rest = rest / math.sqrt(probability)
    out = np.multiply.outer(bell, rest)
    out = np.moveaxis(out, [0, 1], [i, j])
    return probability, PureState(out.reshape(-1))


def bell_project_all(
    state: PureState, pair: tuple[int, int]
) -> dict[BellLabel, float]:
    """Probabilities of all four Bell outcomes on one pair (they sum to 1)."""
    return {label: bell_project(state, pair, label)[0] for label in BELL_ORDER}


def bell_measure(
    state: PureState, pair: tuple[int, int], rng: np.random.Generator
) -> tuple[BellLabel, PureState]:
    """Sample a Bell-basis measurement of one pair with Born probabilities.

    Consumes exactly one uniform draw from `rng`, so a fixed seed yields a
    fixed label sequence regardless of the outcome probabilities.
    """
    probs = bell_project_all(state, pair)
    u = float(rng.random())
    chosen = None
    cumulative = 0.0
    for label in BELL_ORDER:
        p = probs[label]
        if p <= ATOL_OP:
            continue
        chosen = label
        cumulative += p
        if u < cumulative:
            break
    assert chosen is not None, "no outcome has positive probability"
    _, residual = bell_project(state, pair, chosen)
    assert residual is not None
    return chosen, residual
