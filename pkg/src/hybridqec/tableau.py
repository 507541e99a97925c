"""Aaronson-Gottesman stabilizer tableau.

Rows ``0..n-1`` hold destabilizers and rows ``n..2n-1`` stabilizers. Signs are
stored as bits (``1`` means a ``-1`` sign); every row is Hermitian.
"""

from __future__ import annotations

import numpy as np

from .pauli import PauliOperator

ONE_QUBIT_GATES = frozenset({"I", "H", "S", "S_DAG", "X", "Y", "Z", "SQRT_X", "SQRT_X_DAG"})
TWO_QUBIT_GATES = frozenset({"CNOT", "CZ", "SWAP"})
CLIFFORD_GATES = ONE_QUBIT_GATES | TWO_QUBIT_GATES

GATE_ALIASES = {"CX": "CNOT", "SDG": "S_DAG", "S†": "S_DAG", "SX": "SQRT_X", "SXDG": "SQRT_X_DAG"}


def _g(x1, z1, x2, z2):
    """Elementwise i-exponent of the single-qubit products (Aaronson-Gottesman g)."""
    x1 = x1.astype(np.int8)
    z1 = z1.astype(np.int8)
    x2 = x2.astype(np.int8)
    z2 = z2.astype(np.int8)
    return x1 * z1 * (z2 - x2) + x1 * (1 - z1) * z2 * (2 * x2 - 1) + (1 - x1) * z1 * x2 * (1 - 2 * z2)


class StabilizerTableau:
    """Stabilizer state of ``n`` qubits, initialised to ``|0...0>``."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one qubit")
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        self.r = np.zeros(2 * n, dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True
        self.z[n + idx, idx] = True

    def copy(self) -> "StabilizerTableau":
        out = StabilizerTableau.__new__(StabilizerTableau)
        out.n = self.n
        out.x = self.x.copy()
        out.z = self.z.copy()
        out.r = self.r.copy()
        return out

    # -- rows as Pauli operators ---------------------------------------------

    def stabilizer(self, i: int) -> PauliOperator:
        row = self.n + i
        return PauliOperator(self.x[row], self.z[row], -1 if self.r[row] else 1)

    def destabilizer(self, i: int) -> PauliOperator:
        return PauliOperator(self.x[i], self.z[i], -1 if self.r[i] else 1)

    def stabilizers(self) -> list[PauliOperator]:
        return [self.stabilizer(i) for i in range(self.n)]

    # -- gates ---------------------------------------------------------------

    def _check(self, *qubits: int) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise IndexError(f"qubit {q} out of range for {self.n}-qubit tableau")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"qubit indices must be distinct, got {qubits}")

    def h(self, a: int) -> None:
        self._check(a)
        xa, za = self.x[:, a].copy(), self.z[:, a].copy()
        self.r ^= xa & za
        self.x[:, a], self.z[:, a] = za, xa

    def s(self, a: int) -> None:
        self._check(a)
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def s_dag(self, a: int) -> None:
        self._check(a)
        self.r ^= self.x[:, a] & ~self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def pauli_x(self, a: int) -> None:
        self._check(a)
        self.r ^= self.z[:, a]

    def pauli_z(self, a: int) -> None:
        self._check(a)
        self.r ^= self.x[:, a]

    def pauli_y(self, a: int) -> None:
        self._check(a)
        self.r ^= self.x[:, a] ^ self.z[:, a]

    def cnot(self, a: int, b: int) -> None:
        self._check(a, b)
        xa, zb = self.x[:, a], self.z[:, b]
        self.r ^= xa & zb & ~(self.x[:, b] ^ self.z[:, a])
        self.x[:, b] ^= xa
        self.z[:, a] ^= zb

    def apply(self, gate: str, qubits) -> "StabilizerTableau":
        """Conjugate the state by a named Clifford gate."""
        name = GATE_ALIASES.get(gate.upper(), gate.upper())
        qs = tuple(int(q) for q in qubits)
        if name not in CLIFFORD_GATES:
            raise ValueError(f"{gate!r} is not a supported Clifford gate")
        arity = 2 if name in TWO_QUBIT_GATES else 1
        if len(qs) != arity:
            raise ValueError(f"{name} takes {arity} qubit(s), got {len(qs)}")
        self._check(*qs)
        if name == "I":
            pass
        elif name == "H":
            self.h(*qs)
        elif name == "S":
            self.s(*qs)
        elif name == "S_DAG":
            self.s_dag(*qs)
        elif name == "X":
            self.pauli_x(*qs)
        elif name == "Y":
            self.pauli_y(*qs)
        elif name == "Z":
            self.pauli_z(*qs)
        elif name == "SQRT_X":
            self.h(*qs)
            self.s(*qs)
            self.h(*qs)
        elif name == "SQRT_X_DAG":
            self.h(*qs)
            self.s_dag(*qs)
            self.h(*qs)
        elif name == "CNOT":
            self.cnot(*qs)
        elif name == "CZ":
            a, b = qs
            self.h(b)
            self.cnot(a, b)
            self.h(b)
        elif name == "SWAP":
            a, b = qs
            self.cnot(a, b)
            self.cnot(b, a)
            self.cnot(a, b)
        return self

    def apply_pauli(self, op: PauliOperator) -> None:
        """Apply a Pauli operator as a gate (the global phase is irrelevant)."""
        if op.n != self.n:
            raise ValueError("qubit count mismatch")
        self.r ^= self._anticommuting(op)

    # -- measurement ---------------------------------------------------------

    def _rowmul_into(self, rows: np.ndarray, p: int) -> None:
        """row[h] <- row[p] * row[h] for every h in ``rows``."""
        if rows.size == 0:
            return
        gsum = _g(self.x[p][None, :], self.z[p][None, :], self.x[rows], self.z[rows]).sum(axis=1, dtype=np.int64)
        total = 2 * self.r[rows].astype(np.int64) + 2 * int(self.r[p]) + gsum
        self.r[rows] = (total % 4) == 2
        self.x[rows] ^= self.x[p]
        self.z[rows] ^= self.z[p]

    def _anticommuting(self, op: PauliOperator) -> np.ndarray:
        return (np.count_nonzero((self.x & op.z_bits) ^ (self.z & op.x_bits), axis=1) % 2).astype(bool)

    def _stabilizer_product_sign(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        """Multiply the stabilizers whose destabilizer flags are set; return bits and i-exponent."""
        n = self.n
        x = np.zeros(n, bool)
        z = np.zeros(n, bool)
        k = 0
        for i in np.flatnonzero(mask):
            row = n + i
            k += 2 * int(self.r[row]) + int(_g(x, z, self.x[row], self.z[row]).sum())
            x ^= self.x[row]
            z ^= self.z[row]
        return x, z, k % 4

    def peek(self, op: PauliOperator) -> int:
        """Expectation of a Hermitian Pauli: +1, -1, or 0 if the outcome is random."""
        if op.n != self.n:
            raise ValueError("qubit count mismatch")
        anti = self._anticommuting(op)
        if anti[self.n :].any():
            return 0
        x, z, k = self._stabilizer_product_sign(anti[: self.n])
        if not (np.array_equal(x, op.x_bits) and np.array_equal(z, op.z_bits)):
            raise RuntimeError("tableau invariant broken: operator not generated by stabilizers")
        sign = 1 if k == 0 else -1
        return sign * op.sign

    def measure_pauli(self, op: PauliOperator, rng=None, forced: int | None = None) -> tuple[int, bool]:
        """Projectively measure a Hermitian Pauli.

        Returns ``(outcome, deterministic)`` with ``outcome`` in ``{+1, -1}``.
        Random outcomes draw one bit from ``rng`` unless ``forced`` is given.
        """
        if op.n != self.n:
            raise ValueError("qubit count mismatch")
        sign = op.sign
        anti = self._anticommuting(op)
        n = self.n
        stab_hits = np.flatnonzero(anti[n:])
        if stab_hits.size == 0:
            return self.peek(op), True
        p = n + int(stab_hits[0])
        others = np.flatnonzero(anti)
        others = others[others != p]
        self._rowmul_into(others, p)
        self.x[p - n] = self.x[p]
        self.z[p - n] = self.z[p]
        self.r[p - n] = self.r[p]
        if forced is not None:
            outcome = 1 if forced > 0 else -1
        else:
            if rng is None:
                raise ValueError("random outcome needs an rng or a forced value")
            outcome = -1 if rng.integers(0, 2) else 1
        self.x[p] = op.x_bits
        self.z[p] = op.z_bits
        self.r[p] = (outcome * sign) < 0
        return outcome, False

    def measure_z(self, a: int, rng=None, forced: int | None = None) -> tuple[int, bool]:
        self._check(a)
        return self.measure_pauli(PauliOperator.from_sparse(self.n, {a: "Z"}), rng, forced)

    def measure_x(self, a: int, rng=None, forced: int | None = None) -> tuple[int, bool]:
        self._check(a)
        return self.measure_pauli(PauliOperator.from_sparse(self.n, {a: "X"}), rng, forced)

    def reset_z(self, a: int, rng=None) -> None:
        out, _ = self.measure_z(a, rng, forced=None if rng is not None else 1)
        if out < 0:
            self.pauli_x(a)

    def reset_x(self, a: int, rng=None) -> None:
        out, _ = self.measure_x(a, rng, forced=None if rng is not None else 1)
        if out < 0:
            self.pauli_z(a)

    # -- invariants ----------------------------------------------------------

    def check_invariants(self) -> None:
        """Raise AssertionError if the symplectic structure is broken."""
        xi = self.x.astype(np.uint8)
        zi = self.z.astype(np.uint8)
        omega = (xi @ zi.T + zi @ xi.T) % 2
        n = self.n
        expected = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        idx = np.arange(n)
        expected[idx, n + idx] = 1
        expected[n + idx, idx] = 1
        if not np.array_equal(omega, expected):
            raise AssertionError("tableau rows violate commutation / pairing relations")

    def __repr__(self) -> str:
        return f"StabilizerTableau(n={self.n}, stabilizers={[str(s) for s in self.stabilizers()]})"


def apply_gate(tableau: StabilizerTableau, gate: str, qubits) -> StabilizerTableau:
    """Functional alias of :meth:`StabilizerTableau.apply`."""
    return tableau.apply(gate, qubits)


def measure_pauli(tableau: StabilizerTableau, op: PauliOperator, rng=None) -> tuple[int, bool]:
    return tableau.measure_pauli(op, rng)
