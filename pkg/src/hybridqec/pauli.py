"""Sparse-free Pauli strings over n qubits with exact phase tracking."""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

_CHAR_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1), "_": (0, 0)}
_BITS_CHAR = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}


def phase_exponent_of_product(x1, z1, x2, z2) -> int:
    """Power of i picked up when multiplying Pauli strings (x1, z1) * (x2, z2).

    Works on equal-length bit arrays; the result is reduced mod 4.
    """
    x1 = np.asarray(x1, dtype=np.int64)
    z1 = np.asarray(z1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    z2 = np.asarray(z2, dtype=np.int64)
    g = (
        x1 * z1 * (z2 - x2)
        + x1 * (1 - z1) * z2 * (2 * x2 - 1)
        + (1 - x1) * z1 * x2 * (1 - 2 * z2)
    )
    return int(np.sum(g, axis=-1)) % 4


class PauliOperator:
    """An n-qubit Pauli string ``i**k * P_0 ... P_{n-1}``.

    ``x_bits``/``z_bits`` use the convention X=(1,0), Y=(1,1), Z=(0,1), and the
    phase is kept as the exponent ``k`` of ``i``.
    """

    __slots__ = ("x_bits", "z_bits", "_k")

    def __init__(self, x_bits, z_bits, phase: complex | int = 1):
        x = np.asarray(x_bits, dtype=bool).copy()
        z = np.asarray(z_bits, dtype=bool).copy()
        if x.ndim != 1 or x.shape != z.shape:
            raise ValueError("x_bits and z_bits must be 1-D arrays of equal length")
        self.x_bits = x
        self.z_bits = z
        self._k = _phase_to_exponent(phase)

    # -- constructors --------------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(np.zeros(n, bool), np.zeros(n, bool))

    @classmethod
    def from_string(cls, text: str) -> "PauliOperator":
        """Parse strings like ``"XZI"``, ``"-iYY"`` or ``"+_X_"``."""
        s = text.strip()
        k = 0
        if s.startswith("+"):
            s = s[1:]
        elif s.startswith("-"):
            k = 2
            s = s[1:]
        if s.startswith("i"):
            k = (k + 1) % 4
            s = s[1:]
        try:
            bits = [_CHAR_BITS[c] for c in s.upper()]
        except KeyError as exc:
            raise ValueError(f"bad Pauli character in {text!r}") from exc
        arr = np.array(bits, dtype=bool).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], 1j**k)

    @classmethod
    def from_sparse(cls, n: int, terms: Mapping[int, str], phase: complex | int = 1) -> "PauliOperator":
        """Build from ``{qubit: 'X'|'Y'|'Z'}``."""
        x = np.zeros(n, bool)
        z = np.zeros(n, bool)
        for q, c in terms.items():
            if not 0 <= q < n:
                raise IndexError(f"qubit {q} out of range for n={n}")
            x[q], z[q] = _CHAR_BITS[c.upper()]
        return cls(x, z, phase)

    @classmethod
    def on(cls, n: int, kind: str, qubits: Iterable[int]) -> "PauliOperator":
        """Same single-qubit Pauli ``kind`` on every listed qubit."""
        return cls.from_sparse(n, {q: kind for q in qubits})

    # -- properties ----------------------------------------------------------

    @property
    def n(self) -> int:
        return self.x_bits.shape[0]

    @property
    def phase(self) -> complex:
        return (1, 1j, -1, -1j)[self._k]

    @property
    def phase_exponent(self) -> int:
        return self._k

    @property
    def sign(self) -> int:
        """+1/-1 for Hermitian operators."""
        if self._k % 2:
            raise ValueError("operator is not Hermitian")
        return 1 if self._k == 0 else -1

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x_bits | self.z_bits))

    def support(self) -> list[int]:
        return [int(q) for q in np.flatnonzero(self.x_bits | self.z_bits)]

    def sparse(self) -> dict[int, str]:
        return {q: _BITS_CHAR[(int(self.x_bits[q]), int(self.z_bits[q]))] for q in self.support()}

    # -- algebra -------------------------------------------------------------

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        if not isinstance(other, PauliOperator):
            return NotImplemented
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        k = self._k + other._k + phase_exponent_of_product(self.x_bits, self.z_bits, other.x_bits, other.z_bits)
        out = PauliOperator(self.x_bits ^ other.x_bits, self.z_bits ^ other.z_bits)
        out._k = k % 4
        return out

    def __neg__(self) -> "PauliOperator":
        out = self.copy()
        out._k = (out._k + 2) % 4
        return out

    def commutes(self, other: "PauliOperator") -> bool:
        return symplectic_product(self.x_bits, self.z_bits, other.x_bits, other.z_bits) == 0

    def with_sign(self, sign: int) -> "PauliOperator":
        out = self.copy()
        out._k = 0 if sign > 0 else 2
        return out

    def unsigned(self) -> "PauliOperator":
        return PauliOperator(self.x_bits, self.z_bits)

    def tensor(self, other: "PauliOperator") -> "PauliOperator":
        out = PauliOperator(np.concatenate([self.x_bits, other.x_bits]), np.concatenate([self.z_bits, other.z_bits]))
        out._k = (self._k + other._k) % 4
        return out

    def embed(self, n: int, qubits) -> "PauliOperator":
        """Place this operator on ``qubits`` of a larger n-qubit register."""
        x = np.zeros(n, bool)
        z = np.zeros(n, bool)
        idx = np.asarray(list(qubits), dtype=int)
        x[idx] = self.x_bits
        z[idx] = self.z_bits
        out = PauliOperator(x, z)
        out._k = self._k
        return out

    def copy(self) -> "PauliOperator":
        out = PauliOperator(self.x_bits, self.z_bits)
        out._k = self._k
        return out

    def to_matrix(self) -> np.ndarray:
        """Dense 2**n matrix; qubit 0 is the most significant tensor factor."""
        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.array([[1.0 + 0j]])
        for q in range(self.n):
            out = np.kron(out, mats[_BITS_CHAR[(int(self.x_bits[q]), int(self.z_bits[q]))]])
        return self.phase * out

    # -- dunder --------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return (
            self._k == other._k
            and np.array_equal(self.x_bits, other.x_bits)
            and np.array_equal(self.z_bits, other.z_bits)
        )

    def __hash__(self):
        return hash((self._k, self.x_bits.tobytes(), self.z_bits.tobytes()))

    def __str__(self) -> str:
        body = "".join(_BITS_CHAR[(int(a), int(b))] for a, b in zip(self.x_bits, self.z_bits))
        return _PHASE_PREFIX[self._k] + body

    def __repr__(self) -> str:
        return f"PauliOperator({str(self)!r})"


def symplectic_product(x1, z1, x2, z2) -> int:
    """0 if the two Pauli strings commute, 1 otherwise."""
    return int(np.count_nonzero((np.asarray(x1, bool) & np.asarray(z2, bool)) ^ (np.asarray(z1, bool) & np.asarray(x2, bool))) % 2)


def _phase_to_exponent(phase) -> int:
    if isinstance(phase, (int, np.integer)) and phase in (1, -1):
        return 0 if phase == 1 else 2
    for k, v in enumerate((1, 1j, -1, -1j)):
        if abs(complex(phase) - v) < 1e-12:
            return k
    raise ValueError(f"phase must be one of +1, -1, +i, -i; got {phase!r}")
