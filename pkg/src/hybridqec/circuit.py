"""Clifford circuits with noise sites and detector/observable annotations.

Text format, one instruction per line (``#`` starts a comment)::

    H 0
    CNOT 0 1
    NOISE1 0.001 0
    NOISE2 0.001 0 1
    XERR 0.0001 2
    MZ 1 -> r0
    DETECTOR(1,2,0) r0 r3
    OBSERVABLE r0 r5        # observable 0
    OBSERVABLE 1 r2         # observable 1
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

GATES_1Q = ("H", "S", "S_DAG", "X", "Y", "Z")
GATES_2Q = ("CNOT",)
RESETS = ("RZ", "RX")
MEASUREMENTS = ("MZ", "MX")
NOISE_OPS = ("NOISE1", "NOISE2", "XERR", "ZERR", "YERR")
ANNOTATIONS = ("DETECTOR", "OBSERVABLE")

_ALIASES = {"CX": "CNOT", "R": "RZ", "M": "MZ", "SDG": "S_DAG", "DEPOLARIZE1": "NOISE1", "DEPOLARIZE2": "NOISE2",
            "X_ERROR": "XERR", "Z_ERROR": "ZERR", "Y_ERROR": "YERR", "LOGICALCNOT": "CNOT"}

_NOISE_ARITY = {"NOISE1": 1, "NOISE2": 2, "XERR": 1, "ZERR": 1, "YERR": 1}


class CircuitError(ValueError):
    """Malformed circuit or circuit text."""


@dataclass(frozen=True)
class Instruction:
    name: str
    targets: tuple[int, ...] = ()
    arg: float | None = None
    record: int | None = None
    # detectors / observables: measurement-record indices, coordinates, observable id
    records: tuple[int, ...] = ()
    coords: tuple[float, ...] = ()
    index: int = 0

    def to_text(self) -> str:
        n = self.name
        if n in GATES_1Q or n in GATES_2Q or n in RESETS:
            return " ".join([n, *map(str, self.targets)])
        if n in MEASUREMENTS:
            return f"{n} {self.targets[0]} -> r{self.record}"
        if n in NOISE_OPS:
            return " ".join([n, _fmt_float(self.arg), *map(str, self.targets)])
        if n == "DETECTOR":
            head = "DETECTOR"
            if self.coords:
                head += "(" + ",".join(_fmt_float(c) for c in self.coords) + ")"
            return " ".join([head, *(f"r{k}" for k in self.records)])
        if n == "OBSERVABLE":
            parts = ["OBSERVABLE"]
            if self.index:
                parts.append(str(self.index))
            return " ".join(parts + [f"r{k}" for k in self.records])
        raise CircuitError(f"unknown instruction {n}")


def _fmt_float(v: float) -> str:
    return repr(float(v)) if v is not None else ""


@dataclass
class StabCircuit:
    """Ordered instruction list plus a qubit count."""

    num_qubits: int = 0
    instructions: list[Instruction] = field(default_factory=list)
    num_measurements: int = 0

    # -- builders ------------------------------------------------------------

    def _touch(self, *qs: int) -> None:
        for q in qs:
            if q < 0:
                raise CircuitError(f"negative qubit index {q}")
            self.num_qubits = max(self.num_qubits, q + 1)

    def append(self, name: str, *targets: int, arg: float | None = None) -> int | None:
        """Append a gate/reset/measure/noise op; measurements return their record index."""
        name = _ALIASES.get(name.upper(), name.upper())
        targets = tuple(int(t) for t in targets)
        if name in GATES_1Q or name in RESETS:
            if len(targets) != 1:
                raise CircuitError(f"{name} takes one qubit")
        elif name in GATES_2Q:
            if len(targets) != 2 or targets[0] == targets[1]:
                raise CircuitError(f"{name} takes two distinct qubits")
        elif name in MEASUREMENTS:
            if len(targets) != 1:
                raise CircuitError(f"{name} takes one qubit")
            self._touch(*targets)
            rec = self.num_measurements
            self.instructions.append(Instruction(name, targets, record=rec))
            self.num_measurements += 1
            return rec
        elif name in NOISE_OPS:
            if arg is None or not 0.0 <= arg <= 1.0:
                raise CircuitError(f"{name} needs a probability in [0, 1]")
            if len(targets) != _NOISE_ARITY[name]:
                raise CircuitError(f"{name} takes {_NOISE_ARITY[name]} qubit(s)")
            if name == "NOISE2" and targets[0] == targets[1]:
                raise CircuitError("NOISE2 needs distinct qubits")
        else:
            raise CircuitError(f"unknown instruction {name!r}")
        self._touch(*targets)
        self.instructions.append(Instruction(name, targets, arg=arg))
        return None

    def measure(self, basis: str, q: int) -> int:
        return self.append("M" + basis.upper(), q)

    def detector(self, records: Iterable[int], coords: Iterable[float] = ()) -> None:
        recs = tuple(sorted(set(int(r) for r in records)))
        for r in recs:
            if not 0 <= r < self.num_measurements:
                raise CircuitError(f"detector references unknown record r{r}")
        self.instructions.append(Instruction("DETECTOR", records=recs, coords=tuple(float(c) for c in coords)))

    def observable(self, records: Iterable[int], index: int = 0) -> None:
        recs = tuple(int(r) for r in records)
        for r in recs:
            if not 0 <= r < self.num_measurements:
                raise CircuitError(f"observable references unknown record r{r}")
        self.instructions.append(Instruction("OBSERVABLE", records=recs, index=int(index)))

    def extend(self, other: "StabCircuit") -> None:
        """Append ``other``, shifting its record indices past ours."""
        shift = self.num_measurements
        for ins in other.instructions:
            if ins.name in MEASUREMENTS:
                ins = replace(ins, record=ins.record + shift)
            elif ins.name in ANNOTATIONS:
                ins = replace(ins, records=tuple(r + shift for r in ins.records))
            self.instructions.append(ins)
        self.num_measurements += other.num_measurements
        self.num_qubits = max(self.num_qubits, other.num_qubits)

    def __add__(self, other: "StabCircuit") -> "StabCircuit":
        out = self.copy()
        out.extend(other)
        return out

    def copy(self) -> "StabCircuit":
        return StabCircuit(self.num_qubits, list(self.instructions), self.num_measurements)

    def without_noise(self) -> "StabCircuit":
        return StabCircuit(self.num_qubits, [i for i in self.instructions if i.name not in NOISE_OPS], self.num_measurements)

    # -- queries -------------------------------------------------------------

    def __iter__(self) -> Iterator[Instruction]:
        return iter(self.instructions)

    def __len__(self) -> int:
        return len(self.instructions)

    @property
    def detectors(self) -> list[Instruction]:
        return [i for i in self.instructions if i.name == "DETECTOR"]

    @property
    def num_detectors(self) -> int:
        return sum(1 for i in self.instructions if i.name == "DETECTOR")

    @property
    def num_observables(self) -> int:
        idx = [i.index for i in self.instructions if i.name == "OBSERVABLE"]
        return max(idx) + 1 if idx else 0

    def observable_records(self) -> list[tuple[int, ...]]:
        """Record parities per observable (repeated OBSERVABLE lines accumulate)."""
        out: list[list[int]] = [[] for _ in range(self.num_observables)]
        for ins in self.instructions:
            if ins.name == "OBSERVABLE":
                out[ins.index].extend(ins.records)
        return [tuple(sorted(r for r in set(rs) if rs.count(r) % 2)) for rs in out]

    def count(self, name: str) -> int:
        return sum(1 for i in self.instructions if i.name == name)

    def has_noise(self) -> bool:
        return any(i.name in NOISE_OPS for i in self.instructions)

    def validate(self) -> None:
        seen = set()
        for ins in self.instructions:
            for q in ins.targets:
                if not 0 <= q < self.num_qubits:
                    raise CircuitError(f"qubit {q} out of range")
            if ins.name in MEASUREMENTS:
                if ins.record in seen:
                    raise CircuitError(f"duplicate record r{ins.record}")
                seen.add(ins.record)

    # -- text ----------------------------------------------------------------

    def to_text(self) -> str:
        return "".join(ins.to_text() + "\n" for ins in self.instructions)

    @classmethod
    def from_text(cls, text: str) -> "StabCircuit":
        return parse_circuit(text)


_DET_RE = re.compile(r"^DETECTOR(?:\(([^)]*)\))?$", re.IGNORECASE)


def parse_circuit(text: str) -> StabCircuit:
    """Parse the line format described in the module docstring."""
    circ = StabCircuit()
    pending_records: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        try:
            m = _DET_RE.match(head)
            if m:
                coords = tuple(float(c) for c in m.group(1).split(",")) if m.group(1) else ()
                circ.detector([_rec(t, pending_records) for t in toks[1:]], coords)
                continue
            name = _ALIASES.get(head.upper(), head.upper())
            if name == "OBSERVABLE":
                rest = toks[1:]
                index = 0
                if rest and not rest[0].lower().startswith("r"):
                    index = int(rest[0])
                    rest = rest[1:]
                circ.observable([_rec(t, pending_records) for t in rest], index)
            elif name in MEASUREMENTS:
                if len(toks) == 2:
                    circ.append(name, int(toks[1]))
                elif len(toks) == 4 and toks[2] == "->":
                    declared = int(toks[3].lstrip("rR"))
                    if declared in pending_records:
                        raise CircuitError(f"record r{declared} assigned twice")
                    pending_records[declared] = circ.append(name, int(toks[1]))
                else:
                    raise CircuitError("expected 'MZ q -> r<k>'")
            elif name in NOISE_OPS:
                circ.append(name, *map(int, toks[2:]), arg=float(toks[1]))
            else:
                circ.append(name, *map(int, toks[1:]))
        except (CircuitError, ValueError, IndexError) as exc:
            raise CircuitError(f"line {lineno}: {exc}") from None
    return circ


def _rec(tok: str, declared: dict[int, int]) -> int:
    if not tok.lower().startswith("r"):
        raise CircuitError(f"expected record reference, got {tok!r}")
    k = int(tok[1:])
    return declared.get(k, k)


@dataclass(frozen=True)
class NoiseSpec:
    """Circuit-level Pauli noise.

    ``p1``/``p2`` are depolarizing probabilities after each one/two-qubit gate,
    ``p_meas`` flips measurement results and reset states, ``p_shuttle`` is a
    depolarizing probability per ion shuttle (used by the QCCD executor).
    """

    p1: float = 1e-6
    p2: float = 1e-3
    p_meas: float = 1e-4
    p_shuttle: float = 0.0
    rng_seed: int | None = None

    def __post_init__(self):
        for name in ("p1", "p2", "p_meas", "p_shuttle"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    @classmethod
    def noiseless(cls) -> "NoiseSpec":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def trapped_ion(cls, p2: float = 1e-3, p_meas: float = 1e-4) -> "NoiseSpec":
        """1Q 1e-6, 2Q ``p2``, SPAM 1e-4 (99.99% fidelity)."""
        return cls(1e-6, p2, p_meas)

    @classmethod
    def trapped_ion_crosstalk(cls, p2: float = 1e-3) -> "NoiseSpec":
        """Same as :meth:`trapped_ion` but with 1e-6 measurement/reset errors."""
        return cls(1e-6, p2, 1e-6)

    def is_zero(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and self.p_meas == 0

    def apply(self, circuit: StabCircuit, mask=None) -> StabCircuit:
        """Return a copy of ``circuit`` with explicit noise sites inserted.

        ``mask``, if given, holds one flag per instruction; unflagged
        instructions stay noiseless.
        """
        out = StabCircuit(circuit.num_qubits, [], circuit.num_measurements)
        ins_list = out.instructions
        if mask is not None and len(mask) != len(circuit.instructions):
            raise ValueError("noise mask length does not match the circuit")
        for i, ins in enumerate(circuit.instructions):
            n = ins.name
            if mask is not None and not mask[i]:
                ins_list.append(ins)
                continue
            if n == "MZ" and self.p_meas > 0:
                ins_list.append(Instruction("XERR", ins.targets, arg=self.p_meas))
            elif n == "MX" and self.p_meas > 0:
                ins_list.append(Instruction("ZERR", ins.targets, arg=self.p_meas))
            ins_list.append(ins)
            if n in GATES_1Q and self.p1 > 0:
                ins_list.append(Instruction("NOISE1", ins.targets, arg=self.p1))
            elif n in GATES_2Q and self.p2 > 0:
                ins_list.append(Instruction("NOISE2", ins.targets, arg=self.p2))
            elif n == "RZ" and self.p_meas > 0:
                ins_list.append(Instruction("XERR", ins.targets, arg=self.p_meas))
            elif n == "RX" and self.p_meas > 0:
                ins_list.append(Instruction("ZERR", ins.targets, arg=self.p_meas))
        return out
