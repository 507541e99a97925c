"""Rotated surface-code patches and their syndrome-extraction circuits.

Layout conventions (patch-local, row-major, 0-indexed):

* data qubit ``(r, c)`` has index ``r * d + c``;
* a check sits on the plaquette whose top-left data corner is ``(r, c)`` with
  ``r, c`` in ``[-1, d-1]``; it is X-type when ``r + c`` is even;
* weight-2 X checks run along the top and bottom edges, weight-2 Z checks
  along the left and right edges, so X_L is a column and Z_L a row;
* ancilla for check ``k`` has index ``d*d + k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import StabCircuit
from .pauli import PauliOperator

# CNOT layer order per check type as (dr, dc) offsets from the plaquette corner.
# X checks hook horizontally, Z checks vertically: both perpendicular to the
# matching logical, so a single ancilla fault never spans half a logical.
X_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))
Z_ORDER = ((0, 0), (1, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class StabilizerSpec:
    kind: str
    support: tuple[int, ...]
    ancilla: int
    corner: tuple[int, int]
    # data qubit per CNOT layer, -1 where the plaquette has no qubit
    schedule: tuple[int, int, int, int]

    @property
    def weight(self) -> int:
        return len(self.support)

    @property
    def center(self) -> tuple[float, float]:
        return (self.corner[0] + 0.5, self.corner[1] + 0.5)


@dataclass(frozen=True)
class SurfacePatch:
    d: int
    checks: tuple[StabilizerSpec, ...]
    x_logical: tuple[int, ...]
    z_logical: tuple[int, ...]
    bare: int
    origin: tuple[int, int] = (0, 0)
    _coords: tuple[tuple[int, int], ...] = field(default=(), repr=False)

    @property
    def num_data(self) -> int:
        return self.d * self.d

    @property
    def num_qubits(self) -> int:
        return 2 * self.d * self.d - 1

    @property
    def data_coords(self) -> list[tuple[int, int]]:
        r0, c0 = self.origin
        return [(r0 + r, c0 + c) for r, c in self._coords]

    @property
    def ancilla_coords(self) -> list[tuple[float, float, str]]:
        r0, c0 = self.origin
        return [(r0 + s.center[0], c0 + s.center[1], s.kind) for s in self.checks]

    def coord(self, q: int) -> tuple[int, int]:
        return divmod(q, self.d)

    def index(self, r: int, c: int) -> int:
        if not (0 <= r < self.d and 0 <= c < self.d):
            raise ValueError(f"({r}, {c}) is not a data position of a d={self.d} patch")
        return r * self.d + c

    def x_checks(self) -> list[StabilizerSpec]:
        return [s for s in self.checks if s.kind == "X"]

    def z_checks(self) -> list[StabilizerSpec]:
        return [s for s in self.checks if s.kind == "Z"]

    # -- Pauli views (over data qubits only) ---------------------------------

    def check_operator(self, spec: StabilizerSpec) -> PauliOperator:
        return PauliOperator.on(self.num_data, spec.kind, spec.support)

    def logical_x(self) -> PauliOperator:
        return PauliOperator.on(self.num_data, "X", self.x_logical)

    def logical_z(self) -> PauliOperator:
        return PauliOperator.on(self.num_data, "Z", self.z_logical)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "origin": list(self.origin),
            "data": [list(c) for c in self.data_coords],
            "checks": [
                {
                    "type": s.kind,
                    "support": list(s.support),
                    "ancilla": s.ancilla,
                    "coord": [self.origin[0] + s.center[0], self.origin[1] + s.center[1]],
                }
                for s in self.checks
            ],
            "x_logical": list(self.x_logical),
            "z_logical": list(self.z_logical),
            "bare": self.bare,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def build_patch(d: int, intersection: tuple[int, int] | None = None, origin: tuple[int, int] = (0, 0)) -> SurfacePatch:
    """Distance-``d`` rotated patch whose logicals cross at ``intersection``.

    ``intersection`` defaults to the centre qubit. X_L is the column and Z_L the
    row through it.
    """
    if not isinstance(d, (int, np.integer)) or d < 3 or d % 2 == 0:
        raise ValueError(f"code distance must be an odd integer >= 3, got {d!r}")
    if intersection is None:
        intersection = ((d - 1) // 2, (d - 1) // 2)
    ir, ic = intersection
    if not (0 <= ir < d and 0 <= ic < d):
        raise ValueError(f"intersection {intersection} is off the {d}x{d} data grid")

    def q(r, c):
        return r * d + c if 0 <= r < d and 0 <= c < d else -1

    checks = []
    for r in range(-1, d):
        for c in range(-1, d):
            kind = "X" if (r + c) % 2 == 0 else "Z"
            cells = [q(r + dr, c + dc) for dr, dc in ((0, 0), (0, 1), (1, 0), (1, 1))]
            present = [x for x in cells if x >= 0]
            if len(present) == 4:
                pass
            elif len(present) == 2:
                horizontal_edge = r in (-1, d - 1) and 0 <= c <= d - 2
                vertical_edge = c in (-1, d - 1) and 0 <= r <= d - 2
                if not ((horizontal_edge and kind == "X") or (vertical_edge and kind == "Z")):
                    continue
            else:
                continue
            order = X_ORDER if kind == "X" else Z_ORDER
            sched = tuple(q(r + dr, c + dc) for dr, dc in order)
            checks.append(
                StabilizerSpec(kind, tuple(sorted(present)), d * d + len(checks), (r, c), sched)
            )
    coords = tuple((r, c) for r in range(d) for c in range(d))
    return SurfacePatch(
        d=d,
        checks=tuple(checks),
        x_logical=tuple(q(r, ic) for r in range(d)),
        z_logical=tuple(q(ir, c) for c in range(d)),
        bare=q(ir, ic),
        origin=tuple(origin),
        _coords=coords,
    )


def append_round(circ: StabCircuit, patch: SurfacePatch, qmap: Sequence[int] | None = None) -> list[int]:
    """Measure every check once; returns the record index per check.

    ``qmap`` maps patch-local qubit indices to circuit qubits.
    """
    m = qmap if qmap is not None else range(patch.num_qubits)
    for s in patch.checks:
        circ.append("RX" if s.kind == "X" else "RZ", m[s.ancilla])
    for layer in range(4):
        for s in patch.checks:
            dq = s.schedule[layer]
            if dq < 0:
                continue
            if s.kind == "X":
                circ.append("CNOT", m[s.ancilla], m[dq])
            else:
                circ.append("CNOT", m[dq], m[s.ancilla])
    return [circ.measure(s.kind, m[s.ancilla]) for s in patch.checks]


def syndrome_round_circuit(patch: SurfacePatch, qmap: Sequence[int] | None = None) -> StabCircuit:
    """A standalone circuit measuring every stabilizer exactly once."""
    circ = StabCircuit(patch.num_qubits if qmap is None else max(qmap) + 1)
    append_round(circ, patch, qmap)
    return circ


def detector_coords(patch: SurfacePatch, k: int, t: float) -> tuple[float, float, float]:
    r, c = patch.checks[k].center
    return (patch.origin[1] + c, patch.origin[0] + r, float(t))


def memory_circuit(patch: SurfacePatch, rounds: int, basis: str = "Z") -> StabCircuit:
    """Memory experiment: prepare a logical eigenstate, run ``rounds`` rounds, read out transversally."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    basis = basis.upper()
    if basis not in ("X", "Z"):
        raise ValueError("basis must be 'X' or 'Z'")
    circ = StabCircuit(patch.num_qubits)
    for q in range(patch.num_data):
        circ.append("R" + basis, q)
    prev = None
    for t in range(rounds):
        recs = append_round(circ, patch)
        for k, s in enumerate(patch.checks):
            if prev is None:
                if s.kind == basis:
                    circ.detector([recs[k]], detector_coords(patch, k, t))
            else:
                circ.detector([recs[k], prev[k]], detector_coords(patch, k, t))
        prev = recs
    data = [circ.measure(basis, q) for q in range(patch.num_data)]
    for k, s in enumerate(patch.checks):
        if s.kind == basis:
            circ.detector([prev[k], *(data[q] for q in s.support)], detector_coords(patch, k, rounds))
    logical = patch.z_logical if basis == "Z" else patch.x_logical
    circ.observable([data[q] for q in logical])
    return circ


@dataclass
class LerEstimate:
    """Logical error rate with a Wilson score interval."""

    failures: float
    shots: int
    rate: float
    low: float
    high: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"failures": self.failures, "shots": self.shots, "ler": self.rate,
                "ci_low": self.low, "ci_high": self.high, **self.extra}


def wilson_interval(failures: float, shots: int, z: float = 1.96) -> tuple[float, float]:
    if shots <= 0:
        return (0.0, 1.0)
    p = failures / shots
    denom = 1 + z * z / shots
    centre = (p + z * z / (2 * shots)) / denom
    half = z * np.sqrt(p * (1 - p) / shots + z * z / (4 * shots * shots)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def estimate_from_flags(fail: np.ndarray, weights: np.ndarray | None = None, **extra) -> LerEstimate:
    """Rate estimate; with importance weights the interval uses the effective sample size."""
    shots = int(fail.size)
    if weights is None:
        k = int(np.count_nonzero(fail))
        lo, hi = wilson_interval(k, shots)
        return LerEstimate(k, shots, k / shots, lo, hi, dict(extra))
    contrib = weights * fail
    rate = float(contrib.mean())
    se = float(contrib.std(ddof=1) / np.sqrt(shots)) if shots > 1 else rate
    return LerEstimate(float(np.count_nonzero(fail)), shots, rate, max(0.0, rate - 1.96 * se), rate + 1.96 * se,
                       {"importance_weighted": True, **extra})


def memory_experiment(
    patch: SurfacePatch,
    rounds: int,
    noise,
    shots: int,
    basis: str = "Z",
    seed: int = 0,
    decoder: str = "uf",
    importance: float | None = None,
) -> LerEstimate:
    """Fraction of shots whose decoded logical observable is wrong."""
    from .decoder import decode_experiment

    circ = memory_circuit(patch, rounds, basis)
    return decode_experiment(circ, noise, shots, seed=seed, decoder=decoder, importance=importance,
                             d=patch.d, rounds=rounds, basis=basis)
