"""Monte Carlo sampling of noisy Clifford circuits.

The default path runs the noiseless circuit once on a stabilizer tableau to get
a reference record, then propagates Pauli frames for a whole batch of shots at
once with numpy. Outcomes that are random in the noiseless circuit are handled
by randomising the frame component that a reset or measurement leaves
undetermined (a Z frame on ``|0>`` or an X frame on ``|+>`` is harmless, but
flips later anticommuting measurements with probability 1/2).

``method="tableau"`` resimulates every shot exactly and is kept as a
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import NoiseSpec, StabCircuit
from .tableau import StabilizerTableau

DEFAULT_BATCH = 1 << 15

# opcodes for the compiled instruction stream
_H, _S, _PAULI, _CNOT, _RZ, _RX, _MZ, _MX, _N1, _N2, _XE, _ZE, _YE = range(13)
_CODES = {
    "H": _H, "S": _S, "S_DAG": _S, "X": _PAULI, "Y": _PAULI, "Z": _PAULI, "CNOT": _CNOT,
    "RZ": _RZ, "RX": _RX, "MZ": _MZ, "MX": _MX, "NOISE1": _N1, "NOISE2": _N2,
    "XERR": _XE, "ZERR": _ZE, "YERR": _YE,
}


@dataclass
class SampleResult:
    """Per-shot records. Bits are ``True`` for a ``-1`` outcome / a fired detector."""

    measurements: np.ndarray
    detectors: np.ndarray
    observables: np.ndarray
    log_weights: np.ndarray | None = None

    @property
    def shots(self) -> int:
        return self.measurements.shape[0]

    @property
    def weights(self) -> np.ndarray:
        if self.log_weights is None:
            return np.ones(self.shots)
        return np.exp(self.log_weights)


def compile_ops(circuit: StabCircuit) -> list[tuple]:
    """Lower the instruction list to ``(code, a, b, p, record)`` tuples."""
    ops = []
    for ins in circuit.instructions:
        code = _CODES.get(ins.name)
        if code is None:
            continue
        t = ins.targets
        ops.append((code, t[0], t[1] if len(t) > 1 else -1, ins.arg or 0.0, ins.record if ins.record is not None else -1))
    return ops


def detector_matrix(circuit: StabCircuit) -> tuple[list[tuple[int, ...]], list[tuple[int, ...]]]:
    dets = [ins.records for ins in circuit.instructions if ins.name == "DETECTOR"]
    return dets, circuit.observable_records()


def reference_sample(circuit: StabCircuit, rng: np.random.Generator) -> np.ndarray:
    """One noiseless run on the tableau; returns record bits (True = -1)."""
    return _tableau_run(circuit.without_noise(), rng, noisy=False)


def _tableau_run(circuit: StabCircuit, rng: np.random.Generator, noisy: bool) -> np.ndarray:
    n = max(circuit.num_qubits, 1)
    tab = StabilizerTableau(n)
    rec = np.zeros(circuit.num_measurements, dtype=bool)
    for ins in circuit.instructions:
        name = ins.name
        t = ins.targets
        if name in ("H", "S", "S_DAG", "X", "Y", "Z", "CNOT"):
            tab.apply(name, t)
        elif name == "RZ":
            tab.reset_z(t[0], rng)
        elif name == "RX":
            tab.reset_x(t[0], rng)
        elif name == "MZ":
            out, _ = tab.measure_z(t[0], rng)
            rec[ins.record] = out < 0
        elif name == "MX":
            out, _ = tab.measure_x(t[0], rng)
            rec[ins.record] = out < 0
        elif noisy and ins.arg and rng.random() < ins.arg:
            if name == "NOISE1":
                _apply_pauli_code(tab, t[0], int(rng.integers(1, 4)))
            elif name == "NOISE2":
                v = int(rng.integers(1, 16))
                _apply_pauli_code(tab, t[0], v & 3)
                _apply_pauli_code(tab, t[1], v >> 2)
            elif name == "XERR":
                tab.pauli_x(t[0])
            elif name == "ZERR":
                tab.pauli_z(t[0])
            elif name == "YERR":
                tab.pauli_y(t[0])
    return rec


def _apply_pauli_code(tab: StabilizerTableau, q: int, code: int) -> None:
    # code bit0 = X component, bit1 = Z component
    if code & 1:
        tab.pauli_x(q)
    if code & 2:
        tab.pauli_z(q)


def _bernoulli_hits(rng: np.random.Generator, p: float, size: int) -> np.ndarray:
    """Indices in ``range(size)`` hit independently with probability ``p``."""
    if p <= 0.0 or size == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(size)
    if p > 0.05:
        return np.flatnonzero(rng.random(size) < p)
    mean = p * size
    chunk = int(mean + 6.0 * np.sqrt(mean) + 16)
    pos = np.cumsum(rng.geometric(p, size=chunk)) - 1
    while pos[-1] < size:
        more = np.cumsum(rng.geometric(p, size=chunk)) + pos[-1]
        pos = np.concatenate([pos, more])
    return pos[pos < size]


def _random_bits(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.integers(0, 2, size=size, dtype=np.uint8).astype(bool)


class _FrameBatch:
    """Pauli frames for ``shots`` shots over ``n`` qubits."""

    def __init__(self, n: int, shots: int, rng: np.random.Generator, num_records: int,
                 randomize: bool = True, importance: float | None = None):
        self.x = np.zeros((n, shots), dtype=bool)
        self.z = np.zeros((n, shots), dtype=bool)
        self.flips = np.zeros((num_records, shots), dtype=bool)
        self.rng = rng
        self.shots = shots
        self.randomize = randomize
        self.importance = importance
        self.log_w = np.zeros(shots) if importance else None
        if randomize:
            self.z[:] = rng.integers(0, 2, size=(n, shots), dtype=np.uint8).astype(bool)

    def _hits(self, p: float) -> np.ndarray:
        if not self.importance:
            return _bernoulli_hits(self.rng, p, self.shots)
        q = min(p * self.importance, 0.5)
        if q <= p:
            return _bernoulli_hits(self.rng, p, self.shots)
        hits = _bernoulli_hits(self.rng, q, self.shots)
        miss_lr = np.log1p(-p) - np.log1p(-q)
        self.log_w += miss_lr
        self.log_w[hits] += np.log(p / q) - miss_lr
        return hits

    def run(self, ops: list[tuple]) -> None:
        x, z, rng = self.x, self.z, self.rng
        for code, a, b, p, rec in ops:
            if code == _CNOT:
                x[b] ^= x[a]
                z[a] ^= z[b]
            elif code == _H:
                tmp = x[a].copy()
                x[a] = z[a]
                z[a] = tmp
            elif code == _S:
                z[a] ^= x[a]
            elif code == _PAULI:
                pass
            elif code == _MZ:
                self.flips[rec] = x[a]
                if self.randomize:
                    z[a] = _random_bits(rng, self.shots)
            elif code == _MX:
                self.flips[rec] = z[a]
                if self.randomize:
                    x[a] = _random_bits(rng, self.shots)
            elif code == _RZ:
                x[a] = False
                z[a] = _random_bits(rng, self.shots) if self.randomize else False
            elif code == _RX:
                z[a] = False
                x[a] = _random_bits(rng, self.shots) if self.randomize else False
            elif code == _N1:
                hits = self._hits(p)
                if hits.size:
                    v = rng.integers(1, 4, size=hits.size)
                    x[a, hits] ^= (v & 1).astype(bool)
                    z[a, hits] ^= (v & 2).astype(bool)
            elif code == _N2:
                hits = self._hits(p)
                if hits.size:
                    v = rng.integers(1, 16, size=hits.size)
                    x[a, hits] ^= (v & 1).astype(bool)
                    z[a, hits] ^= (v & 2).astype(bool)
                    x[b, hits] ^= (v & 4).astype(bool)
                    z[b, hits] ^= (v & 8).astype(bool)
            elif code == _XE:
                hits = self._hits(p)
                x[a, hits] ^= True
            elif code == _ZE:
                hits = self._hits(p)
                z[a, hits] ^= True
            elif code == _YE:
                hits = self._hits(p)
                x[a, hits] ^= True
                z[a, hits] ^= True


def _parities(flips: np.ndarray, groups: list[tuple[int, ...]]) -> np.ndarray:
    """XOR of the listed record rows; output shape ``(shots, len(groups))``."""
    shots = flips.shape[1]
    out = np.zeros((len(groups), shots), dtype=bool)
    for i, recs in enumerate(groups):
        for r in recs:
            out[i] ^= flips[r]
    return out.T


def _seed_rng(seed, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return np.random.default_rng(ss)


def sample_circuit(
    circuit: StabCircuit,
    noise: NoiseSpec | None = None,
    shots: int = 1,
    seed: int | None = None,
    method: str = "frame",
    batch_size: int = DEFAULT_BATCH,
    importance: float | None = None,
) -> SampleResult:
    """Sample measurement records, detector bits and observable flips.

    ``noise`` (if given) is inserted on top of any explicit noise sites. Batches
    draw from independent streams keyed by ``(seed, batch index)``, so results
    do not depend on how batches are distributed over workers.
    ``importance`` scales every noise probability by that factor and returns
    per-shot log likelihood ratios for unbiased reweighting.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if seed is None and noise is not None:
        seed = noise.rng_seed
    if seed is None:
        seed = 0
    circ = noise.apply(circuit) if noise is not None else circuit
    circ.validate()
    dets, obs = detector_matrix(circ)

    if method == "tableau":
        if importance:
            raise ValueError("importance sampling is only available for the frame method")
        meas = np.zeros((shots, circ.num_measurements), dtype=bool)
        for s in range(shots):
            meas[s] = _tableau_run(circ, _seed_rng(seed, 2, s), noisy=True)
        ref = reference_sample(circ, _seed_rng(seed, 0))
        flips = (meas ^ ref).T
        return SampleResult(meas, _parities(flips, dets), _parities(flips, obs))
    if method != "frame":
        raise ValueError(f"unknown sampling method {method!r}")

    ref = reference_sample(circ, _seed_rng(seed, 0))
    ops = compile_ops(circ)
    n = max(circ.num_qubits, 1)
    meas_parts, det_parts, obs_parts, w_parts = [], [], [], []
    for b, start in enumerate(range(0, shots, batch_size)):
        size = min(batch_size, shots - start)
        batch = _FrameBatch(n, size, _seed_rng(seed, 1, b), circ.num_measurements, importance=importance)
        batch.run(ops)
        meas_parts.append(batch.flips.T ^ ref)
        det_parts.append(_parities(batch.flips, dets))
        obs_parts.append(_parities(batch.flips, obs))
        if batch.log_w is not None:
            w_parts.append(batch.log_w)
    return SampleResult(
        np.concatenate(meas_parts),
        np.concatenate(det_parts),
        np.concatenate(obs_parts),
        np.concatenate(w_parts) if w_parts else None,
    )


def propagate_faults(circuit: StabCircuit, faults: list[tuple[int, int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Deterministically propagate single Pauli faults through a circuit.

    ``faults`` lists ``(instruction_index, qubit, pauli_code)`` with code bit 0
    the X component and bit 1 the Z component; each fault is injected right
    after its instruction in its own column. Returns detector and observable
    flips of shape ``(len(faults), D)`` and ``(len(faults), O)``.
    """
    dets, obs = detector_matrix(circuit)
    n = max(circuit.num_qubits, 1)
    k = len(faults)
    frames = _FrameBatch(n, k, np.random.default_rng(0), circuit.num_measurements, randomize=False)
    by_site: dict[int, list[tuple[int, int, int]]] = {}
    for col, (site, q, code) in enumerate(faults):
        by_site.setdefault(site, []).append((col, q, code))
    code_of = [_CODES.get(ins.name) for ins in circuit.instructions]
    x, z = frames.x, frames.z
    for i, ins in enumerate(circuit.instructions):
        c = code_of[i]
        if c is not None and c not in (_N1, _N2, _XE, _ZE, _YE):
            t = ins.targets
            frames.run([(c, t[0], t[1] if len(t) > 1 else -1, 0.0, ins.record if ins.record is not None else -1)])
        for col, q, code in by_site.get(i, ()):
            if code & 1:
                x[q, col] ^= True
            if code & 2:
                z[q, col] ^= True
    return _parities(frames.flips, dets), _parities(frames.flips, obs)
