"""Clifford-restricted VQA benchmark: Hamiltonians, a discrete Pauli-gadget ansatz,
noisy energy under three execution models, and a genetic optimizer.

Energies are computed in the Heisenberg picture: each Hamiltonian term is
conjugated backwards through the circuit, so it stays a signed Pauli string.
At a noise site the string survives a Pauli channel with factor ``1 - 2q``,
``q`` being the probability that the channel's Pauli anticommutes with it.
The product of these factors times the ideal value ``<0|P|0>`` is the exact
noisy expectation, which the GA optimizes directly. ``shots`` switches to
sampling the anticommutation events instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compiler import InputCircuit, allocate_encodings
from .pauli import PauliOperator

MODELS = ("ideal", "nisq", "selective", "msd")
MODEL_ALIASES = {"flexion": "selective"}


class VqaError(ValueError):
    pass


# -- Hamiltonians -----------------------------------------------------------------


@dataclass
class Hamiltonian:
    n: int
    coeffs: np.ndarray
    x: np.ndarray  # (terms, n) bool
    z: np.ndarray

    @classmethod
    def from_terms(cls, n: int, terms) -> "Hamiltonian":
        """Build from ``(coef, pauli_string)`` pairs; repeated strings are summed."""
        acc: dict[str, float] = {}
        for coef, s in terms:
            s = s.upper()
            if len(s) != n or set(s) - set("IXYZ"):
                raise VqaError(f"term {s!r} is not a {n}-qubit Pauli string")
            if not math.isfinite(coef):
                raise VqaError("coefficients must be finite")
            acc[s] = acc.get(s, 0.0) + float(coef)
        strings = [s for s, c in acc.items() if c != 0.0]
        x = np.array([[ch in "XY" for ch in s] for s in strings], dtype=bool).reshape(len(strings), n)
        z = np.array([[ch in "ZY" for ch in s] for s in strings], dtype=bool).reshape(len(strings), n)
        return cls(n, np.array([acc[s] for s in strings]), x, z)

    @property
    def num_terms(self) -> int:
        return len(self.coeffs)

    def terms(self) -> list[tuple[float, str]]:
        chars = np.array(["I", "X", "Z", "Y"])
        codes = self.x.astype(int) + 2 * self.z.astype(int)
        return [(float(c), "".join(chars[row])) for c, row in zip(self.coeffs, codes)]

    def operators(self) -> list[tuple[float, PauliOperator]]:
        return [(c, PauliOperator.from_string(s)) for c, s in self.terms()]

    def matrix(self) -> np.ndarray:
        dim = 2 ** self.n
        out = np.zeros((dim, dim), dtype=complex)
        for c, op in self.operators():
            out += c * op.to_matrix()
        return out

    def ground_energy(self) -> float:
        if self.n > 14:
            raise VqaError("exact diagonalization is limited to 14 qubits")
        return float(np.linalg.eigvalsh(self.matrix())[0])

    def to_text(self) -> str:
        return "".join(f"{c!r} {s}\n" for c, s in self.terms())


def _pauli_word(n: int, ops: dict[int, str]) -> str:
    return "".join(ops.get(q, "I") for q in range(n))


def build_ising(n: int, J: float = 1.0, h: float = 1.0) -> Hamiltonian:
    """Open-chain transverse-field Ising model ``-J sum Z_i Z_{i+1} - h sum X_i``."""
    if n < 2:
        raise VqaError("Ising chains need n >= 2")
    terms = [(-J, _pauli_word(n, {i: "Z", i + 1: "Z"})) for i in range(n - 1)]
    terms += [(-h, _pauli_word(n, {i: "X"})) for i in range(n)]
    return Hamiltonian.from_terms(n, terms)


def build_heisenberg(n: int, J: float = 1.0) -> Hamiltonian:
    """Open-chain ``J sum (XX + YY + ZZ)`` on neighbours."""
    if n < 2:
        raise VqaError("Heisenberg chains need n >= 2")
    terms = [(J, _pauli_word(n, {i: p, i + 1: p})) for i in range(n - 1) for p in "XYZ"]
    return Hamiltonian.from_terms(n, terms)


def parse_hamiltonian(text: str, n: int | None = None) -> Hamiltonian:
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise VqaError(f"line {lineno}: expected '<coef> <pauli-string>'")
        try:
            coef = float(parts[0])
        except ValueError:
            raise VqaError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
        s = parts[1].upper()
        if set(s) - set("IXYZ"):
            raise VqaError(f"line {lineno}: bad Pauli string {parts[1]!r}")
        if n is None:
            n = len(s)
        if len(s) != n:
            raise VqaError(f"line {lineno}: {len(s)}-qubit term in a {n}-qubit Hamiltonian")
        terms.append((coef, s))
    if n is None:
        raise VqaError("empty Hamiltonian file")
    return Hamiltonian.from_terms(n, terms)


def load_hamiltonian(path, n: int | None = None) -> Hamiltonian:
    return parse_hamiltonian(Path(path).read_text(), n)


def hamiltonian_from_spec(spec: str) -> Hamiltonian:
    """``ising:n=10,J=1,h=1``, ``heisenberg:n=4`` or a file path."""
    kind, _, args = spec.partition(":")
    if kind in ("ising", "heisenberg"):
        kw = {}
        for item in filter(None, args.split(",")):
            k, _, v = item.partition("=")
            kw[k.strip()] = float(v)
        n = int(kw.pop("n", 10))
        if kind == "ising":
            return build_ising(n, kw.get("J", 1.0), kw.get("h", 1.0))
        return build_heisenberg(n, kw.get("J", 1.0))
    return load_hamiltonian(spec)


# -- ansatz --------------------------------------------------------------------------


@dataclass(frozen=True)
class Gadget:
    kind: str  # "X" or "Z": the rotated Pauli string type
    pivot: int
    qubits: tuple[int, ...]


class CliffordAnsatz:
    """Layers of Pauli-string rotations ``exp(-i k pi/4 P)`` with ``k`` in {0,1,2,3}.

    A Z-string gadget gathers parity onto the pivot with a CNOT fan-in, rotates
    it with RZ and undoes the fan-in; an X-string gadget fans out from the
    pivot and rotates it with RX. A leading layer of single-qubit RX then RZ
    rotations reaches every single-qubit stabilizer state. Each layer block
    then has one X gadget and one Z gadget per pivot, on a window of ``span``
    neighbouring qubits. Long spans make many CNOTs per rotation, the regime
    of single-excitation style ansatze. Starts from |0...0>.
    """

    def __init__(self, n: int, layers: int = 1, span: int | None = None, local_layer: bool = True):
        if n < 1 or layers < 1:
            raise VqaError("need n >= 1 and layers >= 1")
        self.n = n
        self.layers = layers
        self.span = min(n, span if span is not None else 10)
        if self.span < 1:
            raise VqaError("span must be >= 1")
        gadgets = []
        if local_layer:
            gadgets += [Gadget(kind, p, (p,)) for kind in ("X", "Z") for p in range(n)]
        for _ in range(layers):
            for kind in ("X", "Z"):
                for p in range(n):
                    start = min(max(p - self.span // 2, 0), n - self.span)
                    gadgets.append(Gadget(kind, p, tuple(range(start, start + self.span))))
        self.gadgets: tuple[Gadget, ...] = tuple(gadgets)

    @property
    def num_params(self) -> int:
        return len(self.gadgets)

    def gates(self, params=None) -> list[tuple]:
        """Gate list ``(name, qubits, param_index)``; RZ/RX carry the gene index."""
        out = []
        for i, g in enumerate(self.gadgets):
            others = [q for q in g.qubits if q != g.pivot]
            if g.kind == "Z":
                fan = [("CNOT", (q, g.pivot), None) for q in others]
                rot = ("RZ", (g.pivot,), i)
            else:
                fan = [("CNOT", (g.pivot, q), None) for q in others]
                rot = ("RX", (g.pivot,), i)
            out += fan + [rot] + fan[::-1]
        return out

    def circuit(self, params=None) -> InputCircuit:
        """The gate-level circuit; with ``params`` the rotation angles are ``k pi/2``."""
        circ = InputCircuit(self.n)
        for name, qs, idx in self.gates():
            if idx is None:
                circ.add(name, *qs)
            else:
                angle = 0.0 if params is None else float(params[idx]) * math.pi / 2
                circ.add(name, *qs, angle=angle)
        return circ

    @property
    def num_cnots(self) -> int:
        return sum(name == "CNOT" for name, _, _ in self.gates())


# -- noise models ------------------------------------------------------------------


@dataclass(frozen=True)
class SelectiveRates:
    """Per-event Pauli flip rates for the selective-encoding model.

    Defaults come from this package's own d=5 runs under trapped-ion noise
    (p2=1e-3, p_meas=1e-4), centre triangles, matching decoder: conversion
    rates from ``conversion_ler`` per injected state (|0> fails on an X flip,
    |+> on a Z flip) and ``pL`` from the d-round memory experiment.
    """

    enlarge_x: float = 3.20e-3
    enlarge_z: float = 2.28e-3
    shrink_x: float = 3.07e-4
    shrink_z: float = 3.10e-4
    pL: float = 5.0e-5
    p1: float = 1e-6

    @property
    def pc(self) -> float:
        return max(self.enlarge_x, self.enlarge_z)


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "ideal"
    p1: float = 1e-6
    p2: float = 1e-3
    rates: SelectiveRates = field(default_factory=SelectiveRates)
    max_logic: int | None = None
    # MSD-Logical cost model
    msd_pL: float = 1.2e-5
    msd_t_infidelity: float = 1.9e-6
    msd_cycles: float = 31.5

    def __post_init__(self):
        object.__setattr__(self, "kind", MODEL_ALIASES.get(self.kind, self.kind))
        if self.kind not in MODELS:
            raise VqaError(f"unknown model {self.kind!r}; choose from {MODELS}")


def _depol_q(p: float, weight_qubits: int) -> float:
    # chance a uniform non-identity Pauli on k qubits anticommutes with a fixed non-identity string
    return p * (2 ** (2 * weight_qubits - 1)) / (4 ** weight_qubits - 1)


def noisy_ops(ansatz: CliffordAnsatz, model: NoiseModel) -> list[tuple]:
    """Gate and noise-site list for ``model``.

    Ops: ``("cx", a, b)``, ``("h"|"s"|"sdg"|"x"|"y"|"z", a)``, ``("rz"|"rx", a, gene)``,
    ``("dep", qubits, q)`` (uniform Pauli channel, ``q`` = anticommute chance
    with any non-identity restriction), ``("flip", a, px, pz)``.
    """
    ops: list[tuple] = []
    gates = ansatz.gates()
    kind = model.kind
    if kind in ("ideal", "nisq", "msd"):
        t_count = 1.5 * math.log2(1.0 / model.msd_pL) if kind == "msd" else 0.0
        for name, qs, idx in gates:
            if name == "CNOT":
                ops.append(("cx", *qs))
                if kind == "nisq":
                    ops.append(("dep", qs, _depol_q(model.p2, 2)))
                elif kind == "msd":
                    for q in qs:
                        ops.append(("flip", q, model.msd_pL, model.msd_pL))
            else:
                ops.append((name.lower(), qs[0], idx))
                if kind == "nisq":
                    ops.append(("dep", qs, _depol_q(model.p1, 1)))
                elif kind == "msd":
                    # T states consumed by the rotation, then every qubit idles during distillation
                    ops.append(("flip", qs[0], 0.0, min(0.5, t_count * model.msd_t_infidelity)))
                    idle = min(0.5, t_count * model.msd_cycles * model.msd_pL)
                    for q in range(ansatz.n):
                        ops.append(("flip", q, idle, idle))
        return ops
    rates = model.rates
    sched = allocate_encodings(ansatz.circuit(), model.max_logic or ansatz.n)
    gene_of = iter([idx for name, _, idx in gates if idx is not None])
    events = iter(sched.events)
    for op in sched.ops:
        if op[0] in ("encode", "shrink"):
            ev = next(events)
            if not ev.free:
                px, pz = (rates.enlarge_x, rates.enlarge_z) if op[0] == "encode" else (rates.shrink_x, rates.shrink_z)
                ops.append(("flip", op[1], px, pz))
        elif op[0] == "cx":
            ops.append(("cx", op[1], op[2]))
            for q in op[1:]:
                ops.append(("flip", q, rates.pL, rates.pL))
        else:
            _, q, name, _ = op
            rot = name in ("RZ", "RX")
            ops.append((name.lower(), q, next(gene_of) if rot else None))
            ops.append(("dep", (q,), _depol_q(rates.p1, 1)))
    return ops


# -- Heisenberg propagation ----------------------------------------------------------


def _conj_h(x, z, r, a, m=None):
    xa, za = x[:, a].copy(), z[:, a].copy()
    if m is None:
        r ^= xa & za
        x[:, a], z[:, a] = za, xa
    else:
        r ^= m & xa & za
        x[:, a] = np.where(m, za, xa)
        z[:, a] = np.where(m, xa, za)


def _conj_s(x, z, r, a, m=None):
    xa = x[:, a] if m is None else x[:, a] & m
    r ^= xa & z[:, a]
    z[:, a] ^= xa


def _conj_sdg(x, z, r, a, m=None):
    xa = x[:, a] if m is None else x[:, a] & m
    r ^= xa & ~z[:, a]
    z[:, a] ^= xa


def _conj_cx(x, z, r, a, b):
    r ^= x[:, a] & z[:, b] & ~(x[:, b] ^ z[:, a])
    x[:, b] ^= x[:, a]
    z[:, a] ^= z[:, b]


def _anti(x, z, kind, a):
    """Rows whose string anticommutes with Pauli ``kind`` on ``a``."""
    if kind == "X":
        return z[:, a].copy()
    if kind == "Z":
        return x[:, a].copy()
    return x[:, a] ^ z[:, a]


def propagate(ops: list[tuple], x0: np.ndarray, z0: np.ndarray, genes: np.ndarray,
              rng: np.random.Generator | None = None, shots: int = 0):
    """Back-propagate rows through ``ops``.

    ``genes`` has one row of rotation settings per observable row. Returns
    ``(value, atten)`` with ``value`` the ideal ``<0|P|0>`` per row and
    ``atten`` the product of channel factors, or with ``shots`` the per-shot
    sign parities ``(rows, shots)`` instead of ``atten``.
    """
    x, z = x0.copy(), z0.copy()
    r = np.zeros(len(x), dtype=bool)
    atten = np.ones(len(x))
    flips = np.zeros((len(x), shots), dtype=bool) if shots else None

    def hit(prob, rows_mask):
        nonlocal atten
        if prob <= 0:
            return
        if shots:
            flips[rows_mask] ^= rng.random((int(rows_mask.sum()), shots)) < prob
        else:
            atten = atten * np.where(rows_mask, 1.0 - 2.0 * prob, 1.0)

    for op in reversed(ops):
        kind = op[0]
        if kind == "cx":
            _conj_cx(x, z, r, op[1], op[2])
        elif kind == "h":
            _conj_h(x, z, r, op[1])
        elif kind == "s":
            _conj_sdg(x, z, r, op[1])  # S^dag P S
        elif kind == "sdg":
            _conj_s(x, z, r, op[1])
        elif kind in ("x", "y", "z"):
            r ^= _anti(x, z, kind.upper(), op[1])
        elif kind == "rz":
            k = genes[:, op[2]]
            for j in (1, 2, 3):
                _conj_sdg(x, z, r, op[1], k >= j)
        elif kind == "rx":
            k = genes[:, op[2]]
            m = k > 0
            _conj_h(x, z, r, op[1], m)
            for j in (1, 2, 3):
                _conj_sdg(x, z, r, op[1], k >= j)
            _conj_h(x, z, r, op[1], m)
        elif kind == "dep":
            qs, q = op[1], op[2]
            nontriv = np.zeros(len(x), dtype=bool)
            for a in qs:
                nontriv |= x[:, a] | z[:, a]
            hit(q, nontriv)
        elif kind == "flip":
            a, px, pz = op[1], op[2], op[3]
            hit(px, z[:, a].copy())
            hit(pz, x[:, a].copy())
        else:
            raise VqaError(f"unknown op {kind!r}")
    value = np.where(x.any(axis=1), 0.0, np.where(r, -1.0, 1.0))
    return value, (flips if shots else atten)


def energies(ansatz: CliffordAnsatz, ham: Hamiltonian, population: np.ndarray, ops: list[tuple]) -> np.ndarray:
    """Exact noisy energy for each genome (row of ``population``)."""
    pop = np.atleast_2d(np.asarray(population, dtype=np.int64))
    P, T = len(pop), ham.num_terms
    x0 = np.tile(ham.x, (P, 1))
    z0 = np.tile(ham.z, (P, 1))
    genes = np.repeat(pop, T, axis=0)
    value, atten = propagate(ops, x0, z0, genes)
    return (value * atten).reshape(P, T) @ ham.coeffs


def expected_energy(params, ham: Hamiltonian, model: NoiseModel | str = "ideal", ansatz: CliffordAnsatz | None = None,
                    shots: int | None = None, seed: int = 0) -> float:
    """Energy of one assignment; exact unless ``shots`` is given."""
    model = NoiseModel(model) if isinstance(model, str) else model
    ansatz = ansatz or CliffordAnsatz(ham.n)
    params = np.asarray(params, dtype=np.int64)
    if ansatz.n != ham.n:
        raise VqaError(f"ansatz has {ansatz.n} qubits, Hamiltonian {ham.n}")
    if params.shape != (ansatz.num_params,):
        raise VqaError(f"expected {ansatz.num_params} parameters")
    if np.any((params < 0) | (params > 3)):
        raise VqaError("parameters must be quarter turns in {0,1,2,3}")
    ops = noisy_ops(ansatz, model)
    if not shots:
        return float(energies(ansatz, ham, params[None, :], ops)[0])
    rng = np.random.default_rng(seed)
    genes = np.repeat(params[None, :], ham.num_terms, axis=0)
    value, flips = propagate(ops, ham.x, ham.z, genes, rng=rng, shots=shots)
    signs = np.where(flips, -1.0, 1.0).mean(axis=1)
    return float(np.sum(ham.coeffs * value * signs))


# -- genetic optimizer ----------------------------------------------------------------


@dataclass
class GaConfig:
    population: int = 64
    generations: int = 150
    tournament: int = 4
    mutation_rate: float | None = None  # default 1 / genome length
    elitism: int = 1


@dataclass
class GaRun:
    model: str
    seed: int
    trace: list[float]
    best_params: np.ndarray
    best_energy: float
    population_sizes: list[int]

    def to_dict(self) -> dict:
        return {
            "model": self.model, "seed": self.seed, "trace": self.trace,
            "best_params": self.best_params.tolist(), "best_energy": self.best_energy,
            "population": self.population_sizes[0] if self.population_sizes else 0,
        }


def run_ga(ham: Hamiltonian, model: NoiseModel | str = "ideal", generations: int | None = None, seed: int = 0,
           ansatz: CliffordAnsatz | None = None, config: GaConfig | None = None) -> GaRun:
    """Tournament selection, uniform crossover, per-gene mutation and elitism."""
    model = NoiseModel(model) if isinstance(model, str) else model
    cfg = config or GaConfig()
    gens = cfg.generations if generations is None else generations
    if gens < 1:
        raise VqaError("generations must be >= 1")
    ansatz = ansatz or CliffordAnsatz(ham.n)
    ops = noisy_ops(ansatz, model)
    G = ansatz.num_params
    rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / G
    rng = np.random.default_rng(seed)
    pop = rng.integers(0, 4, size=(cfg.population, G))
    pop[0] = 0  # include the reference state
    fit = energies(ansatz, ham, pop, ops)
    trace, sizes = [], []
    best = int(np.argmin(fit))
    best_params, best_energy = pop[best].copy(), float(fit[best])
    for _ in range(gens):
        order = np.argsort(fit, kind="stable")
        elite = pop[order[: cfg.elitism]]
        n_child = cfg.population - cfg.elitism
        cand = rng.integers(0, cfg.population, size=(2 * n_child, cfg.tournament))
        winners = cand[np.arange(len(cand)), np.argmin(fit[cand], axis=1)]
        pa, pb = pop[winners[:n_child]], pop[winners[n_child:]]
        mask = rng.random((n_child, G)) < 0.5
        child = np.where(mask, pa, pb)
        mut = rng.random((n_child, G)) < rate
        child = np.where(mut, rng.integers(0, 4, size=(n_child, G)), child)
        pop = np.vstack([elite, child])
        fit = np.concatenate([fit[order[: cfg.elitism]], energies(ansatz, ham, child, ops)])
        i = int(np.argmin(fit))
        if fit[i] < best_energy:
            best_energy, best_params = float(fit[i]), pop[i].copy()
        trace.append(best_energy)
        sizes.append(len(pop))
    return GaRun(model.kind, seed, trace, best_params, best_energy, sizes)


def conversion_profile(ansatz: CliffordAnsatz, max_logic: int | None = None) -> dict:
    sched = allocate_encodings(ansatz.circuit(), max_logic or ansatz.n)
    n2, nc = sched.n2, sched.nc
    return {"n2": n2, "nc": nc, "ratio": n2 / nc if nc else math.inf}


def compare_models(ham: Hamiltonian, seed: int = 0, generations: int | None = None,
                   ansatz: CliffordAnsatz | None = None, models=("nisq", "selective"),
                   base: NoiseModel | None = None, config: GaConfig | None = None) -> dict:
    """Converged energies per model and their gaps to the ideal-model optimum."""
    ansatz = ansatz or CliffordAnsatz(ham.n)
    base = base or NoiseModel()
    ideal = run_ga(ham, "ideal", generations, seed, ansatz, config)
    out = {"ideal": ideal.best_energy, "gaps": {}, "energies": {}}
    for m in models:
        run = run_ga(ham, NoiseModel(m, base.p1, base.p2, base.rates, base.max_logic), generations, seed, ansatz, config)
        out["energies"][m] = run.best_energy
        out["gaps"][m] = run.best_energy - ideal.best_energy
    return out
