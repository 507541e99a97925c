"""Independent brute-force references used by the test-suite.

Nothing here imports the simulator under test.
"""

from __future__ import annotations

import itertools

import numpy as np

_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "S_DAG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_MATS = {"I": np.eye(2, dtype=complex), "X": _1Q["X"], "Y": _1Q["Y"], "Z": _1Q["Z"]}


class Statevector:
    """Dense state; qubit 0 is the most significant bit of the basis index."""

    def __init__(self, n: int):
        self.n = n
        self.psi = np.zeros(2**n, dtype=complex)
        self.psi[0] = 1.0

    def _tensor(self):
        return self.psi.reshape([2] * self.n)

    def apply1(self, name: str, q: int) -> None:
        t = np.tensordot(_1Q[name], self._tensor(), axes=([1], [q]))
        self.psi = np.moveaxis(t, 0, q).reshape(-1)

    def cnot(self, c: int, t: int) -> None:
        psi = self._tensor().copy()
        idx = [slice(None)] * self.n
        idx[c] = 1
        sub = psi[tuple(idx)]
        tt = t if t < c else t - 1
        psi[tuple(idx)] = np.flip(sub, axis=tt)
        self.psi = psi.reshape(-1)

    def apply(self, name: str, qubits) -> None:
        if name == "CNOT":
            self.cnot(*qubits)
        else:
            self.apply1(name, qubits[0])

    def z_distribution(self) -> dict[tuple[int, ...], float]:
        probs = np.abs(self.psi) ** 2
        out = {}
        for idx, p in enumerate(probs):
            if p > 1e-12:
                bits = tuple((idx >> (self.n - 1 - q)) & 1 for q in range(self.n))
                out[bits] = out.get(bits, 0.0) + float(p)
        return out

    def expectation(self, pauli: str) -> float:
        mat = np.array([[1.0 + 0j]])
        for c in pauli:
            mat = np.kron(mat, PAULI_MATS[c])
        return float(np.real(np.vdot(self.psi, mat @ self.psi)))


def random_clifford_circuit(rng: np.random.Generator, n: int, length: int) -> list[tuple[str, tuple[int, ...]]]:
    names = ["H", "S", "S_DAG", "X", "Y", "Z", "CNOT"]
    gates = []
    for _ in range(length):
        g = names[rng.integers(len(names))] if n > 1 else names[rng.integers(len(names) - 1)]
        if g == "CNOT":
            a, b = rng.choice(n, size=2, replace=False)
            gates.append((g, (int(a), int(b))))
        else:
            gates.append((g, (int(rng.integers(n)),)))
    return gates


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical(samples: np.ndarray) -> dict[tuple[int, ...], float]:
    out: dict[tuple[int, ...], float] = {}
    rows, counts = np.unique(samples.astype(np.uint8), axis=0, return_counts=True)
    for r, c in zip(rows, counts):
        out[tuple(int(v) for v in r)] = c / samples.shape[0]
    return out


def dense_pauli(pauli: str) -> np.ndarray:
    mat = np.array([[1.0 + 0j]])
    for c in pauli:
        mat = np.kron(mat, PAULI_MATS[c])
    return mat


def ground_energy(terms: list[tuple[float, str]]) -> float:
    """Exact diagonalisation of a Pauli-sum Hamiltonian."""
    n = len(terms[0][1])
    h = np.zeros((2**n, 2**n), dtype=complex)
    for c, p in terms:
        h += c * dense_pauli(p)
    return float(np.linalg.eigvalsh(h)[0])


def min_weight_pairing(nodes: list[int], dist, boundary) -> float:
    """Brute-force minimum-weight matching with an optional boundary (tiny inputs only)."""
    if not nodes:
        return 0.0
    first, rest = nodes[0], nodes[1:]
    best = boundary(first) + min_weight_pairing(rest, dist, boundary)
    for i, other in enumerate(rest):
        best = min(best, dist(first, other) + min_weight_pairing(rest[:i] + rest[i + 1 :], dist, boundary))
    return best


def commutes(a: str, b: str) -> bool:
    anti = sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)
    return anti % 2 == 0


def all_pauli_strings(n: int):
    return ("".join(p) for p in itertools.product("IXYZ", repeat=n))


def rotation(name: str, angle: float) -> np.ndarray:
    """exp(-i angle/2 P) for P = Z (RZ) or X (RX)."""
    p = PAULI_MATS[name[1]]
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * p


def apply_gate(sv: Statevector, name: str, qubits, angle=None) -> None:
    if name in ("RZ", "RX"):
        t = np.tensordot(rotation(name, angle), sv._tensor(), axes=([1], [qubits[0]]))
        sv.psi = np.moveaxis(t, 0, qubits[0]).reshape(-1)
    else:
        sv.apply(name, qubits)


def gf2_rank(rows) -> int:
    m = np.array(rows, dtype=np.uint8) % 2
    if m.size == 0:
        return 0
    m = m.copy()
    r = 0
    for c in range(m.shape[1]):
        piv = next((i for i in range(r, m.shape[0]) if m[i, c]), None)
        if piv is None:
            continue
        m[[r, piv]] = m[[piv, r]]
        for i in range(m.shape[0]):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        r += 1
        if r == m.shape[0]:
            break
    return r


def gf2_in_span(rows, target) -> bool:
    """Is ``target`` an XOR of some subset of ``rows``?"""
    rows = np.atleast_2d(np.array(rows, dtype=np.uint8))
    if rows.size == 0:
        return not np.any(target)
    return gf2_rank(rows) == gf2_rank(np.vstack([rows, np.array(target, dtype=np.uint8)]))


def init_group_contains(num_data: int, basis: dict[int, str], kind: str, support) -> bool:
    """Does the check ``kind`` on ``support`` lie in the group of single-qubit initialisation stabilisers?"""
    rows = []
    for q, b in basis.items():
        v = np.zeros(2 * num_data, dtype=np.uint8)
        v[q if b == "X" else num_data + q] = 1
        rows.append(v)
    target = np.zeros(2 * num_data, dtype=np.uint8)
    for q in support:
        target[q if kind == "X" else num_data + q] = 1
    return gf2_in_span(np.array(rows).reshape(len(rows), 2 * num_data), target)


class MinWeightOracle:
    """Exhaustive minimum-weight correction over shortest paths, with a boundary node.

    ``edges`` holds ``(u, v, weight, obs_mask)``. Built on networkx, not on the
    decoder under test; only meant for a handful of defects.
    """

    def __init__(self, num_nodes: int, boundary: int, edges):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(num_nodes))
        for u, v, w, o in edges:
            if g.has_edge(u, v) and g[u][v]["weight"] <= w:
                continue
            g.add_edge(u, v, weight=w, obs=o)
        self.g = g
        self.boundary = boundary
        self._paths = {}

    def _from(self, s):
        import networkx as nx

        if s not in self._paths:
            dist, paths = nx.single_source_dijkstra(self.g, s, weight="weight")
            masks = {}
            for t, path in paths.items():
                m = 0
                for a, b in zip(path, path[1:]):
                    m ^= self.g[a][b]["obs"]
                masks[t] = m
            self._paths[s] = (dist, masks)
        return self._paths[s]

    def correction(self, fired) -> tuple[float, int]:
        """(weight, observable mask) of the best pairing of ``fired`` defects."""
        fired = list(fired)
        if not fired:
            return 0.0, 0
        first, rest = fired[0], fired[1:]
        dist, masks = self._from(first)
        best = (np.inf, 0)
        if self.boundary in dist:
            w, m = self.correction(rest)
            best = (dist[self.boundary] + w, masks[self.boundary] ^ m)
        for i, other in enumerate(rest):
            if other not in dist:
                continue
            w, m = self.correction(rest[:i] + rest[i + 1:])
            cand = (dist[other] + w, masks[other] ^ m)
            if cand[0] < best[0] - 1e-12:
                best = cand
        return best
