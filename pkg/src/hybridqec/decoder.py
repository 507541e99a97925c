"""Detector graphs built from noisy circuits, and matching-style decoders.

``build_detector_graph`` propagates every elementary Pauli fault through the
circuit to find which detectors and observables it flips, then folds the
circuit's noise channels into weighted graph edges. Symptoms touching more
than two detectors are split into X and Z parts (or into existing edges).

Two decoders work on the graph:

* :class:`UnionFindDecoder` - weighted union-find with peeling (default);
* :class:`MatchingDecoder` - exact minimum-weight matching over shortest-path
  distances, exhaustive for small syndromes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .circuit import NOISE_OPS, NoiseSpec, StabCircuit
from .sampler import propagate_faults, sample_circuit


class DecodingError(RuntimeError):
    """Raised when a syndrome cannot be explained by the graph."""


class HyperedgeError(ValueError):
    """Too much error mass could not be decomposed into graph edges."""


@dataclass
class DetectorGraph:
    """Detectors ``0..D-1`` plus one boundary node ``D``."""

    num_detectors: int
    num_observables: int
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    obs: np.ndarray  # int bitmask per edge
    coords: list[tuple[float, ...]] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def boundary(self) -> int:
        return self.num_detectors

    @property
    def num_edges(self) -> int:
        return int(self.u.size)

    @property
    def weights(self) -> np.ndarray:
        p = np.clip(self.p, 1e-300, 0.5)
        return np.log((1 - p) / p)

    def edge_index(self, a: int, b: int) -> int | None:
        a, b = min(a, b), max(a, b)
        hits = np.flatnonzero((self.u == a) & (self.v == b))
        return int(hits[0]) if hits.size else None

    def neighbors(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_detectors + 1)]
        for e, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist())):
            adj[a].append((b, e))
            adj[b].append((a, e))
        return adj

    def to_dict(self) -> dict:
        return {
            "num_detectors": self.num_detectors,
            "num_observables": self.num_observables,
            "boundary": self.boundary,
            "edges": [
                {"u": int(a), "v": int(b), "p": float(pp), "weight": float(w), "observables": int(o)}
                for a, b, pp, w, o in zip(self.u, self.v, self.p, self.weights, self.obs)
            ],
            "coords": [list(c) for c in self.coords],
            "stats": self.stats,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _xor_prob(a: float, b: float) -> float:
    return a * (1 - b) + b * (1 - a)


def _mechanisms(circuit: StabCircuit):
    """Yield ``(probability, [component ids])`` per Pauli channel outcome, plus the components."""
    components: list[tuple[int, int, int]] = []
    mechs: list[tuple[float, tuple[int, ...]]] = []

    def comp(site, q, code):
        components.append((site, q, code))
        return len(components) - 1

    for i, ins in enumerate(circuit.instructions):
        if ins.name not in NOISE_OPS or not ins.arg:
            continue
        p = float(ins.arg)
        if ins.name == "NOISE1":
            q = ins.targets[0]
            cx, cz = comp(i, q, 1), comp(i, q, 2)
            for code in (1, 2, 3):
                mechs.append((p / 3, tuple(c for bit, c in ((1, cx), (2, cz)) if code & bit)))
        elif ins.name == "NOISE2":
            a, b = ins.targets
            ids = (comp(i, a, 1), comp(i, a, 2), comp(i, b, 1), comp(i, b, 2))
            for code in range(1, 16):
                mechs.append((p / 15, tuple(ids[k] for k in range(4) if code >> k & 1)))
        else:
            code = {"XERR": 1, "ZERR": 2, "YERR": 3}[ins.name]
            q = ins.targets[0]
            mechs.append((p, tuple(comp(i, q, bit) for bit in (1, 2) if code & bit)))
    return components, mechs


def build_detector_graph(
    circuit: StabCircuit,
    noise: NoiseSpec | None = None,
    max_undecomposed: float = 0.01,
) -> DetectorGraph:
    """Weighted decoding graph for an annotated circuit.

    ``max_undecomposed`` bounds the fraction of error probability mass that may
    be dropped because its symptom could not be split into edges.
    """
    circ = noise.apply(circuit) if noise is not None else circuit
    if circ.num_detectors == 0:
        raise ValueError("circuit has no DETECTOR annotations")
    components, mechs = _mechanisms(circ)
    D = circ.num_detectors
    boundary = D
    if components:
        det_flips, obs_flips = propagate_faults(circ, components)
    else:
        det_flips = np.zeros((0, D), bool)
        obs_flips = np.zeros((0, max(circ.num_observables, 1)), bool)
    comp_dets = [frozenset(np.flatnonzero(row).tolist()) for row in det_flips]
    obs_weights = 1 << np.arange(obs_flips.shape[1], dtype=np.int64)
    comp_obs = [int(x) for x in (obs_flips.astype(np.int64) @ obs_weights)] if obs_flips.size else [0] * len(components)
    comp_is_x = [code == 1 for _, _, code in components]

    edges: dict[tuple[int, int], dict[int, float]] = {}
    graphlike: dict[frozenset, int] = {}

    def add_edge(dets: frozenset, obs: int, p: float) -> None:
        ds = sorted(dets)
        key = (ds[0], boundary) if len(ds) == 1 else (ds[0], ds[1])
        by_obs = edges.setdefault(key, {})
        by_obs[obs] = _xor_prob(by_obs.get(obs, 0.0), p)
        graphlike.setdefault(dets, obs)

    deferred = []
    undetectable = 0.0
    total_mass = 0.0
    for p, comps in mechs:
        dets: frozenset = frozenset()
        obs = 0
        for c in comps:
            dets = dets ^ comp_dets[c]
            obs ^= comp_obs[c]
        if not dets:
            if obs:
                undetectable += p
            continue
        total_mass += p
        if len(dets) <= 2:
            add_edge(dets, obs, p)
        else:
            deferred.append((p, comps, dets, obs))

    dropped = 0.0
    hyper = 0
    for p, comps, dets, obs in deferred:
        parts = []
        for want_x in (True, False):
            pd: frozenset = frozenset()
            po = 0
            for c in comps:
                if comp_is_x[c] == want_x:
                    pd = pd ^ comp_dets[c]
                    po ^= comp_obs[c]
            if pd:
                parts.append((pd, po))
            elif po:
                parts = None
                break
        if parts is None or any(len(pd) > 2 for pd, _ in parts):
            parts = _greedy_split(dets, obs, graphlike)
        if parts is None:
            hyper += 1
            dropped += p
            continue
        for pd, po in parts:
            add_edge(pd, po, p)

    if total_mass and dropped / total_mass > max_undecomposed:
        raise HyperedgeError(f"{dropped / total_mass:.2%} of error mass forms undecomposable hyperedges")

    us, vs, ps, os_ = [], [], [], []
    conflict = 0.0
    for (a, b), by_obs in sorted(edges.items()):
        best = max(by_obs, key=by_obs.get)
        us.append(a)
        vs.append(b)
        ps.append(by_obs[best])
        os_.append(best)
        conflict += sum(v for k, v in by_obs.items() if k != best)
    coords = [ins.coords for ins in circ.instructions if ins.name == "DETECTOR"]
    return DetectorGraph(
        num_detectors=D,
        num_observables=circ.num_observables,
        u=np.array(us, dtype=np.int64),
        v=np.array(vs, dtype=np.int64),
        p=np.array(ps, dtype=float),
        obs=np.array(os_, dtype=np.int64),
        coords=coords,
        stats={
            "mechanisms": len(mechs),
            "hyperedges_dropped": hyper,
            "dropped_probability": dropped,
            "undetectable_logical_probability": undetectable,
            "conflicting_observable_probability": conflict,
        },
    )


def _greedy_split(dets: frozenset, obs: int, graphlike: dict[frozenset, int]):
    """Split a symptom into known single edges; None if impossible."""
    remaining = set(dets)
    parts = []
    while remaining:
        found = None
        for a in sorted(remaining):
            for b in sorted(remaining):
                if b > a and frozenset((a, b)) in graphlike:
                    found = frozenset((a, b))
                    break
            if found:
                break
        if found is None:
            for a in sorted(remaining):
                if frozenset((a,)) in graphlike:
                    found = frozenset((a,))
                    break
        if found is None:
            return None
        parts.append((found, graphlike[found]))
        remaining -= found
    residual = obs
    for _, o in parts:
        residual ^= o
    if residual:
        return None
    return parts


# -- decoders -----------------------------------------------------------------


class _CachedDecoder:
    def __init__(self, graph: DetectorGraph, cache_size: int = 1 << 18):
        self.graph = graph
        self._cache: dict[bytes, int] = {}
        self._cache_size = cache_size

    def decode_mask(self, fired: tuple[int, ...]) -> int:
        raise NotImplementedError

    def decode(self, syndrome) -> np.ndarray:
        """Predicted observable flips for one shot's detector bits."""
        syn = np.asarray(syndrome, dtype=bool)
        if syn.shape != (self.graph.num_detectors,):
            raise ValueError(f"syndrome length {syn.shape} does not match {self.graph.num_detectors} detectors")
        mask = self._decode_cached(syn)
        return np.array([(mask >> k) & 1 for k in range(self.graph.num_observables)], dtype=bool)

    def _decode_cached(self, syn: np.ndarray) -> int:
        fired = np.flatnonzero(syn)
        if fired.size == 0:
            return 0
        key = fired.astype(np.int32).tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = self.decode_mask(tuple(fired.tolist()))
            if len(self._cache) < self._cache_size:
                self._cache[key] = hit
        return hit

    def decode_batch(self, syndromes: np.ndarray) -> np.ndarray:
        out = np.zeros((syndromes.shape[0], self.graph.num_observables), dtype=bool)
        bits = 1 << np.arange(self.graph.num_observables)
        nz = np.flatnonzero(syndromes.any(axis=1))
        for s in nz:
            m = self._decode_cached(syndromes[s])
            if m:
                out[s] = (m & bits) != 0
        return out


class UnionFindDecoder(_CachedDecoder):
    """Weighted union-find growth followed by peeling inside each cluster.

    Odd clusters grow along all boundary edges at the same rate; growth is
    event-driven, jumping straight to the next edge that becomes fully grown.
    Ties resolve by edge index.
    """

    def __init__(self, graph: DetectorGraph, **kw):
        super().__init__(graph, **kw)
        self.adj = graph.neighbors()
        self.length = graph.weights.tolist()
        self.eu = graph.u.tolist()
        self.ev = graph.v.tolist()
        self.eobs = graph.obs.tolist()

    def decode_mask(self, fired: tuple[int, ...]) -> int:
        B = self.graph.boundary
        adj, length, eu, ev = self.adj, self.length, self.eu, self.ev
        parent: dict[int, int] = {}
        parity: dict[int, int] = {}
        has_b: dict[int, bool] = {}
        members: dict[int, list[int]] = {}
        growth: dict[int, float] = {}
        grown: set[int] = set()

        def find(a):
            root = a
            while parent[root] != root:
                root = parent[root]
            while parent[a] != root:
                parent[a], a = root, parent[a]
            return root

        def add_node(a):
            if a not in parent:
                parent[a] = a
                parity[a] = 0
                has_b[a] = a == B
                members[a] = [a]

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra == rb:
                return
            if len(members[ra]) < len(members[rb]):
                ra, rb = rb, ra
            parent[rb] = ra
            parity[ra] ^= parity[rb]
            has_b[ra] = has_b[ra] or has_b[rb]
            members[ra].extend(members.pop(rb))

        defects = set(fired)
        for a in fired:
            add_node(a)
            parity[a] = 1

        def active_roots():
            return [r for r in members if parity[r] and not has_b[r]]

        roots = active_roots()
        guard = 0
        while roots:
            guard += 1
            if guard > 10 * (len(length) + 10):
                raise DecodingError("union-find growth did not terminate")
            # edges on the frontier of active clusters and how fast they grow
            rate: dict[int, int] = {}
            for r in roots:
                for a in members[r]:
                    for b, e in adj[a]:
                        if e in grown:
                            continue
                        rate[e] = rate.get(e, 0) + 1
            if not rate:
                raise DecodingError("odd cluster cannot reach a partner or the boundary")
            step = min((length[e] - growth.get(e, 0.0)) / k for e, k in rate.items())
            step = max(step, 0.0)
            newly = []
            for e, k in rate.items():
                g = growth.get(e, 0.0) + step * k
                growth[e] = g
                if g >= length[e] - 1e-9:
                    newly.append(e)
            for e in sorted(newly):
                grown.add(e)
                a, b = eu[e], ev[e]
                add_node(a)
                add_node(b)
                union(a, b)
            roots = active_roots()
        return self._peel(defects, grown, find)

    def _peel(self, defects: set[int], grown: set[int], find) -> int:
        B = self.graph.boundary
        eu, ev, eobs = self.eu, self.ev, self.eobs
        # peel along a minimum-weight spanning forest of the grown edges (Kruskal)
        tree_adj: dict[int, list[tuple[int, int]]] = {}
        forest: dict[int, int] = {}

        def top(a):
            forest.setdefault(a, a)
            while forest[a] != a:
                forest[a] = forest[forest[a]]
                a = forest[a]
            return a

        for e in sorted(grown, key=lambda e: (self.length[e], e)):
            ra, rb = top(eu[e]), top(ev[e])
            if ra == rb:
                continue
            forest[ra] = rb
            tree_adj.setdefault(eu[e], []).append((ev[e], e))
            tree_adj.setdefault(ev[e], []).append((eu[e], e))
        seen: set[int] = set()
        mask = 0
        marked = set(defects)
        # root clusters at the boundary first so leftover parity drains into it
        starts = ([B] if B in tree_adj else []) + sorted(tree_adj)
        for s in starts:
            if s in seen:
                continue
            order = []
            parent_edge: dict[int, tuple[int, int]] = {}
            seen.add(s)
            queue = [s]
            while queue:
                a = queue.pop(0)
                order.append(a)
                for b, e in tree_adj.get(a, ()):
                    if b not in seen:
                        seen.add(b)
                        parent_edge[b] = (a, e)
                        queue.append(b)
            for a in reversed(order[1:]):
                if a in marked:
                    par, e = parent_edge[a]
                    mask ^= eobs[e]
                    marked.discard(a)
                    if par in marked:
                        marked.discard(par)
                    else:
                        marked.add(par)
            marked.discard(B)
        if marked - {B}:
            raise DecodingError("peeling left unmatched defects")
        return mask


class MatchingDecoder(_CachedDecoder):
    """Minimum-weight perfect matching with a boundary, over shortest paths.

    Small syndromes are solved exactly by dynamic programming over subsets;
    larger ones fall back to networkx blossom matching. For graphs up to
    ``apsp_limit`` nodes all shortest paths and their observable parities are
    precomputed once.
    """

    exact_limit = 14
    apsp_limit = 2500

    def __init__(self, graph: DetectorGraph, **kw):
        super().__init__(graph, **kw)
        n = graph.num_detectors + 1
        w = graph.weights
        rows = np.concatenate([graph.u, graph.v])
        cols = np.concatenate([graph.v, graph.u])
        self.matrix = csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))
        self._edge_lookup = {}
        for e, (a, b) in enumerate(zip(graph.u.tolist(), graph.v.tolist())):
            key = (min(a, b), max(a, b))
            if key not in self._edge_lookup or w[e] < w[self._edge_lookup[key]]:
                self._edge_lookup[key] = e
        self.obs = graph.obs.tolist()
        self.dist = None
        if n <= self.apsp_limit:
            self.dist, pred = dijkstra(self.matrix, directed=False, return_predecessors=True)
            self.path_obs = self._all_path_obs(pred)

    def _all_path_obs(self, pred: np.ndarray) -> np.ndarray:
        """Observable parity of every shortest path, by pointer jumping along predecessors."""
        n = pred.shape[0]
        edge_obs = np.zeros((n, n), dtype=np.int64)
        for (a, b), e in self._edge_lookup.items():
            edge_obs[a, b] = edge_obs[b, a] = self.obs[e]
        src = np.arange(n)[:, None]
        anc = np.where(pred < 0, src, pred)
        acc = edge_obs[anc, np.arange(n)[None, :]]
        acc[pred < 0] = 0
        for _ in range(int(np.ceil(np.log2(max(n, 2)))) + 1):
            acc = acc ^ acc[src, anc]
            anc = anc[src, anc]
        return acc

    def _path_obs(self, pred: np.ndarray, src_row: int, target: int, source: int) -> int:
        mask = 0
        node = target
        while node != source:
            prev = int(pred[src_row, node])
            if prev < 0:
                raise DecodingError("no path between detectors")
            mask ^= self.obs[self._edge_lookup[(min(prev, node), max(prev, node))]]
            node = prev
        return mask

    def decode_mask(self, fired: tuple[int, ...]) -> int:
        B = self.graph.boundary
        k = len(fired)
        idx = list(fired)
        if self.dist is not None:
            dd = self.dist[np.ix_(idx, idx)]
            db = self.dist[idx, B]
        else:
            dist, pred = dijkstra(self.matrix, directed=False, indices=idx, return_predecessors=True)
            db = dist[:, B]
            dd = dist[:, idx]
        pairs = _exact_pairing(k, dd, db) if k <= self.exact_limit else _blossom_pairing(k, dd, db)
        mask = 0
        for i, j in pairs:
            if not np.isfinite(db[i] if j < 0 else dd[i, j]):
                raise DecodingError("syndrome has an unmatched defect with no path")
            target = B if j < 0 else idx[j]
            if self.dist is not None:
                mask ^= int(self.path_obs[idx[i], target])
            else:
                mask ^= self._path_obs(pred, i, target, idx[i])
        return mask


def _exact_pairing(k: int, dd: np.ndarray, db: np.ndarray) -> list[tuple[int, int]]:
    dd = dd.tolist()
    db = db.tolist()

    @lru_cache(maxsize=None)
    def best(mask: int) -> tuple[float, tuple]:
        if mask == 0:
            return 0.0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        cost, plan = best(rest)
        choice = (db[i] + cost, ((i, -1),) + plan)
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            c2, p2 = best(rest & ~(1 << j))
            c = dd[i][j] + c2
            if c < choice[0] - 1e-12:
                choice = (c, ((i, j),) + p2)
        return choice

    return list(best((1 << k) - 1)[1])


def _blossom_pairing(k: int, dd: np.ndarray, db: np.ndarray) -> list[tuple[int, int]]:
    import networkx as nx

    g = nx.Graph()
    big = float(np.nanmax(np.where(np.isfinite(dd), dd, 0)) + np.nanmax(np.where(np.isfinite(db), db, 0)) + 1.0)
    for i in range(k):
        g.add_edge(("d", i), ("b", i), weight=big - db[i])
        for j in range(i + 1, k):
            g.add_edge(("d", i), ("d", j), weight=big - dd[i, j])
            g.add_edge(("b", i), ("b", j), weight=big)
    matching = nx.max_weight_matching(g, maxcardinality=True)
    pairs = []
    for a, b in matching:
        if a[0] == "d" and b[0] == "d":
            pairs.append((a[1], b[1]))
        elif a[0] == "d" and b[0] == "b":
            pairs.append((a[1], -1))
        elif b[0] == "d" and a[0] == "b":
            pairs.append((b[1], -1))
    return pairs


DECODERS = {"uf": UnionFindDecoder, "union-find": UnionFindDecoder, "mwpm": MatchingDecoder, "matching": MatchingDecoder}


def make_decoder(graph: DetectorGraph, kind: str = "uf"):
    try:
        return DECODERS[kind](graph)
    except KeyError:
        raise ValueError(f"unknown decoder {kind!r}; choose from {sorted(DECODERS)}") from None


def decode(graph: DetectorGraph, syndrome, kind: str = "uf") -> np.ndarray:
    return make_decoder(graph, kind).decode(syndrome)


def decode_experiment(circuit: StabCircuit, noise, shots: int, seed: int = 0, decoder: str = "uf",
                      importance: float | None = None, graph: DetectorGraph | None = None, **extra):
    """Sample ``circuit`` under ``noise``, decode every shot, return the logical error rate.

    ``noise`` may be None when the circuit already carries explicit noise
    sites. The per-observable failure counts land in ``extra["per_observable"]``.
    """
    from .surface import estimate_from_flags

    if shots < 1:
        raise ValueError("shots must be >= 1")
    if noise is not None and not noise.is_zero():
        circuit = noise.apply(circuit)
    if not circuit.has_noise():
        res = sample_circuit(circuit, None, shots=shots, seed=seed)
        if res.detectors.any():
            raise DecodingError("detectors fired in a noiseless circuit")
        fail = res.observables
        return estimate_from_flags(fail.any(axis=1), per_observable=fail.sum(axis=0).tolist(), **extra)
    graph = graph or build_detector_graph(circuit)
    dec = make_decoder(graph, decoder)
    fails = []
    weights = []
    chunk = 1 << 16
    for b, start in enumerate(range(0, shots, chunk)):
        n = min(chunk, shots - start)
        res = sample_circuit(circuit, None, shots=n, seed=seed * 1_000_003 + b, importance=importance)
        pred = dec.decode_batch(res.detectors)
        fails.append(pred != res.observables)
        if res.log_weights is not None:
            weights.append(np.exp(res.log_weights))
    fail = np.concatenate(fails)
    w = np.concatenate(weights) if weights else None
    per_obs = [float(np.sum(fail[:, k] * (w if w is not None else 1))) for k in range(fail.shape[1])]
    return estimate_from_flags(fail.any(axis=1), w, per_observable=per_obs, **extra)


# -- syndrome files -----------------------------------------------------------

_HEADER = struct.Struct("<4sII")
_MAGIC = b"SYN1"


def write_syndromes(path, syndromes: np.ndarray) -> None:
    """Packed-bit syndrome file: magic, detector count, shot count, then one padded row per shot."""
    syn = np.asarray(syndromes, dtype=bool)
    shots, dets = syn.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, dets, shots))
        fh.write(np.packbits(syn, axis=1, bitorder="little").tobytes())


def read_syndromes(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError("truncated syndrome header")
        magic, dets, shots = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError("not a syndrome file")
        row = (dets + 7) // 8
        body = fh.read()
    if len(body) != row * shots:
        raise ValueError(f"expected {row * shots} payload bytes, found {len(body)}")
    packed = np.frombuffer(body, dtype=np.uint8).reshape(shots, row)
    return np.unpackbits(packed, axis=1, count=dets, bitorder="little").astype(bool)
