"""In-situ conversion between a bare qubit and a surface-code patch.

Enlarge: the bare qubit sits on a data site of the target patch. Data qubits on
the X_L column are prepared in |+>, those on the Z_L row in |0>, and the rest
per an :class:`InitConfig` policy. One stabilizer round then fixes the gauge:
checks whose support was prepared entirely in their own basis read +1, the
others are random and only become comparable from the next round on. After
that come the QEC rounds.

Shrink: every data qubit except the bare one is measured destructively in its
config basis. The parity of the X outcomes on the column fixes the sign of X_b,
and the parity of the Z outcomes on the row fixes the sign of Z_b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .circuit import NoiseSpec, StabCircuit
from .surface import LerEstimate, SurfacePatch, append_round, build_patch, detector_coords

POLICIES = ("triangles", "lines", "random", "legacy-injection")
DIRECTIONS = ("enlarge", "shrink", "roundtrip")

# short names used on the command line
CONFIG_NAMES = {
    "center": ("center", "triangles"),
    "triangles": ("center", "triangles"),
    "lines": ("center", "lines"),
    "random": ("center", "random"),
    "corner": ("corner", "legacy-injection"),
    "legacy": ("corner", "legacy-injection"),
}

# single-qubit stabilizer states: preparation from |0> and the (basis, eigenvalue) they fix
STATE_PREP = {
    "0": (),
    "1": ("X",),
    "+": ("H",),
    "-": ("H", "Z"),
    "+i": ("H", "S"),
    "-i": ("H", "S_DAG"),
}
STATE_EIGEN = {"0": ("Z", 1), "1": ("Z", -1), "+": ("X", 1), "-": ("X", -1), "+i": ("Y", 1), "-i": ("Y", -1)}


@dataclass(frozen=True)
class InitConfig:
    """Bare-qubit placement plus the preparation policy for the other data qubits."""

    placement: str | tuple[int, int] = "center"
    policy: str = "triangles"
    seed: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown ancilla policy {self.policy!r}; choose from {POLICIES}")
        if isinstance(self.placement, str) and self.placement not in ("center", "corner"):
            raise ValueError(f"placement must be 'center', 'corner' or a (row, col) pair, got {self.placement!r}")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "InitConfig":
        """``center``, ``corner``, ``lines``, ``random`` or ``placement:policy``."""
        text = text.strip().lower()
        if text in CONFIG_NAMES:
            placement, policy = CONFIG_NAMES[text]
            return cls(placement, policy, seed)
        if ":" in text:
            where, policy = text.split(":", 1)
            policy = CONFIG_NAMES.get(policy, (None, policy))[1]
            if where.startswith("("):
                r, c = (int(v) for v in where.strip("()").split(","))
                return cls((r, c), policy, seed)
            return cls(where, policy, seed)
        raise ValueError(f"unknown config {text!r}")

    @property
    def label(self) -> str:
        where = self.placement if isinstance(self.placement, str) else "({},{})".format(*self.placement)
        return f"{where}:{self.policy}"

    def intersection(self, d: int) -> tuple[int, int]:
        if self.placement == "center":
            return ((d - 1) // 2, (d - 1) // 2)
        if self.placement == "corner":
            return (0, 0)
        return tuple(self.placement)

    def patch(self, d: int) -> SurfacePatch:
        return build_patch(d, self.intersection(d))

    def basis_map(self, patch: SurfacePatch) -> dict[int, str]:
        """Preparation basis ('X' for |+>, 'Z' for |0>) of every data qubit except the bare one."""
        d = patch.d
        br, bc = patch.coord(patch.bare)
        fixed = {q: "X" for q in patch.x_logical if q != patch.bare}
        fixed.update({q: "Z" for q in patch.z_logical if q != patch.bare})
        free = [q for q in range(patch.num_data) if q != patch.bare and q not in fixed]
        out = dict(fixed)
        if self.policy == "lines":
            out.update({q: "Z" for q in free})
        elif self.policy == "random":
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(d, br, bc)))
            out.update({q: "X" if b else "Z" for q, b in zip(free, rng.integers(0, 2, len(free)))})
        elif self.policy == "legacy-injection":
            # plain diagonal split around the injection site, no optimization
            out.update({q: _triangle_rule(patch, q) for q in free})
        else:
            out.update(_triangle_assignment(patch, fixed, free))
        return out


def _triangle_rule(patch: SurfacePatch, q: int) -> str:
    br, bc = patch.coord(patch.bare)
    r, c = patch.coord(q)
    dr, dc = abs(r - br), abs(c - bc)
    if dc == 0:
        return "X"
    if dr == 0:
        return "Z"
    return "X" if dr >= dc else "Z"


def _triangle_assignment(patch: SurfacePatch, fixed: dict[int, str], free: list[int]) -> dict[int, str]:
    """Choose bases for the free qubits maximizing the number of deterministic checks.

    Two checks of opposite type that share a free qubit cannot both be
    deterministic, so the best choice is a maximum independent set in a
    bipartite conflict graph, solved exactly as a min cut. Checks get a small
    bonus for agreeing with the diagonal-triangle rule, which picks among the
    optimal solutions and fills in qubits no chosen check covers.
    """
    checks = patch.checks
    feasible = [
        k for k, s in enumerate(checks)
        if patch.bare not in s.support and all(fixed.get(q, s.kind) == s.kind for q in s.support)
    ]
    big = 10 * (patch.num_data + 1)
    g = nx.DiGraph()
    g.add_nodes_from(["s", "t"])
    for k in feasible:
        s = checks[k]
        w = big + sum(_triangle_rule(patch, q) == s.kind for q in s.support)
        if s.kind == "X":
            g.add_edge("s", k, capacity=w)
        else:
            g.add_edge(k, "t", capacity=w)
    xs = [k for k in feasible if checks[k].kind == "X"]
    zs = [k for k in feasible if checks[k].kind == "Z"]
    for a in xs:
        sa = set(checks[a].support)
        for b in zs:
            if sa.intersection(checks[b].support):
                g.add_edge(a, b)  # infinite capacity
    _, (src_side, _) = nx.minimum_cut(g, "s", "t")
    chosen = [k for k in xs if k in src_side] + [k for k in zs if k not in src_side]
    out = {}
    for k in sorted(chosen):
        for q in checks[k].support:
            if q not in fixed:
                out[q] = checks[k].kind
    for q in free:
        out.setdefault(q, _triangle_rule(patch, q))
    return out


@dataclass
class GaugeFrame:
    """Which checks read a deterministic +1 in the first round, plus gauge records and logical signs."""

    deterministic: tuple[bool, ...]
    kinds: tuple[str, ...]
    first_round: dict[int, int] = field(default_factory=dict)
    x_sign: int = 1
    z_sign: int = 1

    @property
    def num_deterministic(self) -> int:
        return int(sum(self.deterministic))

    @property
    def gauge_checks(self) -> list[int]:
        return [k for k, det in enumerate(self.deterministic) if not det]

    def count(self, kind: str) -> int:
        return sum(det for det, k in zip(self.deterministic, self.kinds) if k == kind)


def classify_stabilizers(patch: SurfacePatch, config: InitConfig | dict[int, str]) -> GaugeFrame:
    """Label every check deterministic or gauge-random for a preparation pattern.

    ``config`` may be an explicit basis map; a map that also covers the bare
    qubit describes a fully known product state.
    """
    basis = config.basis_map(patch) if isinstance(config, InitConfig) else dict(config)
    expected = set(range(patch.num_data))
    keys = set(basis)
    if not (keys == expected or keys == expected - {patch.bare}):
        raise ValueError("basis map does not match the patch's data qubits")
    if any(b not in ("X", "Z") for b in basis.values()):
        raise ValueError("basis map values must be 'X' or 'Z'")
    det = tuple(all(basis.get(q) == s.kind for q in s.support) for s in patch.checks)
    return GaugeFrame(det, tuple(s.kind for s in patch.checks))


# -- circuit construction -------------------------------------------------------


@dataclass
class EncodeRecords:
    rounds: list[list[int]]
    frame: GaugeFrame

    @property
    def last(self) -> list[int]:
        return self.rounds[-1]


def append_encode(circ: StabCircuit, patch: SurfacePatch, config: InitConfig, qec_rounds: int | None = None,
                  qmap=None, t0: float = 0.0) -> EncodeRecords:
    """Ancilla preparation, the gauge-fixing round, then ``qec_rounds`` QEC rounds (default d)."""
    rounds = patch.d if qec_rounds is None else qec_rounds
    if rounds < 1:
        raise ValueError("qec_rounds must be >= 1")
    m = qmap if qmap is not None else range(patch.num_qubits)
    basis = config.basis_map(patch)
    frame = classify_stabilizers(patch, basis)
    for q in sorted(basis):
        circ.append("R" + basis[q], m[q])
    recs = append_round(circ, patch, m)
    for k, det in enumerate(frame.deterministic):
        if det:
            circ.detector([recs[k]], detector_coords(patch, k, t0))
    history = [recs]
    for t in range(rounds):
        recs = append_round(circ, patch, m)
        for k in range(len(patch.checks)):
            circ.detector([recs[k], history[-1][k]], detector_coords(patch, k, t0 + t + 1))
        history.append(recs)
    return EncodeRecords(history, frame)


def build_encode_circuit(patch: SurfacePatch, config: InitConfig, qec_rounds: int | None = None) -> StabCircuit:
    """Encode circuit on the patch's qubits; the bare qubit's state is whatever came before."""
    circ = StabCircuit(patch.num_qubits)
    append_encode(circ, patch, config, qec_rounds)
    return circ


@dataclass
class ShrinkRecipe:
    """How to read the bare qubit after a shrink.

    ``x_fix`` records: odd parity means X_b flipped sign (apply Z_b).
    ``z_fix`` records: odd parity means Z_b flipped sign (apply X_b).
    """

    basis: str
    bare_record: int
    x_fix: tuple[int, ...]
    z_fix: tuple[int, ...]
    sign_correction: bool = True

    @property
    def correction_records(self) -> tuple[int, ...]:
        if not self.sign_correction:
            return ()
        return {"X": self.x_fix, "Z": self.z_fix, "Y": self.x_fix + self.z_fix}[self.basis]

    def fixes(self, measurements: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per shot: does the Z_b fix fire, does the X_b fix fire."""
        meas = np.atleast_2d(measurements)
        zb = np.bitwise_xor.reduce(meas[:, list(self.x_fix)], axis=1) if self.x_fix else np.zeros(len(meas), bool)
        xb = np.bitwise_xor.reduce(meas[:, list(self.z_fix)], axis=1) if self.z_fix else np.zeros(len(meas), bool)
        return zb, xb

    def corrected(self, measurements: np.ndarray) -> np.ndarray:
        """Corrected bare-qubit outcome per shot as +1/-1."""
        meas = np.atleast_2d(measurements)
        recs = [self.bare_record, *self.correction_records]
        bits = np.bitwise_xor.reduce(meas[:, recs], axis=1)
        return np.where(bits, -1, 1)


def append_shrink_data(circ: StabCircuit, patch: SurfacePatch, config: InitConfig,
                       last_round: list[int] | None = None, qmap=None,
                       t: float = 0.0) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Destructively measure every data qubit but the bare one in its config basis.

    Returns the record tuples ``(x_fix, z_fix)``: odd parity of ``x_fix`` means
    the bare qubit needs Z_b, odd ``z_fix`` means it needs X_b. With
    ``last_round`` given, checks whose whole support was measured in their own
    basis get a final detector against that round.
    """
    m = qmap if qmap is not None else range(patch.num_qubits)
    cfg = config.basis_map(patch)
    rec = {}
    for q in sorted(cfg):
        rec[q] = circ.measure(cfg[q], m[q])
    if last_round is not None:
        for k, s in enumerate(patch.checks):
            if patch.bare not in s.support and all(cfg[q] == s.kind for q in s.support):
                circ.detector([last_round[k], *(rec[q] for q in s.support)], detector_coords(patch, k, t))
    x_fix = tuple(rec[q] for q in patch.x_logical if q != patch.bare)
    z_fix = tuple(rec[q] for q in patch.z_logical if q != patch.bare)
    return x_fix, z_fix


def append_shrink(circ: StabCircuit, patch: SurfacePatch, config: InitConfig, basis: str = "X",
                  last_round: list[int] | None = None, qmap=None, sign_correction: bool = True,
                  t: float = 0.0) -> ShrinkRecipe:
    """Shrink, then measure the bare qubit in ``basis``."""
    basis = basis.upper()
    if basis not in ("X", "Y", "Z"):
        raise ValueError("basis must be X, Y or Z")
    m = qmap if qmap is not None else range(patch.num_qubits)
    x_fix, z_fix = append_shrink_data(circ, patch, config, last_round, qmap, t)
    b = m[patch.bare]
    if basis == "Y":
        circ.append("S_DAG", b)
        circ.append("H", b)
    bare = circ.measure("Z" if basis == "Y" else basis, b)
    return ShrinkRecipe(basis, bare, x_fix, z_fix, sign_correction)


def build_shrink_circuit(patch: SurfacePatch, config: InitConfig, basis: str = "X",
                         sign_correction: bool = True) -> tuple[StabCircuit, ShrinkRecipe]:
    """Standalone shrink circuit and the recipe for reading the bare qubit."""
    circ = StabCircuit(patch.num_qubits)
    recipe = append_shrink(circ, patch, config, basis, sign_correction=sign_correction)
    return circ, recipe


def _prepare_bare(circ: StabCircuit, q: int, state: str) -> None:
    if state not in STATE_PREP:
        raise ValueError(f"unknown bare state {state!r}; choose from {sorted(STATE_PREP)}")
    circ.append("RZ", q)
    for g in STATE_PREP[state]:
        circ.append(g, q)


@dataclass
class ConversionCircuit:
    circuit: StabCircuit
    recipe: ShrinkRecipe | None
    frame: GaugeFrame
    expected: int


def conversion_circuit(
    patch: SurfacePatch,
    config: InitConfig,
    state: str = "+",
    direction: str = "roundtrip",
    noise: NoiseSpec | None = None,
    qec_rounds: int | None = None,
    sign_correction: bool = True,
    readout_basis: str | None = None,
) -> ConversionCircuit:
    """Prepare ``state`` on the bare qubit, enlarge, then read it back.

    ``enlarge`` reads the logical qubit out transversally, the other directions
    shrink first. Noise (if any) hits only the stage under test: the enlarge for
    ``enlarge``, the shrink for ``shrink``, both for ``roundtrip``. The single
    observable is the recovered eigenvalue of ``state``.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    basis, expected = STATE_EIGEN[state]
    if readout_basis is not None:
        basis = readout_basis.upper()
    circ = StabCircuit(patch.num_qubits)
    _prepare_bare(circ, patch.bare, state)
    start_encode = len(circ.instructions)
    enc = append_encode(circ, patch, config, qec_rounds)
    start_readout = len(circ.instructions)
    t_end = len(enc.rounds)
    recipe = None
    if direction == "enlarge":
        if basis == "Y":
            raise ValueError("transversal readout supports X or Z only")
        data = [circ.measure(basis, q) for q in range(patch.num_data)]
        for k, s in enumerate(patch.checks):
            if s.kind == basis:
                circ.detector([enc.last[k], *(data[q] for q in s.support)], detector_coords(patch, k, t_end))
        logical = patch.z_logical if basis == "Z" else patch.x_logical
        circ.observable([data[q] for q in logical])
    else:
        recipe = append_shrink(circ, patch, config, basis, enc.last, sign_correction=sign_correction, t=t_end)
        circ.observable([recipe.bare_record, *recipe.correction_records])
    if noise is not None and not noise.is_zero():
        n = len(circ.instructions)
        mask = np.zeros(n, dtype=bool)
        if direction in ("enlarge", "roundtrip"):
            mask[start_encode:start_readout] = True
        if direction in ("shrink", "roundtrip"):
            mask[start_readout:] = True
        circ = noise.apply(circ, mask=mask)
    return ConversionCircuit(circ, recipe, enc.frame, expected)


def conversion_ler(
    d: int,
    config: InitConfig | str,
    noise: NoiseSpec,
    shots: int,
    direction: str = "enlarge",
    seed: int = 0,
    decoder: str = "uf",
    states: tuple[str, ...] = ("0", "+"),
    qec_rounds: int | None = None,
    importance: float | None = None,
) -> LerEstimate:
    """Conversion logical error rate, maximized over the injected states.

    Each state gets ``shots`` shots; the returned estimate is the worst one and
    ``extra["per_state"]`` holds all of them.
    """
    from .decoder import decode_experiment

    cfg = InitConfig.parse(config) if isinstance(config, str) else config
    patch = cfg.patch(d)
    per_state = {}
    worst = None
    for i, state in enumerate(states):
        cc = conversion_circuit(patch, cfg, state, direction, noise, qec_rounds)
        est = decode_experiment(cc.circuit, None, shots, seed=seed * 7919 + i, decoder=decoder, importance=importance)
        per_state[state] = est.to_dict()
        if worst is None or est.rate > worst.rate:
            worst = est
    worst.extra.update({
        "d": d, "config": cfg.label, "direction": direction, "p2": noise.p2, "p1": noise.p1,
        "p_meas": noise.p_meas, "per_state": per_state,
        "deterministic_checks": classify_stabilizers(patch, cfg).num_deterministic,
    })
    return worst
