"""Lower gate-list circuits to hybrid programs.

Two passes. ``allocate_encodings`` is a greedy linear scan over the gate list
that keeps a bounded pool of encoded qubits, like a register allocator with
farthest-next-use spilling. ``route`` replays the resulting operation stream
on a :class:`~hybridqec.qccd.QccdMachine`, inserting patch moves (SABRE-style
lookahead) and bare-ion moves so every instruction is legal.

Conversion accounting: a qubit encoded before any gate touched it starts in
|0>, which a patch can prepare directly, and shrinks after the last gate are
replaced by logical readout. Both are recorded as ``free`` events and left out
of ``nc``.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field

import numpy as np

from .isa import HybridInstruction, HybridProgram
from .qccd import QccdLayout, QccdMachine, slot_distance

PAULIS = ("X", "Y", "Z")
FORCING_1Q = ("H", "S", "S_DAG", "RZ", "RX")
ONE_QUBIT = PAULIS + FORCING_1Q
_QASM_NAMES = {"h": "H", "s": "S", "sdg": "S_DAG", "x": "X", "y": "Y", "z": "Z",
               "cx": "CNOT", "cnot": "CNOT", "rz": "RZ", "rx": "RX"}
_QASM_OUT = {"H": "h", "S": "s", "S_DAG": "sdg", "X": "x", "Y": "y", "Z": "z", "CNOT": "cx", "RZ": "rz", "RX": "rx"}


class CompileError(ValueError):
    pass


class InfeasibleError(CompileError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    angle: float | None = None

    @property
    def is_2q(self) -> bool:
        return self.name == "CNOT"


@dataclass
class InputCircuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate) -> None:
        if g.name not in ONE_QUBIT + ("CNOT",):
            raise CompileError(f"unsupported gate {g.name}")
        if len(g.qubits) != (2 if g.is_2q else 1):
            raise CompileError(f"{g.name} has wrong arity {g.qubits}")
        if any(not 0 <= q < self.num_qubits for q in g.qubits):
            raise CompileError(f"{g.name} on {g.qubits}: index out of range for {self.num_qubits} qubits")
        if g.is_2q and g.qubits[0] == g.qubits[1]:
            raise CompileError("CNOT control and target coincide")
        if (g.angle is not None) != (g.name in ("RZ", "RX")):
            raise CompileError(f"{g.name}: angle mismatch")
        if g.angle is not None and not math.isfinite(g.angle):
            raise CompileError("angles must be finite")

    def add(self, name: str, *qubits: int, angle: float | None = None) -> "InputCircuit":
        g = Gate(name, tuple(qubits), angle)
        self._check(g)
        self.gates.append(g)
        return self

    def cx(self, c: int, t: int) -> "InputCircuit":
        return self.add("CNOT", c, t)

    @property
    def num_2q(self) -> int:
        return sum(g.is_2q for g in self.gates)

    def to_qasm(self) -> str:
        lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{self.num_qubits}];"]
        for g in self.gates:
            args = ",".join(f"q[{q}]" for q in g.qubits)
            head = _QASM_OUT[g.name] + (f"({g.angle!r})" if g.angle is not None else "")
            lines.append(f"{head} {args};")
        return "\n".join(lines) + "\n"


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_angle(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)

    return ev(ast.parse(text.strip(), mode="eval").body)


_STMT = re.compile(r"^([a-z]+)\s*(?:\(([^)]*)\))?\s+(.+)$")
_ARG = re.compile(r"^\s*([A-Za-z_]\w*)\[(\d+)\]\s*$")


def parse_circuit(text: str) -> InputCircuit:
    """Parse the OPENQASM-2 subset: one ``qreg``, gates h s sdg x y z cx rz rx."""
    n = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        for stmt in filter(None, (s.strip() for s in line.split(";"))):
            low = stmt.lower()
            if low.startswith("openqasm") or low.startswith("include") or low.startswith("barrier"):
                continue
            if low.startswith("creg") or low.startswith("measure"):
                continue
            if low.startswith("qreg"):
                m = re.match(r"qreg\s+\w+\[(\d+)\]$", stmt)
                if not m or n is not None:
                    raise CompileError(f"line {lineno}: expected a single 'qreg name[n]'")
                n = int(m.group(1))
                continue
            m = _STMT.match(stmt)
            if not m or m.group(1) not in _QASM_NAMES:
                raise CompileError(f"line {lineno}: unsupported statement {stmt!r}")
            name = _QASM_NAMES[m.group(1)]
            angle = None
            if m.group(2) is not None:
                try:
                    angle = _eval_angle(m.group(2))
                except (ValueError, SyntaxError, ZeroDivisionError):
                    raise CompileError(f"line {lineno}: bad angle {m.group(2)!r}") from None
            qs = []
            for a in m.group(3).split(","):
                am = _ARG.match(a)
                if not am:
                    raise CompileError(f"line {lineno}: bad operand {a.strip()!r}")
                qs.append(int(am.group(2)))
            gates.append(Gate(name, tuple(qs), angle))
    if n is None:
        n = 1 + max((q for g in gates for q in g.qubits), default=-1)
    try:
        return InputCircuit(n, gates)
    except CompileError as exc:
        raise CompileError(f"invalid circuit: {exc}") from None


def random_circuit(n: int, num_gates: int, rng, p2: float = 0.5, clifford_only: bool = True) -> InputCircuit:
    """Random circuit over the supported gate set; rotations use multiples of pi/2 when ``clifford_only``."""
    rng = np.random.default_rng(rng)
    circ = InputCircuit(n)
    for _ in range(num_gates):
        if n >= 2 and rng.random() < p2:
            c, t = rng.choice(n, 2, replace=False)
            circ.cx(int(c), int(t))
        else:
            name = ONE_QUBIT[rng.integers(len(ONE_QUBIT))]
            q = int(rng.integers(n))
            angle = None
            if name in ("RZ", "RX"):
                angle = float(rng.integers(4)) * math.pi / 2 if clifford_only else float(rng.uniform(0, 2 * math.pi))
            circ.add(name, q, angle=angle)
    return circ


# -- encoding allocation -----------------------------------------------------------


@dataclass(frozen=True)
class ScheduleEvent:
    kind: str  # encode | shrink
    qubit: int
    t: int  # index of the gate that triggered it (num_gates for final shrinks)
    free: bool = False


@dataclass
class EncodingSchedule:
    num_qubits: int
    max_logic: int
    n2: int
    events: list[ScheduleEvent]
    ops: list[tuple]
    pool_trace: list[frozenset]
    evictions: int = 0

    @property
    def nc(self) -> int:
        return sum(not e.free for e in self.events)

    def event_tuples(self) -> list[tuple]:
        return [(e.kind, e.qubit, e.t, e.free) for e in self.events]

    def to_dict(self) -> dict:
        n2, nc, ratio = conversion_stats(self)
        return {
            "num_qubits": self.num_qubits, "max_logic": self.max_logic,
            "n2": n2, "nc": nc, "ratio": None if math.isinf(ratio) else ratio,
            "evictions": self.evictions,
            "events": [list(e) for e in self.event_tuples()],
        }


def conversion_stats(schedule: EncodingSchedule) -> tuple[int, int, float]:
    n2, nc = schedule.n2, schedule.nc
    return n2, nc, (n2 / nc if nc else math.inf)


def allocate_encodings(circuit: InputCircuit, max_logic: int, proactive: bool = False) -> EncodingSchedule:
    """Greedy linear-scan allocation with farthest-next-use eviction.

    Rotations and H/S on an encoded qubit force a shrink first; Paulis on an
    encoded qubit join a compile-time Pauli frame that is propagated through
    CNOTs and emitted as bare gates after the qubit's next shrink. With
    ``proactive`` a qubit is shrunk right after its last CNOT before a forced
    shrink or the end of the program; such shrinks are counted like any other.
    """
    gates = circuit.gates
    n = circuit.num_qubits
    if any(g.is_2q for g in gates) and max_logic < 2:
        raise InfeasibleError("a circuit with CNOTs needs MAX_LOGIC >= 2")
    T = len(gates)
    # per qubit: sorted indices of 2Q uses and forcing 1Q gates
    uses2 = [[] for _ in range(n)]
    force = [[] for _ in range(n)]
    last = [-1] * n
    for t, g in enumerate(gates):
        for q in g.qubits:
            last[q] = t
        if g.is_2q:
            for q in g.qubits:
                uses2[q].append(t)
        elif g.name in FORCING_1Q:
            force[g.qubits[0]].append(t)
    ptr2 = [0] * n
    ptrf = [0] * n

    def next_use(q, t):
        while ptr2[q] < len(uses2[q]) and uses2[q][ptr2[q]] <= t:
            ptr2[q] += 1
        while ptrf[q] < len(force[q]) and force[q][ptrf[q]] <= t:
            ptrf[q] += 1
        nu = uses2[q][ptr2[q]] if ptr2[q] < len(uses2[q]) else math.inf
        nf = force[q][ptrf[q]] if ptrf[q] < len(force[q]) else math.inf
        return math.inf if nf < nu else nu

    pool: set[int] = set()
    touched = [False] * n
    frame = [[0, 0] for _ in range(n)]
    events: list[ScheduleEvent] = []
    ops: list[tuple] = []
    trace: list[frozenset] = []
    evictions = 0

    def shrink(q, t, free=False):
        pool.discard(q)
        events.append(ScheduleEvent("shrink", q, t, free))
        ops.append(("shrink", q))
        fx, fz = frame[q]
        if fx or fz:
            ops.append(("gate", q, {(1, 0): "X", (0, 1): "Z", (1, 1): "Y"}[(fx, fz)], None))
        frame[q] = [0, 0]

    for t, g in enumerate(gates):
        if g.is_2q:
            for q in g.qubits:
                if q in pool:
                    continue
                if len(pool) >= max_logic:
                    inactive = [p for p in pool if p not in g.qubits]
                    victim = max(inactive, key=lambda p: (next_use(p, t), -p))
                    shrink(victim, t)
                    evictions += 1
                events.append(ScheduleEvent("encode", q, t, free=not touched[q]))
                ops.append(("encode", q))
                pool.add(q)
                touched[q] = True
            c, tg = g.qubits
            frame[tg][0] ^= frame[c][0]
            frame[c][1] ^= frame[tg][1]
            ops.append(("cx", c, tg))
            if proactive:
                for q in g.qubits:
                    if next_use(q, t) == math.inf and last[q] > t:
                        shrink(q, t)
        else:
            q = g.qubits[0]
            if q in pool and g.name in PAULIS:
                frame[q][0] ^= g.name in ("X", "Y")
                frame[q][1] ^= g.name in ("Z", "Y")
            else:
                if q in pool:
                    shrink(q, t)
                ops.append(("gate", q, g.name, g.angle))
                touched[q] = True
        if len(pool) > max_logic:
            raise AssertionError("pool bound violated")
        trace.append(frozenset(pool))
    for q in sorted(pool):
        shrink(q, T, free=True)
    return EncodingSchedule(n, max_logic, circuit.num_2q, events, ops, trace, evictions)


def replay_schedule(schedule: EncodingSchedule) -> list[str]:
    """Check the domain rules on an operation stream; returns violations."""
    pool: set[int] = set()
    problems = []
    for i, op in enumerate(schedule.ops):
        if op[0] == "encode":
            if op[1] in pool:
                problems.append(f"op {i}: q{op[1]} encoded twice")
            pool.add(op[1])
        elif op[0] == "shrink":
            if op[1] not in pool:
                problems.append(f"op {i}: q{op[1]} shrunk while bare")
            pool.discard(op[1])
        elif op[0] == "cx":
            if not {op[1], op[2]} <= pool:
                problems.append(f"op {i}: CNOT on a bare operand")
        elif op[0] == "gate" and op[1] in pool:
            problems.append(f"op {i}: 1Q gate on encoded q{op[1]}")
        if len(pool) > schedule.max_logic:
            problems.append(f"op {i}: pool exceeds MAX_LOGIC")
    return problems


# -- routing -----------------------------------------------------------------------


@dataclass(frozen=True)
class RoutingConfig:
    lookahead: int = 20
    extended_weight: float = 0.5
    encode_config: str = "center:triangles"


class _Router:
    def __init__(self, schedule: EncodingSchedule, layout: QccdLayout, cfg: RoutingConfig):
        self.schedule = schedule
        self.layout = layout
        self.cfg = cfg
        self.machine = QccdMachine(layout, schedule.num_qubits, schedule.max_logic)
        self.out: list[HybridInstruction] = []
        self.moves = {"logic": 0, "bare": 0}

    def emit(self, ins: HybridInstruction) -> None:
        self.machine.execute_instruction(ins)
        self.out.append(ins)
        if ins.opcode.startswith("LogicMove"):
            self.moves["logic"] += 1
        elif ins.opcode.startswith("BareMove"):
            self.moves["bare"] += 1

    # block motion
    def _step_block(self, p: int, dst: tuple[int, int]) -> None:
        src = self.machine.block_slot[p]
        if dst[0] != src[0]:
            self.emit(HybridInstruction("LogicMove_Vertical", patch=p, step=dst[0] - src[0]))
        else:
            self.emit(HybridInstruction("LogicMove_Horizontal", patch=p, step=dst[1] - src[1]))

    def _move_block_to(self, p: int, target: tuple[int, int]) -> None:
        while self.machine.block_slot[p] != target:
            r, c = self.machine.block_slot[p]
            if r != target[0]:
                self._step_block(p, (r + (1 if target[0] > r else -1), c))
            else:
                self._step_block(p, (r, c + (1 if target[1] > c else -1)))

    # bare-ion motion
    def _bare_walk(self, q: int, target: int, horizontal_first: bool) -> None:
        lo = self.layout
        while True:
            r, c = lo.trap_coord(self.machine.ions[q].trap)
            tr, tc = lo.trap_coord(target)
            if (r, c) == (tr, tc):
                return
            if (horizontal_first and c != tc) or r == tr:
                self.emit(HybridInstruction("BareMove_Horizontal", qubit=q, step=1 if tc > c else -1))
            else:
                self.emit(HybridInstruction("BareMove_Vertical", qubit=q, step=1 if tr > r else -1))

    def _next_partner(self, i: int, q: int) -> int | None:
        for op in self.schedule.ops[i + 1:]:
            if op[0] == "cx" and q in op[1:]:
                return op[2] if op[1] == q else op[1]
            if op[0] in ("shrink", "gate") and op[1] == q:
                return None
        return None

    def encode(self, i: int, q: int) -> None:
        m, lo = self.machine, self.layout
        partner = self._next_partner(i, q)
        partner_slot = m.block_slot[m.encoded[partner]] if partner in m.encoded else None
        home_col = lo.trap_coord(m.ions[q].trap)[1]
        best = None
        for p in range(m.max_logic):
            if m.block_qubit[p] is not None:
                continue
            for s in lo.boundary_slots:
                cost = slot_distance(m.block_slot[p], s)
                if partner_slot is not None:
                    cost += slot_distance(s, partner_slot)
                bare = abs(lo.trap_coord(lo.slot_center(s))[1] - home_col)
                key = (cost, bare, p, s)
                if best is None or key < best:
                    best = key
        _, _, p, s = best
        self._move_block_to(p, s)
        self._bare_walk(q, lo.slot_center(s), horizontal_first=True)
        self.emit(HybridInstruction("Encode_Boundary", qubit=q, patch=p, d=lo.d, config=self.cfg.encode_config))

    def shrink(self, q: int) -> None:
        m, lo = self.machine, self.layout
        p = m.encoded[q]
        home = lo.home_trap(q)
        home_col = lo.trap_coord(home)[1]
        s = min(lo.boundary_slots,
                key=lambda s: (slot_distance(m.block_slot[p], s), abs(lo.trap_coord(lo.slot_center(s))[1] - home_col), s))
        self._move_block_to(p, s)
        self.emit(HybridInstruction("Shrink_Boundary", patch=p))
        self._bare_walk(q, home, horizontal_first=False)

    def _extended(self, i: int) -> list[tuple[int, int]]:
        m = self.machine
        ext = []
        for op in self.schedule.ops[i + 1:]:
            if len(ext) >= self.cfg.lookahead:
                break
            if op[0] == "cx" and op[1] in m.encoded and op[2] in m.encoded:
                ext.append((m.encoded[op[1]], m.encoded[op[2]]))
        return ext

    def cnot(self, i: int, c: int, t: int) -> None:
        m, lo = self.machine, self.layout
        pc, pt = m.encoded[c], m.encoded[t]
        ext = self._extended(i)
        while slot_distance(m.block_slot[pc], m.block_slot[pt]) > 1:
            front = slot_distance(m.block_slot[pc], m.block_slot[pt])
            best = None
            for p in (pc, pt):
                r, col = m.block_slot[p]
                for axis, dst in (("v", (r - 1, col)), ("v", (r + 1, col)), ("h", (r, col - 1)), ("h", (r, col + 1))):
                    if not lo.has_slot(dst):
                        continue
                    slots = list(m.block_slot)
                    other = m.block_at(dst)
                    if other is not None:
                        slots[other] = slots[p]
                    slots[p] = dst
                    nf = slot_distance(slots[pc], slots[pt])
                    if nf >= front:
                        continue
                    score = nf
                    if ext:
                        score += self.cfg.extended_weight * sum(
                            max(slot_distance(slots[a], slots[b]) - 1, 0) for a, b in ext) / len(ext)
                    key = (score, p, dst)
                    if best is None or key < best:
                        best = key
            _, p, dst = best
            self._step_block(p, dst)
        self.emit(HybridInstruction("Logic_2Q_Transversal", patch=pc, patch2=pt))

    def run(self) -> list[HybridInstruction]:
        for i, op in enumerate(self.schedule.ops):
            kind = op[0]
            if kind == "encode":
                self.encode(i, op[1])
            elif kind == "shrink":
                self.shrink(op[1])
            elif kind == "cx":
                self.cnot(i, op[1], op[2])
            else:
                _, q, name, angle = op
                self.emit(HybridInstruction("Bare_1Q_Gate", qubit=q, gate=name, angle=angle))
        return self.out


def route(schedule: EncodingSchedule, circuit: InputCircuit | None = None, layout: QccdLayout | None = None,
          d: int = 3, config: RoutingConfig | None = None) -> HybridProgram:
    """Place and move patches and bare ions so the schedule runs on ``layout``."""
    cfg = config or RoutingConfig()
    n = schedule.num_qubits if circuit is None else circuit.num_qubits
    layout = layout or QccdLayout.for_program(n, d, schedule.max_logic)
    router = _Router(schedule, layout, cfg)
    instrs = router.run()
    n2, nc, ratio = conversion_stats(schedule)
    meta = {
        "n2": n2, "nc": nc, "ratio": None if math.isinf(ratio) else ratio,
        "logic_moves": router.moves["logic"], "bare_moves": router.moves["bare"],
        "cost": router.machine.cost.to_dict(),
    }
    return HybridProgram(n, layout.d, schedule.max_logic, layout, tuple(instrs), meta)


@dataclass
class CompileResult:
    program: HybridProgram
    schedule: EncodingSchedule

    def stats(self) -> dict:
        return {**self.schedule.to_dict(), **{k: v for k, v in self.program.metadata.items() if k not in ("n2", "nc", "ratio")}}


def compile_circuit(circuit: InputCircuit, max_logic: int, d: int = 3, layout: QccdLayout | None = None,
                    config: RoutingConfig | None = None, proactive: bool = False) -> CompileResult:
    schedule = allocate_encodings(circuit, max_logic, proactive=proactive)
    if layout is not None and layout.d != d:
        raise CompileError(f"layout distance {layout.d} differs from d={d}")
    if layout is not None and max_logic > len(layout.slots):
        raise InfeasibleError(f"MAX_LOGIC={max_logic} exceeds the {len(layout.slots)} patch slots of the layout")
    return CompileResult(route(schedule, circuit, layout, d, config), schedule)
