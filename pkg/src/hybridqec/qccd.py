"""Grid QCCD machine model: traps joined by 4-way junctions, ions, zones and costs.

Geometry. The trap grid is cut into patch-sized slots of d x d traps. Slot rows
``0..slot_rows-1`` form the logical zone, slot row ``slot_rows`` is the
boundary zone, and ``bare_rows`` plain trap rows below it form the bare zone.
Row indices grow downward, so a ``+1`` vertical move heads toward the bare
zone.

Patch blocks ``P0..P{k-1}`` are sets of ions that persist for the whole run.
A block has one ion per data position except the centre, plus d^2 - 1
ancilla ions, placed one data and one ancilla ion per trap. On encode, the
bare ion standing in the centre trap becomes the centre data qubit.

Costs are counted in shuttles (one ion changing trap), gates, measurements
and ticks (one parallel shuttle or gate layer).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

ROLES = ("logical", "boundary", "bare")


class QccdError(RuntimeError):
    """An instruction would violate the machine's physical constraints."""

    def __init__(self, message: str, rule: str = "E"):
        super().__init__(message)
        self.rule = rule


@dataclass(frozen=True)
class QccdLayout:
    d: int = 3
    slot_rows: int = 2
    slot_cols: int = 2
    bare_rows: int = 1
    capacity: int = 3

    def __post_init__(self):
        if self.d < 3 or self.d % 2 == 0:
            raise ValueError("layout distance must be odd and >= 3")
        for name in ("slot_rows", "slot_cols", "bare_rows", "capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def for_program(cls, num_qubits: int, d: int = 3, max_logic: int = 2, capacity: int = 3) -> "QccdLayout":
        """Smallest near-square logical zone holding ``max_logic`` blocks."""
        slot_cols = max(2, math.ceil(math.sqrt(max_logic)))
        slot_rows = max(1, math.ceil(max_logic / slot_cols))
        bare_rows = max(1, math.ceil(num_qubits / (slot_cols * d)))
        return cls(d, slot_rows, slot_cols, bare_rows, capacity)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rows"], out["cols"] = self.rows, self.cols
        out["zones"] = [
            {"role": "logical", "rows": [0, self.slot_rows * self.d], "cols": [0, self.cols]},
            {"role": "boundary", "rows": [self.slot_rows * self.d, (self.slot_rows + 1) * self.d], "cols": [0, self.cols]},
            {"role": "bare", "rows": [(self.slot_rows + 1) * self.d, self.rows], "cols": [0, self.cols]},
        ]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "QccdLayout":
        keys = ("d", "slot_rows", "slot_cols", "bare_rows", "capacity")
        unknown = set(data) - set(keys) - {"rows", "cols", "zones"}
        if unknown:
            raise ValueError(f"unknown layout keys: {sorted(unknown)}")
        layout = cls(**{k: int(data[k]) for k in keys if k in data})
        for k in ("rows", "cols"):
            if k in data and int(data[k]) != getattr(layout, k):
                raise ValueError(f"layout {k}={data[k]} disagrees with the slot geometry ({getattr(layout, k)})")
        return layout

    @classmethod
    def load(cls, path) -> "QccdLayout":
        """Read a JSON or TOML layout file."""
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ImportError:
                import tomli as tomllib
            data = tomllib.loads(text)
            data = data.get("layout", data)
        else:
            data = json.loads(text)
        return cls.from_dict(data)

    # -- geometry -------------------------------------------------------------

    @property
    def rows(self) -> int:
        return (self.slot_rows + 1) * self.d + self.bare_rows

    @property
    def cols(self) -> int:
        return self.slot_cols * self.d

    @property
    def num_traps(self) -> int:
        return self.rows * self.cols

    def trap(self, r: int, c: int) -> int:
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise QccdError(f"trap ({r}, {c}) is off the {self.rows}x{self.cols} grid")
        return r * self.cols + c

    def trap_coord(self, t: int) -> tuple[int, int]:
        return divmod(t, self.cols)

    def role(self, t: int) -> str:
        r, _ = self.trap_coord(t)
        if r < self.slot_rows * self.d:
            return "logical"
        if r < (self.slot_rows + 1) * self.d:
            return "boundary"
        return "bare"

    def adjacent(self, a: int, b: int) -> bool:
        """Vertical neighbours share a junction; horizontal ones are same-row segments."""
        (ra, ca), (rb, cb) = self.trap_coord(a), self.trap_coord(b)
        return abs(ra - rb) + abs(ca - cb) == 1

    def neighbors(self, t: int) -> list[int]:
        r, c = self.trap_coord(t)
        out = []
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            if 0 <= r + dr < self.rows and 0 <= c + dc < self.cols:
                out.append(self.trap(r + dr, c + dc))
        return out

    @property
    def slots(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.slot_rows + 1) for j in range(self.slot_cols)]

    @property
    def logical_slots(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.slot_rows) for j in range(self.slot_cols)]

    @property
    def boundary_slots(self) -> list[tuple[int, int]]:
        return [(self.slot_rows, j) for j in range(self.slot_cols)]

    def is_boundary_slot(self, slot: tuple[int, int]) -> bool:
        return slot[0] == self.slot_rows

    def has_slot(self, slot: tuple[int, int]) -> bool:
        return 0 <= slot[0] <= self.slot_rows and 0 <= slot[1] < self.slot_cols

    def slot_trap(self, slot: tuple[int, int], q: int) -> int:
        """Trap of patch-local data position ``q`` for a block at ``slot``."""
        r, c = divmod(q, self.d)
        return self.trap(slot[0] * self.d + r, slot[1] * self.d + c)

    def slot_center(self, slot: tuple[int, int]) -> int:
        return self.slot_trap(slot, (self.d * self.d - 1) // 2)

    def home_trap(self, q: int) -> int:
        r, c = divmod(q, self.cols)
        if r >= self.bare_rows:
            raise QccdError(f"bare zone has no home trap for qubit {q}")
        return self.trap((self.slot_rows + 1) * self.d + r, c)

    def bare_capacity(self) -> int:
        return self.bare_rows * self.cols


def slot_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass
class CostRecord:
    shuttles: int = 0
    gates_1q: int = 0
    gates_2q: int = 0
    measurements: int = 0
    ticks: int = 0

    def add(self, other: "CostRecord") -> None:
        for k in ("shuttles", "gates_1q", "gates_2q", "measurements", "ticks"):
            setattr(self, k, getattr(self, k) + getattr(other, k))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Ion:
    trap: int
    role: str  # program | patch-data | patch-ancilla
    block: int | None = None


@dataclass
class ExecResult:
    """What one instruction did: its cost, physical ion moves, and the gate-level operations to simulate."""

    cost: CostRecord = field(default_factory=CostRecord)
    moves: list[tuple[int, int, int]] = field(default_factory=list)  # (ion, from, to)
    kind: str = ""
    data: dict = field(default_factory=dict)


class QccdMachine:
    """Mutable machine state: ion positions, block placement and encoded qubits."""

    def __init__(self, layout: QccdLayout, num_qubits: int, max_logic: int, p_shuttle: float = 0.0):
        if max_logic < 1:
            raise ValueError("max_logic must be >= 1")
        if max_logic > len(layout.slots):
            raise QccdError(f"{max_logic} patch blocks do not fit in {len(layout.slots)} slots", rule="D")
        if num_qubits > layout.bare_capacity():
            raise QccdError(f"bare zone holds {layout.bare_capacity()} qubits, program needs {num_qubits}")
        self.layout = layout
        self.num_qubits = num_qubits
        self.max_logic = max_logic
        self.p_shuttle = p_shuttle
        d = layout.d
        self.center = (d * d - 1) // 2
        self.ions: list[Ion] = [Ion(layout.home_trap(q), "program") for q in range(num_qubits)]
        self.block_data: list[dict[int, int]] = []
        self.block_anc: list[list[int]] = []
        self.block_slot: list[tuple[int, int]] = []
        self.block_qubit: list[int | None] = []
        order = sorted(layout.slots, key=lambda s: (abs(s[0] - layout.slot_rows + 0.5), s[1]))
        for p in range(max_logic):
            slot = order[p]
            data, anc = {}, []
            for q in range(d * d):
                if q != self.center:
                    data[q] = len(self.ions)
                    self.ions.append(Ion(layout.slot_trap(slot, q), "patch-data", p))
            for k in range(d * d - 1):
                anc.append(len(self.ions))
                self.ions.append(Ion(layout.slot_trap(slot, k), "patch-ancilla", p))
            self.block_data.append(data)
            self.block_anc.append(anc)
            self.block_slot.append(slot)
            self.block_qubit.append(None)
        self.encoded: dict[int, int] = {}
        self.occupancy: dict[int, list[int]] = {}
        for i, ion in enumerate(self.ions):
            self.occupancy.setdefault(ion.trap, []).append(i)
        self._check_capacity()
        self.cost = CostRecord()

    # -- queries ---------------------------------------------------------------

    @property
    def num_ions(self) -> int:
        return len(self.ions)

    def count(self, trap: int) -> int:
        return len(self.occupancy.get(trap, ()))

    def snapshot(self) -> dict:
        return {
            "ions": [ion.trap for ion in self.ions],
            "blocks": [list(s) for s in self.block_slot],
            "encoded": dict(self.encoded),
        }

    def occupancy_map(self) -> dict[int, tuple[int, ...]]:
        return {t: tuple(sorted(v)) for t, v in self.occupancy.items() if v}

    def block_at(self, slot: tuple[int, int]) -> int | None:
        for p, s in enumerate(self.block_slot):
            if s == slot:
                return p
        return None

    def patch_qmap(self, p: int) -> list[int]:
        """Ion id per patch-local index (data positions then ancillas); needs the block encoded."""
        q = self.block_qubit[p]
        if q is None:
            raise QccdError(f"block P{p} holds no logical qubit", rule="C")
        d = self.layout.d
        return [q if k == self.center else self.block_data[p][k] for k in range(d * d)] + list(self.block_anc[p])

    def _check_capacity(self) -> None:
        for t, ions in self.occupancy.items():
            if len(ions) > self.layout.capacity:
                raise QccdError(f"trap {t} holds {len(ions)} ions, capacity {self.layout.capacity}")

    def _check_qubit(self, q: int) -> None:
        if not 0 <= q < self.num_qubits:
            raise QccdError(f"unknown program qubit q{q}")

    def _check_block(self, p: int) -> None:
        if not 0 <= p < self.max_logic:
            raise QccdError(f"unknown patch block P{p}", rule="D")

    # -- elementary moves ---------------------------------------------------------

    def validate_move(self, ion: int, target: int) -> str | None:
        """None when legal, otherwise a description of the violation."""
        if not 0 <= ion < self.num_ions:
            return f"unknown ion {ion}"
        if not 0 <= target < self.layout.num_traps:
            return f"trap {target} does not exist"
        src = self.ions[ion].trap
        if src == target:
            return None
        if not self.layout.adjacent(src, target):
            return f"trap {target} is not adjacent to trap {src}"
        if self.count(target) >= self.layout.capacity:
            return f"trap {target} is full (capacity {self.layout.capacity})"
        return None

    def _relocate(self, moves: list[tuple[int, int]]) -> list[tuple[int, int, int]]:
        """Apply simultaneous ``(ion, target)`` moves, checking capacity afterwards."""
        done = []
        for ion, target in moves:
            src = self.ions[ion].trap
            if src == target:
                continue
            self.occupancy[src].remove(ion)
            self.occupancy.setdefault(target, []).append(ion)
            self.ions[ion].trap = target
            done.append((ion, src, target))
        try:
            self._check_capacity()
        except QccdError:
            for ion, src, target in reversed(done):
                self.occupancy[target].remove(ion)
                self.occupancy[src].append(ion)
                self.ions[ion].trap = src
            raise
        return done

    def move_ion(self, ion: int, target: int) -> ExecResult:
        err = self.validate_move(ion, target)
        if err:
            raise QccdError(err)
        moved = self._relocate([(ion, target)])
        res = ExecResult(CostRecord(shuttles=len(moved), ticks=1 if moved else 0), moved, "move")
        self.cost.add(res.cost)
        return res

    # -- ISA-level operations ---------------------------------------------------------

    def bare_move(self, q: int, axis: str, step: int) -> ExecResult:
        self._check_qubit(q)
        if q in self.encoded:
            raise QccdError(f"q{q} is encoded in P{self.encoded[q]}; bare moves need a bare qubit", rule="C")
        if step not in (-1, 1):
            raise QccdError("bare moves take one hop (+1 or -1)")
        r, c = self.layout.trap_coord(self.ions[q].trap)
        r, c = (r + step, c) if axis == "vertical" else (r, c + step)
        if not (0 <= r < self.layout.rows and 0 <= c < self.layout.cols):
            raise QccdError(f"q{q} would leave the trap grid")
        return self.move_ion(q, self.layout.trap(r, c))

    def bare_gate(self, q: int) -> ExecResult:
        self._check_qubit(q)
        if q in self.encoded:
            raise QccdError(f"bare gate addresses q{q}, which is encoded in P{self.encoded[q]}", rule="C")
        res = ExecResult(CostRecord(gates_1q=1, ticks=1), kind="gate")
        self.cost.add(res.cost)
        return res

    def _block_ions(self, p: int) -> list[int]:
        ions = list(self.block_data[p].values()) + list(self.block_anc[p])
        if self.block_qubit[p] is not None:
            ions.append(self.block_qubit[p])
        return ions

    def _shift_block(self, p: int, dst: tuple[int, int]) -> list[tuple[int, int]]:
        src = self.block_slot[p]
        dr, dc = (dst[0] - src[0]) * self.layout.d, (dst[1] - src[1]) * self.layout.d
        moves = []
        for ion in self._block_ions(p):
            r, c = self.layout.trap_coord(self.ions[ion].trap)
            moves.append((ion, self.layout.trap(r + dr, c + dc)))
        return moves

    def logic_move(self, p: int, axis: str, step: int) -> ExecResult:
        """Shift block ``p`` by one slot; an occupied target slot is exchanged with it."""
        self._check_block(p)
        if step not in (-1, 1):
            raise QccdError("logical moves take one slot (+1 or -1)")
        src = self.block_slot[p]
        dst = (src[0] + step, src[1]) if axis == "vertical" else (src[0], src[1] + step)
        if not self.layout.has_slot(dst):
            raise QccdError(f"P{p} cannot move to slot {dst}: outside the logical and boundary zones")
        other = self.block_at(dst)
        moves = self._shift_block(p, dst)
        if other is not None:
            moves += self._shift_block(other, src)
        moved = self._relocate(moves)
        self.block_slot[p] = dst
        if other is not None:
            self.block_slot[other] = src
        ticks = self.layout.d * (4 if other is not None else 1)
        res = ExecResult(CostRecord(shuttles=len(moved), ticks=ticks), moved, "logic-move",
                         {"swapped_with": other})
        self.cost.add(res.cost)
        return res

    def transversal(self, pc: int, pt: int) -> ExecResult:
        """Target data shuttle into the control's traps, d^2 CNOTs run pairwise, then shuttle back."""
        self._check_block(pc)
        self._check_block(pt)
        if pc == pt:
            raise QccdError("transversal CNOT needs two distinct patches")
        for p in (pc, pt):
            if self.block_qubit[p] is None:
                raise QccdError(f"P{p} holds no logical qubit", rule="C")
        if slot_distance(self.block_slot[pc], self.block_slot[pt]) != 1:
            raise QccdError(f"P{pc} and P{pt} are not aligned in adjacent slots", rule="B")
        cmap, tmap = self.patch_qmap(pc), self.patch_qmap(pt)
        d2 = self.layout.d ** 2
        out = [(tmap[k], self.ions[cmap[k]].trap) for k in range(d2)]
        back = [(tmap[k], self.ions[tmap[k]].trap) for k in range(d2)]
        moved = self._relocate(out)
        self._relocate(back)
        pairs = [(cmap[k], tmap[k]) for k in range(d2)]
        res = ExecResult(
            CostRecord(shuttles=2 * len(moved), gates_2q=d2, ticks=2 * self.layout.d + 1),
            moved, "transversal", {"pairs": pairs},
        )
        self.cost.add(res.cost)
        return res

    def encode(self, q: int, p: int, d: int | None = None) -> ExecResult:
        self._check_qubit(q)
        self._check_block(p)
        if d is not None and d != self.layout.d:
            raise QccdError(f"blocks are built for d={self.layout.d}, not d={d}")
        if q in self.encoded:
            raise QccdError(f"q{q} is already encoded in P{self.encoded[q]}", rule="C")
        if self.block_qubit[p] is not None:
            raise QccdError(f"P{p} already holds q{self.block_qubit[p]}", rule="D")
        slot = self.block_slot[p]
        if not self.layout.is_boundary_slot(slot):
            raise QccdError(f"Encode_Boundary with P{p} at slot {slot}, outside the boundary zone", rule="A")
        if self.ions[q].trap != self.layout.slot_center(slot):
            raise QccdError(f"q{q} is not in the centre trap of P{p}'s slot", rule="A")
        if len(self.encoded) >= self.max_logic:
            raise QccdError("logical pool is full", rule="D")
        self.block_qubit[p] = q
        self.encoded[q] = p
        res = ExecResult(kind="encode", data={"qmap": self.patch_qmap(p)})
        self.cost.add(res.cost)
        return res

    def shrink(self, p: int) -> ExecResult:
        self._check_block(p)
        q = self.block_qubit[p]
        if q is None:
            raise QccdError(f"P{p} holds no logical qubit to shrink", rule="C")
        slot = self.block_slot[p]
        if not self.layout.is_boundary_slot(slot):
            raise QccdError(f"Shrink_Boundary with P{p} at slot {slot}, outside the boundary zone", rule="A")
        qmap = self.patch_qmap(p)
        self.block_qubit[p] = None
        del self.encoded[q]
        res = ExecResult(kind="shrink", data={"qmap": qmap, "qubit": q})
        self.cost.add(res.cost)
        return res

    def charge(self, gates_1q: int = 0, gates_2q: int = 0, measurements: int = 0, ticks: int = 0) -> None:
        """Add gate-level work done on behalf of an encode or shrink."""
        self.cost.add(CostRecord(0, gates_1q, gates_2q, measurements, ticks))

    def execute_instruction(self, instr) -> ExecResult:
        """Apply one :class:`~hybridqec.isa.HybridInstruction`; state is unchanged on error."""
        op = instr.opcode
        if op == "BareMove_Vertical":
            return self.bare_move(instr.qubit, "vertical", instr.step)
        if op == "BareMove_Horizontal":
            return self.bare_move(instr.qubit, "horizontal", instr.step)
        if op == "Bare_1Q_Gate":
            return self.bare_gate(instr.qubit)
        if op == "LogicMove_Vertical":
            return self.logic_move(instr.patch, "vertical", instr.step)
        if op == "LogicMove_Horizontal":
            return self.logic_move(instr.patch, "horizontal", instr.step)
        if op == "Logic_2Q_Transversal":
            return self.transversal(instr.patch, instr.patch2)
        if op == "Encode_Boundary":
            return self.encode(instr.qubit, instr.patch, instr.d)
        if op == "Shrink_Boundary":
            return self.shrink(instr.patch)
        raise QccdError(f"unknown opcode {op!r}")


def collective_swap(layout: QccdLayout, pairs) -> list[list[tuple[str, int, str]]]:
    """Parallel shuttle schedule swapping the ions of vertically adjacent trap pairs.

    Each pair ``(a, b)`` names two traps on either side of one junction row. The
    four steps follow the usual junction dance: the upper ion enters the
    junction, parks in its side arm, the lower ion passes through to the upper
    trap, and the parked ion drops into the lower trap. Disjoint pairs share
    the steps, so the count does not depend on how many pairs there are.
    Each step lists ``(ion_label, junction_or_trap, destination)`` moves.
    """
    pairs = [tuple(p) for p in pairs]
    if not pairs:
        return []
    used: set[int] = set()
    junction_row = None
    norm = []
    for a, b in pairs:
        (ra, ca), (rb, cb) = layout.trap_coord(a), layout.trap_coord(b)
        if ca != cb or abs(ra - rb) != 1:
            raise QccdError(f"traps {a} and {b} are not vertically adjacent across one junction")
        if a in used or b in used:
            raise QccdError(f"pair ({a}, {b}) conflicts with another pair's route")
        used.update((a, b))
        upper, lower = (a, b) if ra < rb else (b, a)
        row = min(ra, rb)
        if junction_row is None:
            junction_row = row
        elif row != junction_row:
            raise QccdError("all pairs must cross the same junction row")
        norm.append((upper, lower))
    junction = {u: f"J{junction_row}.{layout.trap_coord(u)[1]}" for u, _ in norm}
    steps = [
        [(f"ion@{u}", f"T{u}", junction[u]) for u, _ in norm],
        [(f"ion@{u}", junction[u], junction[u] + ".park") for u, _ in norm],
        [(f"ion@{l}", f"T{l}", f"T{u}") for u, l in norm],
        [(f"ion@{u}", junction[u] + ".park", f"T{l}") for u, l in norm],
    ]
    return steps
