"""Hybrid bare/logical instruction set: typed IR, ``.hisa`` text format and validator.

Text format, one instruction per line::

    QUBITS 3
    DISTANCE 3
    MAXLOGIC 2
    LAYOUT slot_rows=2 slot_cols=2 bare_rows=1 capacity=3
    BareMove_Vertical q0 -1
    Bare_1Q_Gate q0 RZ 1.5707963267948966
    Encode_Boundary q0 P0 d=3 config=center:triangles
    LogicMove_Horizontal P1 +1
    Logic_2Q_Transversal P0 P1
    Shrink_Boundary P0

``#`` starts a comment. ``Logic_2Q_Transversal`` takes the control patch first.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

from .qccd import QccdError, QccdLayout, QccdMachine

OPCODES = (
    "BareMove_Vertical",
    "BareMove_Horizontal",
    "Bare_1Q_Gate",
    "LogicMove_Vertical",
    "LogicMove_Horizontal",
    "Logic_2Q_Transversal",
    "Encode_Boundary",
    "Shrink_Boundary",
)
OPCODE_ALIASES = {"LogicCNOT_Transversal": "Logic_2Q_Transversal"}
BARE_GATES = ("H", "S", "S_DAG", "X", "Y", "Z", "RZ", "RX")
ANGLE_GATES = ("RZ", "RX")
_GATE_ALIASES = {"SDG": "S_DAG", "S†": "S_DAG"}

RULES = {
    "A": "encode/shrink only at boundary-zone locations",
    "B": "transversal operands must be aligned in adjacent slots",
    "C": "bare-domain operations never address encoded qubits",
    "D": "logical pool never exceeds the logical-zone capacity",
    "E": "general machine constraint",
}


class IsaParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class HybridInstruction:
    opcode: str
    qubit: int | None = None
    patch: int | None = None
    patch2: int | None = None
    step: int | None = None
    gate: str | None = None
    angle: float | None = None
    d: int | None = None
    config: str | None = None

    def __post_init__(self):
        op = self.opcode
        if op not in OPCODES:
            raise ValueError(f"unknown opcode {op!r}")
        need = {
            "BareMove_Vertical": ("qubit", "step"),
            "BareMove_Horizontal": ("qubit", "step"),
            "Bare_1Q_Gate": ("qubit", "gate"),
            "LogicMove_Vertical": ("patch", "step"),
            "LogicMove_Horizontal": ("patch", "step"),
            "Logic_2Q_Transversal": ("patch", "patch2"),
            "Encode_Boundary": ("qubit", "patch"),
            "Shrink_Boundary": ("patch",),
        }[op]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"{op} needs operand {name}")
        if self.step is not None and self.step not in (-1, 1):
            raise ValueError(f"{op} step must be +1 or -1")
        if op == "Bare_1Q_Gate":
            if self.gate not in BARE_GATES:
                raise ValueError(f"unsupported bare gate {self.gate!r}")
            if (self.angle is not None) != (self.gate in ANGLE_GATES):
                raise ValueError(f"gate {self.gate} {'needs' if self.gate in ANGLE_GATES else 'takes no'} angle")
            if self.angle is not None and not math.isfinite(self.angle):
                raise ValueError("angle must be finite")
        elif self.angle is not None or self.gate is not None:
            raise ValueError("gates and angles only appear on Bare_1Q_Gate")

    @property
    def is_bare(self) -> bool:
        return self.opcode.startswith("Bare")

    @property
    def is_move(self) -> bool:
        return "Move" in self.opcode

    def to_text(self) -> str:
        op = self.opcode
        if op in ("BareMove_Vertical", "BareMove_Horizontal"):
            return f"{op} q{self.qubit} {self.step:+d}"
        if op == "Bare_1Q_Gate":
            tail = f" {self.angle!r}" if self.angle is not None else ""
            return f"{op} q{self.qubit} {self.gate}{tail}"
        if op in ("LogicMove_Vertical", "LogicMove_Horizontal"):
            return f"{op} P{self.patch} {self.step:+d}"
        if op == "Logic_2Q_Transversal":
            return f"{op} P{self.patch} P{self.patch2}"
        if op == "Encode_Boundary":
            parts = [op, f"q{self.qubit}", f"P{self.patch}"]
            if self.d is not None:
                parts.append(f"d={self.d}")
            if self.config is not None:
                parts.append(f"config={self.config}")
            return " ".join(parts)
        return f"{op} P{self.patch}"


@dataclass(frozen=True)
class HybridProgram:
    num_qubits: int = 0
    d: int = 3
    max_logic: int = 2
    layout: QccdLayout | None = None
    instructions: tuple[HybridInstruction, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def resolved_layout(self) -> QccdLayout:
        if self.layout is not None:
            return self.layout
        return QccdLayout.for_program(self.num_qubits, self.d, self.max_logic)

    def with_instructions(self, instructions) -> "HybridProgram":
        return replace(self, instructions=tuple(instructions))

    def counts(self) -> dict[str, int]:
        out = {op: 0 for op in OPCODES}
        for ins in self.instructions:
            out[ins.opcode] += 1
        return out


def serialize(program: HybridProgram) -> str:
    lines = [f"QUBITS {program.num_qubits}", f"DISTANCE {program.d}", f"MAXLOGIC {program.max_logic}"]
    if program.layout is not None:
        lo = program.layout
        lines.append(
            f"LAYOUT slot_rows={lo.slot_rows} slot_cols={lo.slot_cols} bare_rows={lo.bare_rows} capacity={lo.capacity}"
        )
    lines += [ins.to_text() for ins in program.instructions]
    return "\n".join(lines) + "\n"


_QUBIT = re.compile(r"^q(\d+)$")
_PATCH = re.compile(r"^P(\d+)$")
_STEP = re.compile(r"^[+-]1$")


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def parse(text: str) -> HybridProgram:
    header = {"QUBITS": None, "DISTANCE": 3, "MAXLOGIC": 2}
    layout_kw: dict | None = None
    instrs: list[HybridInstruction] = []
    max_q = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        head, col = toks[0]
        args = toks[1:]

        def fail(msg, tok=None):
            raise IsaParseError(msg, lineno, tok[1] if tok else col)

        def want(i, pattern, what):
            if i >= len(args):
                fail(f"{head} is missing its {what} operand")
            m = pattern.match(args[i][0])
            if not m:
                fail(f"expected {what}, got {args[i][0]!r}", args[i])
            return args[i]

        def arity(n):
            if len(args) != n:
                tok = args[n] if len(args) > n else None
                fail(f"{head} takes {n} operand(s), got {len(args)}", tok)

        if head in header:
            arity(1)
            if not args[0][0].isdigit():
                fail(f"{head} needs a non-negative integer", args[0])
            header[head] = int(args[0][0])
            continue
        if head == "LAYOUT":
            layout_kw = {}
            for tok in args:
                k, sep, v = tok[0].partition("=")
                if not sep or not v.isdigit():
                    fail(f"layout entries look like key=int, got {tok[0]!r}", tok)
                layout_kw[k] = int(v)
            continue
        op = OPCODE_ALIASES.get(head, head)
        if op not in OPCODES:
            fail(f"unknown opcode {head!r}")
        kw: dict = {}
        if op in ("BareMove_Vertical", "BareMove_Horizontal"):
            arity(2)
            kw["qubit"] = int(want(0, _QUBIT, "qubit")[0][1:])
            kw["step"] = int(want(1, _STEP, "step (+1/-1)")[0])
        elif op == "Bare_1Q_Gate":
            if len(args) not in (2, 3):
                fail(f"{head} takes a qubit, a gate and an optional angle")
            kw["qubit"] = int(want(0, _QUBIT, "qubit")[0][1:])
            gate = args[1][0].upper()
            gate = _GATE_ALIASES.get(gate, gate)
            if gate not in BARE_GATES:
                fail(f"unsupported bare gate {args[1][0]!r}", args[1])
            kw["gate"] = gate
            if gate in ANGLE_GATES:
                if len(args) != 3:
                    fail(f"{gate} needs an angle")
                try:
                    kw["angle"] = float(args[2][0])
                except ValueError:
                    fail(f"bad angle {args[2][0]!r}", args[2])
                if not math.isfinite(kw["angle"]):
                    fail("angle must be finite", args[2])
            elif len(args) == 3:
                fail(f"{gate} takes no angle", args[2])
        elif op in ("LogicMove_Vertical", "LogicMove_Horizontal"):
            arity(2)
            kw["patch"] = int(want(0, _PATCH, "patch")[0][1:])
            kw["step"] = int(want(1, _STEP, "step (+1/-1)")[0])
        elif op == "Logic_2Q_Transversal":
            arity(2)
            kw["patch"] = int(want(0, _PATCH, "patch")[0][1:])
            kw["patch2"] = int(want(1, _PATCH, "patch")[0][1:])
        elif op == "Encode_Boundary":
            if len(args) < 2:
                fail(f"{head} needs a qubit and a patch")
            kw["qubit"] = int(want(0, _QUBIT, "qubit")[0][1:])
            kw["patch"] = int(want(1, _PATCH, "patch")[0][1:])
            for tok in args[2:]:
                k, sep, v = tok[0].partition("=")
                if k == "d" and sep and v.isdigit():
                    kw["d"] = int(v)
                elif k == "config" and sep and v:
                    kw["config"] = v
                else:
                    fail(f"unexpected Encode_Boundary option {tok[0]!r}", tok)
        else:
            arity(1)
            kw["patch"] = int(want(0, _PATCH, "patch")[0][1:])
        if "qubit" in kw:
            max_q = max(max_q, kw["qubit"])
        instrs.append(HybridInstruction(op, **kw))
    nq = header["QUBITS"] if header["QUBITS"] is not None else max_q + 1
    layout = None
    if layout_kw is not None:
        layout_kw.setdefault("d", header["DISTANCE"])
        try:
            layout = QccdLayout.from_dict(layout_kw)
        except (TypeError, ValueError) as exc:
            raise IsaParseError(f"bad LAYOUT: {exc}", 0) from None
    return HybridProgram(nq, header["DISTANCE"], header["MAXLOGIC"], layout, tuple(instrs))


@dataclass(frozen=True)
class Diagnostic:
    index: int
    rule: str
    message: str

    def __str__(self) -> str:
        return f"instruction {self.index}: rule ({self.rule.lower()}) {self.message}"


def validate(program: HybridProgram, layout: QccdLayout | None = None) -> list[Diagnostic]:
    """Dry-run the program on a fresh machine; an empty list means it is valid.

    A rejected instruction leaves the dry-run state untouched, so later
    diagnostics are reported against the state the valid prefix produced.
    """
    layout = layout or program.resolved_layout()
    if layout.d != program.d:
        return [Diagnostic(-1, "E", f"layout distance {layout.d} differs from program distance {program.d}")]
    try:
        machine = QccdMachine(layout, program.num_qubits, program.max_logic)
    except QccdError as exc:
        return [Diagnostic(-1, exc.rule, str(exc))]
    diags = []
    for i, ins in enumerate(program.instructions):
        try:
            machine.execute_instruction(ins)
        except QccdError as exc:
            diags.append(Diagnostic(i, exc.rule, str(exc)))
    return diags


def is_valid(program: HybridProgram, layout: QccdLayout | None = None) -> bool:
    return not validate(program, layout)
