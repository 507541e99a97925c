import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridqec.execute import execute_program
from hybridqec.isa import (
    OPCODES,
    HybridInstruction,
    HybridProgram,
    IsaParseError,
    parse,
    serialize,
    validate,
)
from hybridqec.qccd import QccdError, QccdLayout, QccdMachine


class Builder:
    """Emits instructions while mirroring them on a machine, so every emitted step is legal."""

    def __init__(self, layout, n, max_logic):
        self.layout = layout
        self.m = QccdMachine(layout, n, max_logic)
        self.n, self.max_logic = n, max_logic
        self.out = []

    def emit(self, ins):
        self.m.execute_instruction(ins)
        self.out.append(ins)

    def walk(self, q, target):
        lo = self.layout
        tr, tc = lo.trap_coord(target)
        while True:
            r, c = lo.trap_coord(self.m.ions[q].trap)
            if c != tc:
                self.emit(HybridInstruction("BareMove_Horizontal", qubit=q, step=1 if tc > c else -1))
            elif r != tr:
                self.emit(HybridInstruction("BareMove_Vertical", qubit=q, step=1 if tr > r else -1))
            else:
                return

    def encode(self, q, p):
        self.walk(q, self.layout.slot_center(self.m.block_slot[p]))
        self.emit(HybridInstruction("Encode_Boundary", qubit=q, patch=p))

    def program(self):
        return HybridProgram(self.n, self.layout.d, self.max_logic, self.layout, tuple(self.out))


def _boundary_blocks(m):
    return [p for p in range(len(m.block_slot)) if m.layout.is_boundary_slot(m.block_slot[p])]


def test_empty_program_roundtrip():
    p = HybridProgram()
    assert parse(serialize(p)) == p
    assert len(parse("")) == 0


def test_every_opcode_roundtrips_byte_identically():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    ins = [
        HybridInstruction("BareMove_Vertical", qubit=0, step=-1),
        HybridInstruction("BareMove_Horizontal", qubit=1, step=1),
        HybridInstruction("Bare_1Q_Gate", qubit=0, gate="RZ", angle=0.7853981633974483),
        HybridInstruction("Bare_1Q_Gate", qubit=1, gate="S_DAG"),
        HybridInstruction("Encode_Boundary", qubit=0, patch=1, d=3, config="center:triangles"),
        HybridInstruction("LogicMove_Vertical", patch=0, step=1),
        HybridInstruction("LogicMove_Horizontal", patch=1, step=-1),
        HybridInstruction("Logic_2Q_Transversal", patch=1, patch2=0),
        HybridInstruction("Shrink_Boundary", patch=1),
    ]
    assert {i.opcode for i in ins} == set(OPCODES)
    prog = HybridProgram(2, 3, 2, lo, tuple(ins))
    text = serialize(prog)
    assert parse(text) == prog
    assert serialize(parse(text)) == text


def test_unknown_opcode_names_line():
    with pytest.raises(IsaParseError) as exc:
        parse("QUBITS 1\nBareMove_Vertical q0 +1\nTeleport q0\n")
    assert exc.value.line == 3 and "line 3" in str(exc.value)


@pytest.mark.parametrize("text,line,col", [
    ("BareMove_Vertical q0 +2", 1, 22),
    ("Bare_1Q_Gate q0 RZ", 1, 1),
    ("Bare_1Q_Gate q0 H 0.5", 1, 19),
    ("\nLogic_2Q_Transversal P0 q1", 2, 25),
    ("Shrink_Boundary P0 P1", 1, 20),
    ("QUBITS x", 1, 8),
])
def test_malformed_lines_report_position(text, line, col):
    with pytest.raises(IsaParseError) as exc:
        parse(text)
    assert (exc.value.line, exc.value.column) == (line, col)


def test_alias_and_gate_spelling():
    prog = parse("LogicCNOT_Transversal P0 P1\nBare_1Q_Gate q0 sdg\n")
    assert prog.instructions[0].opcode == "Logic_2Q_Transversal"
    assert prog.instructions[1].gate == "S_DAG"
    assert serialize(prog).splitlines()[3] == "Logic_2Q_Transversal P0 P1"


def test_instruction_invariants():
    with pytest.raises(ValueError):
        HybridInstruction("Shrink_Boundary")
    with pytest.raises(ValueError):
        HybridInstruction("Bare_1Q_Gate", qubit=0, gate="H", angle=1.0)
    with pytest.raises(ValueError):
        HybridInstruction("LogicMove_Vertical", patch=0, step=1, angle=1.0)
    with pytest.raises(ValueError):
        HybridInstruction("Bare_1Q_Gate", qubit=0, gate="RZ", angle=float("nan"))


@settings(max_examples=40, deadline=None)
@given(st.text(alphabet="BareMoveLogicq0P1+-_ \n#QUBITS23", max_size=80))
def test_parser_fails_cleanly(text):
    try:
        prog = parse(text)
    except IsaParseError:
        return
    assert serialize(parse(serialize(prog))) == serialize(prog)


def test_rule_a_encode_in_logical_interior():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    b = Builder(lo, 2, 2)
    p = next(p for p in range(2) if not lo.is_boundary_slot(b.m.block_slot[p]))
    prog = b.program().with_instructions([HybridInstruction("Encode_Boundary", qubit=0, patch=p)])
    diags = validate(prog)
    assert [d.rule for d in diags] == ["A"] and diags[0].index == 0


def test_rule_b_transversal_without_alignment():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=3, bare_rows=1)
    b = Builder(lo, 2, 2)
    (pb,) = _boundary_blocks(b.m)
    pl = 1 - pb
    b.encode(0, pb)
    for _ in range(2):
        b.emit(HybridInstruction("LogicMove_Horizontal", patch=pb, step=1))
    b.emit(HybridInstruction("LogicMove_Vertical", patch=pl, step=1))
    b.encode(1, pl)
    assert validate(b.program()) == []
    assert abs(b.m.block_slot[pb][1] - b.m.block_slot[pl][1]) == 2
    prog = b.program().with_instructions(b.out + [HybridInstruction("Logic_2Q_Transversal", patch=pb, patch2=pl)])
    diags = validate(prog)
    assert [d.rule for d in diags] == ["B"] and diags[0].index == len(b.out)


def test_rule_c_bare_gate_on_encoded_qubit():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    b = Builder(lo, 2, 2)
    b.encode(0, _boundary_blocks(b.m)[0])
    prog = b.program().with_instructions(b.out + [HybridInstruction("Bare_1Q_Gate", qubit=0, gate="H")])
    diags = validate(prog)
    assert [d.rule for d in diags] == ["C"]
    assert "rule (c)" in str(diags[0])


def test_rule_d_pool_larger_than_zone():
    prog = HybridProgram(2, 3, 5, QccdLayout(d=3, slot_rows=1, slot_cols=1, bare_rows=1))
    assert [d.rule for d in validate(prog)] == ["D"]


def test_layout_distance_mismatch():
    prog = HybridProgram(1, 5, 2, QccdLayout(d=3))
    assert validate(prog)[0].rule == "E"


def _random_valid_program(rng, n=3, steps=40):
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    b = Builder(lo, n, 2)
    for _ in range(steps):
        kind = rng.choice(6, p=[0.15, 0.25, 0.2, 0.1, 0.15, 0.15])
        try:
            if kind == 0:
                q = int(rng.integers(n))
                if b.m.ions[q].block is None:
                    b.emit(HybridInstruction("Bare_1Q_Gate", qubit=q, gate=str(rng.choice(["H", "S", "X", "Z"]))))
            elif kind == 1:
                axis = "BareMove_Vertical" if rng.integers(2) else "BareMove_Horizontal"
                b.emit(HybridInstruction(axis, qubit=int(rng.integers(n)), step=int(rng.choice([-1, 1]))))
            elif kind == 2:
                free = [p for p in _boundary_blocks(b.m) if b.m.block_qubit[p] is None]
                bare = [q for q in range(n) if b.m.ions[q].block is None]
                if free and bare:
                    b.encode(int(rng.choice(bare)), free[0])
            elif kind == 3:
                full = [p for p in _boundary_blocks(b.m) if b.m.block_qubit[p] is not None]
                if full:
                    b.emit(HybridInstruction("Shrink_Boundary", patch=full[0]))
            elif kind == 4:
                axis = "LogicMove_Vertical" if rng.integers(2) else "LogicMove_Horizontal"
                b.emit(HybridInstruction(axis, patch=int(rng.integers(2)), step=int(rng.choice([-1, 1]))))
            else:
                enc = [p for p in range(2) if b.m.block_qubit[p] is not None]
                if len(enc) == 2:
                    b.emit(HybridInstruction("Logic_2Q_Transversal", patch=enc[0], patch2=enc[1]))
        except QccdError:
            pass
    return b.program()


def test_validation_is_sound_under_fuzzing():
    rng = np.random.default_rng(11)
    seen = {op: 0 for op in OPCODES}
    for _ in range(20):
        prog = _random_valid_program(rng)
        for op, k in prog.counts().items():
            seen[op] += k
        assert validate(prog) == []
        reparsed = parse(serialize(prog))
        assert validate(reparsed) == []
        res = execute_program(reparsed, seed=1)
        assert len(res.trace) == len(prog)
    assert all(seen.values()), seen


def test_canonical_serialization_is_idempotent():
    rng = np.random.default_rng(5)
    for _ in range(10):
        text = serialize(_random_valid_program(rng))
        once = serialize(parse(text))
        assert once == text and serialize(parse(once)) == once


def test_comments_and_blank_lines_are_ignored():
    text = "# header\nQUBITS 1\n\nBare_1Q_Gate q0 X  # flip\n"
    assert serialize(parse(text)) == "QUBITS 1\nDISTANCE 3\nMAXLOGIC 2\nBare_1Q_Gate q0 X\n"
