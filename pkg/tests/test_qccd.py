import json

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridqec.isa import HybridInstruction
from hybridqec.qccd import QccdError, QccdLayout, QccdMachine, collective_swap, slot_distance


def _encoded_machine(layout=None):
    """Two-block machine with q0 encoded in the block standing in the boundary row."""
    layout = layout or QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    m = QccdMachine(layout, 2, 2)
    p = next(p for p in range(2) if layout.is_boundary_slot(m.block_slot[p]))
    target = layout.slot_center(m.block_slot[p])
    tr, tc = layout.trap_coord(target)
    while layout.trap_coord(m.ions[0].trap)[1] != tc:
        m.bare_move(0, "horizontal", 1 if tc > layout.trap_coord(m.ions[0].trap)[1] else -1)
    while m.ions[0].trap != target:
        m.bare_move(0, "vertical", -1)
    m.encode(0, p)
    return m, p


def test_layout_geometry():
    lo = QccdLayout(d=3, slot_rows=2, slot_cols=2, bare_rows=1)
    assert (lo.rows, lo.cols) == (10, 6)
    roles = [lo.role(t) for t in range(lo.num_traps)]
    assert roles.count("logical") == 36 and roles.count("boundary") == 18 and roles.count("bare") == 6
    g = nx.Graph()
    g.add_nodes_from(range(lo.num_traps))
    g.add_edges_from((a, b) for a in range(lo.num_traps) for b in lo.neighbors(a))
    assert nx.is_connected(g)
    # the boundary band touches both the logical and the bare zone
    assert any(lo.role(b) == "logical" for a in range(lo.num_traps) if lo.role(a) == "boundary" for b in lo.neighbors(a))
    assert any(lo.role(b) == "bare" for a in range(lo.num_traps) if lo.role(a) == "boundary" for b in lo.neighbors(a))


def test_layout_rejects_bad_values():
    with pytest.raises(ValueError):
        QccdLayout(d=4)
    with pytest.raises(ValueError):
        QccdLayout(capacity=0)
    with pytest.raises(ValueError):
        QccdLayout.from_dict({"d": 3, "junctions": 2})


def test_layout_files(tmp_path):
    lo = QccdLayout(d=5, slot_rows=1, slot_cols=3, bare_rows=2, capacity=4)
    (tmp_path / "a.json").write_text(json.dumps(lo.to_dict()))
    assert QccdLayout.load(tmp_path / "a.json") == lo
    (tmp_path / "b.toml").write_text("[layout]\nd = 5\nslot_rows = 1\nslot_cols = 3\nbare_rows = 2\ncapacity = 4\n")
    assert QccdLayout.load(tmp_path / "b.toml") == lo


def test_for_program_fits():
    lo = QccdLayout.for_program(20, d=3, max_logic=5)
    assert len(lo.slots) >= 5 and lo.bare_capacity() >= 20
    QccdMachine(lo, 20, 5)


def test_validate_move_rules():
    m = QccdMachine(QccdLayout(), 2, 2)
    ion = 0
    here = m.ions[ion].trap
    r, c = m.layout.trap_coord(here)
    assert m.validate_move(ion, here) is None
    assert m.validate_move(ion, m.layout.trap(r - 1, c)) is None
    assert "adjacent" in m.validate_move(ion, m.layout.trap(r - 2, c))
    assert m.validate_move(ion, 10**6) is not None


def test_capacity_overflow_is_rejected_and_rolled_back():
    m = QccdMachine(QccdLayout(capacity=2), 1, 2)
    # block traps already hold a data and an ancilla ion; a third ion does not fit
    p = 0
    full = m.layout.slot_trap(m.block_slot[p], 0)
    ion = m.block_data[p][0]
    other = next(i for i in range(m.num_ions) if m.ions[i].trap != full and m.layout.adjacent(m.ions[i].trap, full))
    before = m.snapshot()
    assert "full" in m.validate_move(other, full)
    with pytest.raises(QccdError):
        m.move_ion(other, full)
    assert m.snapshot() == before
    assert ion in m.occupancy[full]


def test_transversal_cnot_counts():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    m = QccdMachine(lo, 2, 2)
    for q in (0, 1):
        p = next(p for p in range(2) if m.block_qubit[p] is None and lo.is_boundary_slot(m.block_slot[p]))
        target = lo.slot_center(m.block_slot[p])
        tr, tc = lo.trap_coord(target)
        while lo.trap_coord(m.ions[q].trap)[1] != tc:
            m.bare_move(q, "horizontal", 1 if tc > lo.trap_coord(m.ions[q].trap)[1] else -1)
        while m.ions[q].trap != target:
            m.bare_move(q, "vertical", -1)
        m.encode(q, p)
        if q == 0:
            m.logic_move(p, "vertical", -1)
    res = m.transversal(0, 1) if slot_distance(m.block_slot[0], m.block_slot[1]) == 1 else None
    assert res is not None
    assert res.cost.gates_2q == 9 and len(res.data["pairs"]) == 9


def test_bare_gate_costs_one_gate():
    m = QccdMachine(QccdLayout(), 1, 2)
    res = m.bare_gate(0)
    assert res.cost.gates_1q == 1 and res.cost.shuttles == 0


def test_logic_move_shuttles_every_patch_ion():
    m, p = _encoded_machine()
    res = m.logic_move(p, "horizontal", 1)
    assert res.data["swapped_with"] is None
    assert res.cost.shuttles == 17 and res.cost.ticks == 3


def test_logic_move_into_occupied_slot_swaps_blocks():
    m, p = _encoded_machine()
    res = m.logic_move(p, "vertical", -1)
    assert res.data["swapped_with"] is not None
    assert res.cost.shuttles == 17 + 16 and res.cost.ticks == 12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(["v-", "v+", "h-", "h+"]), min_size=1, max_size=8))
def test_logic_move_inverse_restores_occupancy(steps):
    lo = QccdLayout(d=3, slot_rows=2, slot_cols=2, bare_rows=1)
    m = QccdMachine(lo, 2, 3)
    n_ions = m.num_ions
    start = m.occupancy_map()
    done = []
    for s in steps:
        axis = "vertical" if s[0] == "v" else "horizontal"
        step = 1 if s[1] == "+" else -1
        try:
            m.logic_move(0, axis, step)
        except QccdError:
            continue
        done.append((axis, step))
        assert m.num_ions == n_ions
        assert sum(len(v) for v in m.occupancy.values()) == n_ions
    for axis, step in reversed(done):
        m.logic_move(0, axis, -step)
    assert m.occupancy_map() == start


def test_cost_is_deterministic():
    def run():
        m, p = _encoded_machine()
        m.logic_move(p, "vertical", -1)
        m.logic_move(p, "vertical", 1)
        m.shrink(p)
        return m.cost.to_dict()

    assert run() == run()


def test_encode_outside_boundary_is_rule_a():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    m = QccdMachine(lo, 1, 2)
    p = next(p for p in range(2) if not lo.is_boundary_slot(m.block_slot[p]))
    with pytest.raises(QccdError) as exc:
        m.encode(0, p)
    assert exc.value.rule == "A"


def test_execute_instruction_dispatch():
    m, p = _encoded_machine()
    res = m.execute_instruction(HybridInstruction("Shrink_Boundary", patch=p))
    assert res.kind == "shrink" and res.data["qubit"] == 0


def test_collective_swap_figure_pairs():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    # two vertically adjacent pairs across the first junction row
    pairs = [(lo.trap(0, 0), lo.trap(1, 0)), (lo.trap(0, 1), lo.trap(1, 1))]
    steps = collective_swap(lo, pairs)
    assert len(steps) == 4
    assert collective_swap(lo, []) == []


def test_collective_swap_step_count_independent_of_pairs():
    lo = QccdLayout(d=3, slot_rows=1, slot_cols=2, bare_rows=1)
    one = collective_swap(lo, [(lo.trap(2, 0), lo.trap(3, 0))])
    three = collective_swap(lo, [(lo.trap(2, c), lo.trap(3, c)) for c in (0, 2, 4)])
    assert len(one) == len(three) == 4
    # simulate occupancy: every ion ends in its partner's trap
    where = {f"ion@{lo.trap(2, c)}": f"T{lo.trap(2, c)}" for c in (0, 2, 4)}
    where.update({f"ion@{lo.trap(3, c)}": f"T{lo.trap(3, c)}" for c in (0, 2, 4)})
    for step in three:
        for ion, src, dst in step:
            assert where[ion] == src
            where[ion] = dst
    for c in (0, 2, 4):
        assert where[f"ion@{lo.trap(2, c)}"] == f"T{lo.trap(3, c)}"
        assert where[f"ion@{lo.trap(3, c)}"] == f"T{lo.trap(2, c)}"


def test_collective_swap_conflicts():
    lo = QccdLayout()
    with pytest.raises(QccdError):
        collective_swap(lo, [(lo.trap(0, 0), lo.trap(2, 0))])
    with pytest.raises(QccdError):
        collective_swap(lo, [(lo.trap(0, 0), lo.trap(1, 0)), (lo.trap(1, 0), lo.trap(0, 0))])
    with pytest.raises(QccdError):
        collective_swap(lo, [(lo.trap(0, 0), lo.trap(1, 0)), (lo.trap(3, 1), lo.trap(4, 1))])


def test_machine_rejects_too_many_blocks():
    with pytest.raises(QccdError) as exc:
        QccdMachine(QccdLayout(slot_rows=1, slot_cols=1), 1, 3)
    assert exc.value.rule == "D"
