"""Run a hybrid program ion by ion on a stabilizer tableau.

Encode and shrink expand to the same gate-level fragments used by the
conversion experiments; shrink sign fixes are applied as physical Paulis on
the bare ion. Execution is noiseless: this is the semantic reference, noise
studies go through :mod:`hybridqec.encoding` and :mod:`hybridqec.decoder`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import StabCircuit
from .compiler import InputCircuit
from .encoding import InitConfig, append_encode, append_shrink_data
from .isa import HybridProgram
from .qccd import QccdError, QccdLayout, QccdMachine
from .tableau import StabilizerTableau


class ExecutionError(RuntimeError):
    pass


def _quarter_turns(angle: float) -> int:
    k = angle / (math.pi / 2)
    r = round(k)
    if abs(k - r) > 1e-9:
        raise ExecutionError(f"rotation angle {angle} is not a multiple of pi/2; the tableau needs Clifford angles")
    return r % 4


def apply_1q(tab: StabilizerTableau, q: int, name: str, angle: float | None = None) -> None:
    """Apply a supported 1Q gate, reducing RZ/RX at Clifford angles to S and H."""
    if name == "RZ":
        for _ in range(_quarter_turns(angle)):
            tab.s(q)
    elif name == "RX":
        k = _quarter_turns(angle)
        if k:
            tab.h(q)
            for _ in range(k):
                tab.s(q)
            tab.h(q)
    else:
        tab.apply(name, (q,))


def run_fragment(tab: StabilizerTableau, circ: StabCircuit, rng: np.random.Generator) -> np.ndarray:
    """Apply a noiseless circuit fragment to ``tab`` in place; returns record bits (True = -1)."""
    rec = np.zeros(circ.num_measurements, dtype=bool)
    for ins in circ.instructions:
        name, t = ins.name, ins.targets
        if name in ("H", "S", "S_DAG", "X", "Y", "Z", "CNOT"):
            tab.apply(name, t)
        elif name == "RZ":
            tab.reset_z(t[0], rng)
        elif name == "RX":
            tab.reset_x(t[0], rng)
        elif name in ("MZ", "MX"):
            out, _ = (tab.measure_z if name == "MZ" else tab.measure_x)(t[0], rng)
            rec[ins.record] = out < 0
    return rec


@dataclass
class ExecutionResult:
    tableau: StabilizerTableau
    machine: QccdMachine
    encodes: int = 0
    shrinks: int = 0
    z_fixes: int = 0
    x_fixes: int = 0
    gates_1q: int = 0
    gates_2q: int = 0
    measurements: int = 0
    trace: list = field(default_factory=list)

    def qubit_ion(self, q: int) -> int:
        return q  # program ions come first

    def program_state_check(self, circuit: InputCircuit, seed: int = 0) -> bool:
        return matches_direct(self, circuit, seed)


def execute_program(program: HybridProgram, layout: QccdLayout | None = None, seed: int = 0,
                    qec_rounds: int = 1) -> ExecutionResult:
    layout = layout or program.resolved_layout()
    rng = np.random.default_rng(seed)
    machine = QccdMachine(layout, program.num_qubits, program.max_logic)
    tab = StabilizerTableau(machine.num_ions)
    res = ExecutionResult(tab, machine)
    configs: dict[int, InitConfig] = {}
    for i, ins in enumerate(program.instructions):
        try:
            if ins.opcode == "Encode_Boundary":
                cfg = InitConfig.parse(ins.config or "center:triangles", seed=i)
                if cfg.placement != "center":
                    raise ExecutionError("patch blocks host the bare qubit at the patch centre; use a centre placement")
            step = machine.execute_instruction(ins)
        except QccdError as exc:
            raise ExecutionError(f"instruction {i} ({ins.to_text()}): {exc}") from None
        op = ins.opcode
        if op == "Bare_1Q_Gate":
            apply_1q(tab, ins.qubit, ins.gate, ins.angle)
            res.gates_1q += 1
        elif op == "Logic_2Q_Transversal":
            for a, b in step.data["pairs"]:
                tab.cnot(a, b)
            res.gates_2q += len(step.data["pairs"])
        elif op == "Encode_Boundary":
            patch = cfg.patch(layout.d)
            circ = StabCircuit(machine.num_ions)
            append_encode(circ, patch, cfg, qec_rounds, qmap=step.data["qmap"])
            run_fragment(tab, circ, rng)
            configs[ins.patch] = cfg
            res.encodes += 1
            _tally(res, machine, circ)
        elif op == "Shrink_Boundary":
            cfg = configs.pop(ins.patch)
            patch = cfg.patch(layout.d)
            circ = StabCircuit(machine.num_ions)
            x_fix, z_fix = append_shrink_data(circ, patch, cfg, qmap=step.data["qmap"])
            rec = run_fragment(tab, circ, rng)
            q = step.data["qubit"]
            if np.bitwise_xor.reduce(rec[list(x_fix)]):
                tab.pauli_z(q)
                res.z_fixes += 1
            if np.bitwise_xor.reduce(rec[list(z_fix)]):
                tab.pauli_x(q)
                res.x_fixes += 1
            res.shrinks += 1
            _tally(res, machine, circ)
        res.trace.append(op)
    return res


def _tally(res: ExecutionResult, machine: QccdMachine, circ: StabCircuit) -> None:
    n1 = sum(circ.count(g) for g in ("H", "S", "S_DAG", "X", "Y", "Z", "RZ", "RX"))
    n2 = circ.count("CNOT")
    nm = circ.num_measurements
    res.gates_1q += n1
    res.gates_2q += n2
    res.measurements += nm
    machine.charge(gates_1q=n1, gates_2q=n2, measurements=nm)


def direct_tableau(circuit: InputCircuit) -> StabilizerTableau:
    tab = StabilizerTableau(max(circuit.num_qubits, 1))
    for g in circuit.gates:
        if g.is_2q:
            tab.cnot(*g.qubits)
        else:
            apply_1q(tab, g.qubits[0], g.name, g.angle)
    return tab


def matches_direct(result: ExecutionResult, circuit: InputCircuit, seed: int = 0) -> bool:
    """True iff every stabilizer of the directly simulated state holds, with sign, on the program ions."""
    ref = direct_tableau(circuit)
    n_ions = result.tableau.n
    ions = [result.qubit_ion(q) for q in range(circuit.num_qubits)]
    for g in ref.stabilizers()[: circuit.num_qubits]:
        op = g.embed(n_ions, ions)
        if result.tableau.peek(op) != 1:
            return False
    return True


def verify_program(program: HybridProgram, circuit: InputCircuit, seed: int = 0, qec_rounds: int = 1) -> bool:
    return matches_direct(execute_program(program, seed=seed, qec_rounds=qec_rounds), circuit, seed)
