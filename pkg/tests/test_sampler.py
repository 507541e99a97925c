import numpy as np
import pytest

from hybridqec.circuit import CircuitError, NoiseSpec, StabCircuit, parse_circuit
from hybridqec.sampler import sample_circuit
from oracles import Statevector, empirical, random_clifford_circuit, total_variation


def _measure_all(gates, n):
    c = StabCircuit(n)
    for g, qs in gates:
        c.append(g, *qs)
    for q in range(n):
        c.measure("Z", q)
    return c


def test_text_roundtrip():
    text = """
    # bell pair
    H 0
    CNOT 0 1
    NOISE2 0.001 0 1
    XERR 0.0001 1
    MZ 0 -> r0
    MZ 1 -> r1
    DETECTOR(0,1,2) r0 r1
    OBSERVABLE r0
    OBSERVABLE 1 r1
    """
    c = parse_circuit(text)
    assert c.num_qubits == 2 and c.num_measurements == 2 and c.num_detectors == 1
    assert c.num_observables == 2
    again = parse_circuit(c.to_text())
    assert again.to_text() == c.to_text()


def test_parse_errors_name_the_line():
    with pytest.raises(CircuitError, match="line 2"):
        parse_circuit("H 0\nFOO 1\n")
    with pytest.raises(CircuitError, match="line 1"):
        parse_circuit("DETECTOR r4\n")


def test_noiseless_deterministic_records_identical():
    c = parse_circuit("X 0\nCNOT 0 1\nMZ 0 -> r0\nMZ 1 -> r1\nMZ 2 -> r2\n")
    res = sample_circuit(c, shots=500, seed=3)
    assert (res.measurements == np.array([True, True, False])).all()


def test_fixed_seed_bit_identical_and_batch_independent():
    rng = np.random.default_rng(0)
    c = _measure_all(random_clifford_circuit(rng, 4, 30), 4)
    noise = NoiseSpec(p1=0.01, p2=0.02, p_meas=0.01)
    a = sample_circuit(c, noise, shots=3000, seed=11, batch_size=1000)
    b = sample_circuit(c, noise, shots=3000, seed=11, batch_size=1000)
    assert np.array_equal(a.measurements, b.measurements)
    # the second half of a 3000-shot run equals batches 1..2 run on their own
    part = sample_circuit(c, noise, shots=1000, seed=11, batch_size=1000)
    assert np.array_equal(part.measurements, a.measurements[:1000])


def _bell_pauli_detector_circuit():
    # two Bell pairs (0,2) and (1,3); noisy CNOT on 0,1 then undone; Bell-basis readout
    c = StabCircuit(4)
    for a, b in ((0, 2), (1, 3)):
        c.append("H", a)
        c.append("CNOT", a, b)
    c.append("CNOT", 0, 1)
    c.append("NOISE2", 0, 1, arg=1e-3)
    c.append("CNOT", 0, 1)
    recs = []
    for a, b in ((0, 2), (1, 3)):
        c.append("CNOT", a, b)
        c.append("H", a)
        recs += [c.measure("Z", a), c.measure("Z", b)]
    for r in recs:
        c.detector([r])
    return c


def test_two_qubit_depolarizing_injection_rate():
    c = _bell_pauli_detector_circuit()
    shots = 4_000_000
    res = sample_circuit(c, shots=shots, seed=2024, batch_size=1 << 20)
    freq = res.detectors.any(axis=1).mean()
    assert abs(freq - 1e-3) < 0.05e-3


def test_single_qubit_noise_is_uniform_over_xyz():
    c = StabCircuit(2)
    c.append("H", 0)
    c.append("CNOT", 0, 1)
    c.append("NOISE1", 0, arg=0.3)
    c.append("CNOT", 0, 1)
    c.append("H", 0)
    c.detector([c.measure("Z", 0)])  # fires on Z or Y
    c.detector([c.measure("Z", 1)])  # fires on X or Y
    res = sample_circuit(c, shots=200_000, seed=5)
    d = res.detectors
    px = (~d[:, 0] & d[:, 1]).mean()
    py = (d[:, 0] & d[:, 1]).mean()
    pz = (d[:, 0] & ~d[:, 1]).mean()
    for v in (px, py, pz):
        assert abs(v - 0.1) < 0.005


def test_frame_matches_tableau_resimulation():
    rng = np.random.default_rng(9)
    c = _measure_all(random_clifford_circuit(rng, 3, 25), 3)
    noise = NoiseSpec(p1=0.05, p2=0.05, p_meas=0.02)
    f = sample_circuit(c, noise, shots=20_000, seed=1)
    t = sample_circuit(c, noise, shots=3_000, seed=1, method="tableau")
    assert total_variation(empirical(f.measurements), empirical(t.measurements)) < 0.05


@pytest.mark.parametrize("seed", range(6))
def test_random_clifford_distribution_vs_statevector(seed):
    rng = np.random.default_rng(100 + seed)
    n = 4
    gates = random_clifford_circuit(rng, n, 20)
    sv = Statevector(n)
    for g, qs in gates:
        sv.apply(g, qs)
    res = sample_circuit(_measure_all(gates, n), shots=100_000, seed=seed)
    assert total_variation(empirical(res.measurements), sv.z_distribution()) < 0.01


def test_importance_weights_are_unbiased():
    c = _bell_pauli_detector_circuit()
    res = sample_circuit(c, shots=200_000, seed=4, importance=20.0)
    w = res.weights
    est = float(np.sum(w * res.detectors.any(axis=1)) / len(w))
    assert abs(est - 1e-3) < 0.1e-3
    assert abs(w.mean() - 1.0) < 0.02


def test_noise_spec_validation_and_insertion():
    with pytest.raises(ValueError):
        NoiseSpec(p2=1.5)
    c = parse_circuit("RZ 0\nH 0\nCNOT 0 1\nMX 0 -> r0\n")
    noisy = NoiseSpec(p1=1e-6, p2=1e-3, p_meas=1e-4).apply(c)
    names = [i.name for i in noisy]
    assert names == ["RZ", "XERR", "H", "NOISE1", "CNOT", "NOISE2", "ZERR", "MX"]
    assert NoiseSpec.noiseless().apply(c).to_text() == c.to_text()
