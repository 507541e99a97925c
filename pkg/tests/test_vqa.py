import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridqec.vqa import (
    CliffordAnsatz,
    Gadget,
    GaConfig,
    NoiseModel,
    VqaError,
    build_heisenberg,
    build_ising,
    compare_models,
    energies,
    expected_energy,
    hamiltonian_from_spec,
    load_hamiltonian,
    noisy_ops,
    parse_hamiltonian,
    propagate,
    run_ga,
)
from oracles import Statevector, apply_gate, ground_energy

# exact diagonalisation of the open 4-site chain, sum of XX+YY+ZZ: -3 - 2 sqrt(3)
HEISENBERG4 = -6.464101615137754


def test_ising_two_sites():
    h = build_ising(2, 1.0, 0.0)
    assert h.ground_energy() == pytest.approx(-1.0)
    assert ground_energy(h.terms()) == pytest.approx(-1.0)


def test_heisenberg_four_pinned():
    h = build_heisenberg(4)
    assert ground_energy(h.terms()) == pytest.approx(HEISENBERG4, abs=1e-9)
    assert h.ground_energy() == pytest.approx(HEISENBERG4, abs=1e-9)
    assert HEISENBERG4 == pytest.approx(-3 - 2 * math.sqrt(3))


def test_ising_ten_reference_state():
    h = build_ising(10, 1.0, 0.0)
    a = CliffordAnsatz(10)
    assert expected_energy(np.zeros(a.num_params, int), h, "ideal", a) == -9.0


def test_builders_reject_short_chains():
    with pytest.raises(VqaError):
        build_ising(1)
    with pytest.raises(VqaError):
        build_heisenberg(1)


def _statevector_energy(ansatz, ham, params):
    sv = Statevector(ansatz.n)
    for g in ansatz.circuit(params).gates:
        apply_gate(sv, g.name, g.qubits, g.angle)
    return sum(c * sv.expectation(s) for c, s in ham.terms())


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 2), st.integers(1, 4), st.integers(0, 2**31), st.booleans())
def test_heisenberg_picture_matches_statevector(n, layers, span, seed, heis):
    ham = build_heisenberg(n) if heis else build_ising(n, 0.7, 1.3)
    a = CliffordAnsatz(n, layers, span)
    params = np.random.default_rng(seed).integers(0, 4, a.num_params)
    assert expected_energy(params, ham, "ideal", a) == pytest.approx(_statevector_energy(a, ham, params), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_random_pauli_terms_match_statevector(seed):
    rng = np.random.default_rng(seed)
    terms = [(float(rng.normal()), "".join(rng.choice(list("IXYZ"), 3))) for _ in range(6)]
    ham = parse_hamiltonian("".join(f"{c!r} {s}\n" for c, s in terms), 3)
    a = CliffordAnsatz(3, 2, 3)
    params = rng.integers(0, 4, a.num_params)
    assert expected_energy(params, ham, "ideal", a) == pytest.approx(_statevector_energy(a, ham, params), abs=1e-9)


def _cnot_chain(pairs):
    """Two-qubit ansatz whose only content is ``pairs`` Z-gadgets, two CNOTs each."""
    a = CliffordAnsatz(2, 1, 2, local_layer=False)
    a.gadgets = tuple(Gadget("Z", 1, (0, 1)) for _ in range(pairs))
    return a


def test_nisq_gap_grows_with_cnots():
    ham = build_ising(2, 1.0, 1.0)
    gaps = []
    for n2 in (10, 50, 100):
        a = _cnot_chain(n2 // 2)
        assert a.num_cnots == n2
        zero = np.zeros(a.num_params, int)
        ideal = expected_energy(zero, ham, "ideal", a)
        noisy = expected_energy(zero, ham, NoiseModel("nisq", p2=1e-3), a)
        sampled = expected_energy(zero, ham, NoiseModel("nisq", p2=1e-3), a, shots=100_000, seed=n2)
        # 4 sigma of the shot average of one +-1 term
        assert sampled == pytest.approx(noisy, abs=4 / math.sqrt(100_000))
        gaps.append(abs(noisy - ideal))
    assert gaps[0] < gaps[1] < gaps[2]


def test_selective_gap_smaller_when_ratio_high():
    ham = build_ising(10)
    a = CliffordAnsatz(10)
    params = np.random.default_rng(3).integers(0, 4, a.num_params)
    ideal = expected_energy(params, ham, "ideal", a)
    nisq = expected_energy(params, ham, "nisq", a)
    sel = expected_energy(params, ham, "flexion", a)
    assert abs(sel - ideal) < abs(nisq - ideal)


def test_single_site_sampling_is_unbiased():
    x0, z0 = np.zeros((1, 1), bool), np.ones((1, 1), bool)
    genes = np.zeros((1, 0), int)
    ops = [("flip", 0, 0.1, 0.0)]
    value, atten = propagate(ops, x0, z0, genes)
    assert value[0] * atten[0] == pytest.approx(0.8)
    _, flips = propagate(ops, x0, z0, genes, rng=np.random.default_rng(0), shots=200_000)
    est = np.where(flips, -1.0, 1.0).mean()
    assert est == pytest.approx(0.8, abs=4 * 0.6 / math.sqrt(200_000))


def test_two_qubit_depolarizing_factor():
    x0, z0 = np.zeros((1, 2), bool), np.ones((1, 2), bool)
    value, atten = propagate([("dep", (0, 1), 0.3)], x0, z0, np.zeros((1, 0), int))
    assert atten[0] == pytest.approx(1 - 0.6)
    ops = noisy_ops(_cnot_chain(1), NoiseModel("nisq", p2=0.015))
    assert ops[1] == ("dep", (0, 1), pytest.approx(0.008))


def test_model_names():
    assert NoiseModel("flexion").kind == "selective"
    with pytest.raises(VqaError):
        NoiseModel("stabilizer")


def test_expected_energy_input_checks():
    ham = build_ising(3)
    a = CliffordAnsatz(3)
    with pytest.raises(VqaError):
        expected_energy(np.zeros(a.num_params + 1, int), ham, "ideal", a)
    with pytest.raises(VqaError):
        expected_energy(np.full(a.num_params, 4), ham, "ideal", a)
    with pytest.raises(VqaError):
        expected_energy(np.zeros(a.num_params, int), build_ising(4), "ideal", a)


def test_ga_trace_population_and_determinism():
    ham = build_heisenberg(4)
    a = CliffordAnsatz(4, 1, 2)
    r1 = run_ga(ham, "nisq", 30, seed=5, ansatz=a)
    r2 = run_ga(ham, "nisq", 30, seed=5, ansatz=a)
    assert r1.trace == r2.trace and np.array_equal(r1.best_params, r2.best_params)
    assert all(b <= x for x, b in zip(r1.trace, r1.trace[1:]))
    assert r1.population_sizes == [64] * 30
    assert r1.best_energy == pytest.approx(expected_energy(r1.best_params, ham, "nisq", a))
    with pytest.raises(VqaError):
        run_ga(ham, "ideal", 0)


def test_ga_improves_on_its_reference_state():
    ham = build_heisenberg(4)
    a = CliffordAnsatz(4, 1, 2)
    start = expected_energy(np.zeros(a.num_params, int), ham, "ideal", a)
    run = run_ga(ham, "ideal", 60, seed=1, ansatz=a)
    assert run.best_energy < start
    assert run.best_energy >= HEISENBERG4 - 1e-9


def test_ga_reaches_classical_ising_optimum():
    run = run_ga(build_ising(10, 1.0, 0.0), "ideal", 20, seed=0)
    assert run.best_energy == -9.0


def test_hamiltonian_file(tmp_path):
    path = tmp_path / "h.ham"
    path.write_text("# test\n1.0 ZZIII\n0.5 XIIII\n0.25 ZZIII\n")
    h = load_hamiltonian(path)
    assert h.n == 5 and h.num_terms == 2
    assert dict((s, c) for c, s in h.terms())["ZZIII"] == pytest.approx(1.25)
    assert parse_hamiltonian(h.to_text()).terms() == h.terms()
    one = tmp_path / "one.ham"
    one.write_text("1.0 ZZIIIIIIII\n")
    assert load_hamiltonian(one).num_terms == 1
    for bad in ("1.0 ZQ\n", "x ZZ\n", "1.0 ZZ\n1.0 ZZZ\n", "", "1.0\n"):
        with pytest.raises(VqaError):
            parse_hamiltonian(bad)


def test_hamiltonian_spec_strings(tmp_path):
    assert hamiltonian_from_spec("ising:n=4,h=0.5").num_terms == 7
    assert hamiltonian_from_spec("heisenberg:n=3").num_terms == 6
    (tmp_path / "f.ham").write_text("2 XX\n")
    assert hamiltonian_from_spec(str(tmp_path / "f.ham")).n == 2


def test_compare_models_shape():
    out = compare_models(build_ising(4), seed=0, generations=5, config=GaConfig(population=16))
    assert set(out["gaps"]) == {"nisq", "selective"}
    assert out["gaps"]["nisq"] >= 0


def test_msd_model_runs_and_pays_idling():
    ham = build_ising(4)
    a = CliffordAnsatz(4)
    zero = np.zeros(a.num_params, int)
    ideal = expected_energy(zero, ham, "ideal", a)
    assert expected_energy(zero, ham, "msd", a) > ideal
    ops = noisy_ops(a, NoiseModel("msd"))
    assert sum(op[0] == "flip" for op in ops) > a.num_cnots


def test_energies_vectorised_matches_single():
    ham = build_ising(3)
    a = CliffordAnsatz(3)
    pop = np.random.default_rng(0).integers(0, 4, (5, a.num_params))
    ops = noisy_ops(a, NoiseModel("nisq"))
    batch = energies(a, ham, pop, ops)
    single = [expected_energy(p, ham, "nisq", a) for p in pop]
    assert np.allclose(batch, single)
