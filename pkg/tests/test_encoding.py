import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridqec.circuit import NoiseSpec
from hybridqec.encoding import (
    CONFIG_NAMES,
    POLICIES,
    STATE_EIGEN,
    STATE_PREP,
    InitConfig,
    build_encode_circuit,
    build_shrink_circuit,
    classify_stabilizers,
    conversion_circuit,
    conversion_ler,
)
from hybridqec.sampler import sample_circuit
from hybridqec.surface import build_patch
from oracles import init_group_contains


@st.composite
def configs(draw):
    d = draw(st.sampled_from([3, 5, 7]))
    policy = draw(st.sampled_from(POLICIES))
    where = draw(st.one_of(st.sampled_from(["center", "corner"]),
                           st.tuples(st.integers(0, d - 1), st.integers(0, d - 1))))
    return d, InitConfig(where, policy, seed=draw(st.integers(0, 100)))


@settings(max_examples=60, deadline=None)
@given(configs())
def test_basis_map_invariants(case):
    d, cfg = case
    patch = cfg.patch(d)
    basis = cfg.basis_map(patch)
    assert set(basis) == set(range(d * d)) - {patch.bare}
    for q in patch.x_logical:
        if q != patch.bare:
            assert basis[q] == "X"
    for q in patch.z_logical:
        if q != patch.bare:
            assert basis[q] == "Z"


@settings(max_examples=60, deadline=None)
@given(configs())
def test_classification_matches_commutation_oracle(case):
    d, cfg = case
    patch = cfg.patch(d)
    basis = cfg.basis_map(patch)
    frame = classify_stabilizers(patch, cfg)
    for s, det in zip(patch.checks, frame.deterministic):
        assert det == init_group_contains(patch.num_data, basis, s.kind, s.support)


def test_all_zero_map():
    patch = build_patch(5)
    frame = classify_stabilizers(patch, {q: "Z" for q in range(25)})
    assert frame.count("Z") == len(patch.z_checks()) and frame.count("X") == 0


def test_config_mismatch_rejected():
    patch = build_patch(3)
    with pytest.raises(ValueError):
        classify_stabilizers(patch, {0: "Z"})
    with pytest.raises(ValueError):
        classify_stabilizers(patch, {q: "Y" for q in range(9)})


# counts from the commutation oracle (see test above), pinned for d = 5
D5_DETERMINISTIC = {"center": 12, "lines": 8, "corner": 6}


def test_d5_deterministic_counts():
    counts = {}
    for name in ("center", "lines", "corner"):
        cfg = InitConfig.parse(name)
        counts[name] = classify_stabilizers(cfg.patch(5), cfg).num_deterministic
    assert counts == D5_DETERMINISTIC
    random_mean = np.mean([
        classify_stabilizers(build_patch(5), InitConfig("center", "random", s)).num_deterministic for s in range(40)
    ])
    assert counts["center"] > counts["lines"] >= random_mean
    assert counts["corner"] < counts["center"]


@pytest.mark.parametrize("d", [3, 5])
def test_triangles_dominate(d):
    det = {p: classify_stabilizers(build_patch(d), InitConfig("center", p)).num_deterministic
           for p in ("triangles", "lines")}
    assert det["triangles"] > det["lines"]


def test_parse_names():
    for name, (where, policy) in CONFIG_NAMES.items():
        cfg = InitConfig.parse(name)
        assert (cfg.placement, cfg.policy) == (where, policy)
    assert InitConfig.parse("(1,2):lines").placement == (1, 2)
    assert InitConfig.parse("center:triangles").label == "center:triangles"
    with pytest.raises(ValueError):
        InitConfig.parse("diagonal")
    with pytest.raises(ValueError):
        InitConfig("center", "magic")


@pytest.mark.parametrize("d", [3, 5])
def test_encode_circuit_structure(d):
    patch = build_patch(d)
    circ = build_encode_circuit(patch, InitConfig(), qec_rounds=d)
    # gauge-fixing round plus d QEC rounds
    assert circ.num_measurements == (d + 1) * (d * d - 1)
    with pytest.raises(ValueError):
        build_encode_circuit(patch, InitConfig(), qec_rounds=0)


def _bare_outcomes(cc, shots, seed=1):
    res = sample_circuit(cc.circuit, None, shots=shots, seed=seed)
    return cc.recipe.corrected(res.measurements), res


@pytest.mark.parametrize("state", sorted(STATE_PREP))
def test_zero_noise_roundtrip_all_states(state):
    cfg = InitConfig()
    cc = conversion_circuit(cfg.patch(3), cfg, state, "roundtrip")
    out, res = _bare_outcomes(cc, 4000)
    assert np.all(out == STATE_EIGEN[state][1])
    assert not res.detectors.any()


@pytest.mark.parametrize("state", ["0", "1", "+", "-"])
def test_zero_noise_enlarge_logical_readout(state):
    cfg = InitConfig()
    cc = conversion_circuit(cfg.patch(5), cfg, state, "enlarge")
    res = sample_circuit(cc.circuit, None, shots=2000, seed=4)
    logical = np.bitwise_xor.reduce(res.measurements[:, cc.circuit.observable_records()[0]], axis=1)
    assert np.all(np.where(logical, -1, 1) == STATE_EIGEN[state][1])


def test_sign_correction_off_breaks_plus_state():
    cfg = InitConfig()
    cc = conversion_circuit(cfg.patch(3), cfg, "+", "roundtrip", sign_correction=False)
    out, _ = _bare_outcomes(cc, 10_000)
    assert abs(np.mean(out != 1) - 0.5) < 0.02


def test_z_fix_fires_half_the_time():
    cfg = InitConfig()
    cc = conversion_circuit(cfg.patch(3), cfg, "+", "roundtrip")
    res = sample_circuit(cc.circuit, None, shots=10_000, seed=9)
    zb, _ = cc.recipe.fixes(res.measurements)
    assert abs(zb.mean() - 0.5) < 0.02
    out = cc.recipe.corrected(res.measurements)
    assert np.all(out[zb] == 1)


def test_frame_sampling_agrees_with_exact_tableau():
    cfg = InitConfig()
    cc = conversion_circuit(cfg.patch(3), cfg, "+", "roundtrip")
    res = sample_circuit(cc.circuit, None, shots=20, seed=2, method="tableau")
    assert np.all(cc.recipe.corrected(res.measurements) == 1)


def test_standalone_shrink_recipe():
    patch = build_patch(3)
    circ, recipe = build_shrink_circuit(patch, InitConfig(), basis="X")
    assert circ.num_measurements == 9
    assert len(recipe.x_fix) == 2 and len(recipe.z_fix) == 2
    with pytest.raises(ValueError):
        build_shrink_circuit(patch, InitConfig(), basis="W")


@pytest.mark.parametrize("config", ["center", "lines", "corner"])
@pytest.mark.parametrize("direction", ["enlarge", "shrink", "roundtrip"])
def test_zero_noise_conversion_ler(config, direction):
    est = conversion_ler(3, config, NoiseSpec(0, 0, 0), 200, direction=direction)
    assert est.rate == 0.0


def test_conversion_ler_reports_both_states():
    est = conversion_ler(3, "center", NoiseSpec.trapped_ion(p2=2e-3), 2000, seed=3)
    per = est.extra["per_state"]
    assert set(per) == {"0", "+"}
    assert est.rate == max(v["ler"] for v in per.values())
    assert est.low <= est.rate <= est.high


def test_bad_direction():
    with pytest.raises(ValueError):
        conversion_circuit(build_patch(3), InitConfig(), "+", "sideways")
