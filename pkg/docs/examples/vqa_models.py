"""Clifford VQA on a 10-site Ising chain under bare and selective execution.

Run:  python docs/examples/vqa_models.py   (a few seconds)
"""
import numpy as np

from hybridqec.vqa import CliffordAnsatz, build_ising, compare_models, conversion_profile, expected_energy

ham = build_ising(10)
ansatz = CliffordAnsatz(10)
print("ground energy:", round(ham.ground_energy(), 4))
print("conversion profile:", conversion_profile(ansatz))

params = np.random.default_rng(0).integers(0, 4, ansatz.num_params)
for model in ("ideal", "nisq", "selective", "msd"):
    print(f"   {model:9s} {expected_energy(params, ham, model, ansatz):+.4f}")

print("GA runs, converged energy minus the ideal optimum:")
for seed in range(3):
    out = compare_models(ham, seed=seed, generations=30, ansatz=ansatz)
    print(f"   seed {seed}: {out['gaps']}")
