"""Conversion error of the bare <-> surface-code switch.

Run:  python docs/examples/conversion_ler.py

Compares the four initialization configurations at d=3, then shows that the
enlarge cost barely moves with distance while a memory experiment keeps
improving. Shot counts are small so this finishes in well under a minute; the
acceptance suite repeats these comparisons at 1e6 shots.
"""
from hybridqec.circuit import NoiseSpec
from hybridqec.encoding import InitConfig, classify_stabilizers, conversion_ler
from hybridqec.surface import build_patch, memory_experiment

noise = NoiseSpec.trapped_ion(p2=1e-3)
SHOTS = 20_000

print("== deterministic first-round checks per configuration ==")
for name in ("center", "lines", "random", "corner"):
    cfg = InitConfig.parse(name)
    counts = [classify_stabilizers(cfg.patch(d), cfg).num_deterministic for d in (3, 5, 7)]
    print(f"   {name:7s} d=3,5,7 -> {counts}")

print("== enlarge LER per configuration, d=5 ==")
for name in ("center", "lines", "corner"):
    est = conversion_ler(5, name, noise, SHOTS, seed=1, decoder="mwpm")
    print(f"   {name:7s} {est.rate:.2e}  [{est.low:.2e}, {est.high:.2e}]")

print("== shrink vs enlarge, centre, d=3 ==")
for direction in ("enlarge", "shrink"):
    est = conversion_ler(3, "center", noise, SHOTS, direction=direction, seed=2, decoder="mwpm")
    print(f"   {direction:7s} {est.rate:.2e}")

print("== conversion floor vs memory, d=3 and 5 ==")
for d in (3, 5):
    conv = conversion_ler(d, "center", noise, SHOTS, seed=3, decoder="mwpm")
    mem = memory_experiment(build_patch(d), d, noise, SHOTS, seed=3, decoder="mwpm")
    print(f"   d={d}: conversion {conv.rate:.2e}   memory {mem.rate:.2e}")
