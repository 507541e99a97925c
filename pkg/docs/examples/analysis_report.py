"""When does paying for conversions beat running CNOTs bare?

Run:  python docs/examples/analysis_report.py
"""
from hybridqec.analysis import MEASURED_PC, crossover_ratio, crossover_table, msd_overheads, qubit_budgets

p2, pL = 1e-3, 1e-6
r = crossover_ratio(p2, pL, MEASURED_PC)
print(f"break-even CNOTs per conversion: {r:.2f}")
for row in crossover_table(p2, pL, MEASURED_PC, [1, 2, 4, 8, 16]):
    print("  ", row)

m = msd_overheads(pL, n=1)
print(f"T-count bound {m.t_count_bound:.1f}, idling per qubit {m.idling_error:.1e}, "
      f"2 conversions {m.per_gate_conversion_error:.1e}")
for n in (1, 5, 10, 30):
    print(f"   n={n:2d}: conversion preferred = {msd_overheads(pL, n=n).conversion_preferred}")

b = qubit_budgets(30, 9, mode="padded")
print(f"30 qubits at d=9: {b.selective_qubits} physical; with a factory the rest fits d'={b.msd_remaining_distance}")
