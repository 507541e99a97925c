"""From an input circuit to a checked hybrid program.

Run:  python docs/examples/compile_pipeline.py
"""
from hybridqec.compiler import allocate_encodings, compile_circuit, conversion_stats, parse_circuit
from hybridqec.execute import execute_program, matches_direct
from hybridqec.isa import serialize, validate

src = """
qreg q[3];
cx q[0], q[1];
cx q[1], q[2];
cx q[0], q[2];
"""
circuit = parse_circuit(src)

print("1. encoding schedule with two logical slots")
sched = allocate_encodings(circuit, max_logic=2)
for ev in sched.event_tuples():
    print("  ", ev)
n2, nc, ratio = conversion_stats(sched)
print(f"   n2={n2} nc={nc} ratio={ratio}")

print("2. a bigger register removes the paid conversions")
for k in (2, 3):
    print(f"   MAX_LOGIC={k}: nc={allocate_encodings(circuit, k).nc}")

print("3. routed program")
res = compile_circuit(circuit, max_logic=2)
text = serialize(res.program)
print("\n".join("   " + line for line in text.splitlines() if not line.startswith("#")))
print("   validator diagnostics:", validate(res.program))

print("4. zero-noise execution against direct simulation")
run = execute_program(res.program, seed=0)
print("   matches:", matches_direct(run, circuit))
