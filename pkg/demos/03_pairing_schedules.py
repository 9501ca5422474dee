"""Compare the cell schedules of the three classifier variants.

A QRNN cell couples a few input qubits into the persistent memory register.
The single-cell variant reads every FRQI qubit at once; the pairs variant
reads {color, x_i, y_j} per cell, which keeps each cell small while still
touching every position bit.  Triangular pairing drops the (j < i)
duplicates, giving six cells at n=3 with 716 trainable parameters total.
"""

from frqi_pairs import model


def show(label, config):
    cells = model.build_cell_schedule(config)
    pqc, head = model.count_parameters(config)
    print(f"{label}:")
    print(f"  cells ({len(cells)}): {cells}")
    print(f"  parameters: {pqc} circuit + {head} head = {pqc + head}")
    print()


base = dict(memory_qubits=4, deep_layers=1, n=3, num_classes=10)

show("single-cell", model.ModelConfig(variant="single-cell", **base))
show("naive (2 repetitions)", model.ModelConfig(variant="naive", repetitions=2, **base))
show("frqi-pairs, cross (n^2 = 9 cells)",
     model.ModelConfig(variant="frqi-pairs", pairing="cross", **base))
show("frqi-pairs, triangular (n(n+1)/2 = 6 cells)",
     model.ModelConfig(variant="frqi-pairs", pairing="triangular", **base))

c = model.ModelConfig(variant="frqi-pairs", pairing="triangular", **base)
print("parameter map of the first cell (flat index -> location):")
for k in range(5):
    print(f"  {k}: {model.describe_parameter(c, k)}")
print("  ...")
