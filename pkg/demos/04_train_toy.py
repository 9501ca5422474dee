"""Train the classifier on a trivially separable task and watch it converge.

All-black vs all-white 4x4 images are linearly separable from the memory
readout after a single cell pass, so this doubles as a fast sanity check of
the whole pipeline: encoding, cell circuit, softmax head, and the exact
adjoint gradient driving Adam.
"""

import numpy as np

from frqi_pairs import model, train

black = np.zeros(16)
white = np.full(16, np.pi / 2)
angles = np.stack([black, white] * 10)
labels = np.array([0, 1] * 10)

config = model.ModelConfig(n=2, num_classes=2, pairing="triangular")
tcfg = train.TrainConfig(epochs=10, batch_size=4, seed=0)

pqc, head = model.count_parameters(config)
print(f"model: {len(model.build_cell_schedule(config))} cells, "
      f"{pqc} circuit + {head} head parameters\n")


def progress(epoch, tr, te):
    bar = "#" * int(te.accuracy * 30)
    print(f"epoch {epoch:2d}  loss {tr.loss:.4f}  test acc {te.accuracy:5.0%}  {bar}")


result = train.fit(config, angles, labels, angles, labels, tcfg, progress=progress)
best = result.metrics.best_epoch
print(f"\nbest epoch {best}: accuracy {result.metrics.test_acc[best]:.0%}")
print("confusion matrix (rows = truth):")
print(result.metrics.confusion)
