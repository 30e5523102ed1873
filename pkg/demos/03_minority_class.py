"""Does the critic keep a thinned-out class alive?

Run: python demos/03_minority_class.py [epochs]
"""

# %% [markdown]
# Same rotated moons, but the target keeps only 38 of its 150 upper-moon
# points.  A domain discriminator that matches the marginal feature
# distributions can push minority points onto the majority side.  Per-class
# correct counts ("diversity") and minority recall show what each method
# does with the rare class.

# %%
import sys

from daln.data import moons_domains
from daln.trainer import TrainConfig, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
for seed in range(2):
    source, target = moons_domains(300, 0.1, 30, seed=seed, imbalanced_keep=38)
    for mode in ("source_only", "dann", "daln"):
        _, log = train(TrainConfig(mode=mode, epochs=epochs, seed=seed, probe_every=epochs), source, target)
        f = log.final
        print(f"seed {seed} {mode:<12} acc {f.accuracy:.3f}  minority recall {f.per_class_recall[0]:.3f}  "
              f"correct per class {f.per_class_correct} of {target.class_sizes().tolist()}  "
              f"determinacy {f.determinacy_ratio:.3f}")
