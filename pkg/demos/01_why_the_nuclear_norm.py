"""Why the nuclear norm of a prediction batch is a useful critic.

Run: python demos/01_why_the_nuclear_norm.py
"""

# %% [markdown]
# A batch of predictions Z (b rows, one probability vector each) has a
# self-correlation matrix R = Z^T Z.  Its trace I_a measures how much mass
# sits on the diagonal (confident, class-consistent rows); the off-diagonal
# sum I_e measures confusion.  The two always add up to the batch size.

# %%
import numpy as np

from daln import linalg
from daln.metrics import self_correlation

confident_one_class = np.tile([0.98, 0.01, 0.01], (6, 1))
confident_diverse = np.eye(3)[[0, 1, 2, 0, 1, 2]] * 0.97 + 0.01
hesitant = np.full((6, 3), 1 / 3)

for name, z in [("confident, one class", confident_one_class),
                ("confident, all classes", confident_diverse),
                ("hesitant", hesitant)]:
    sc = self_correlation(z)
    print(f"{name:<24} I_a={sc.i_a:6.3f}  I_e={sc.i_e:6.3f}  "
          f"||Z||_F={linalg.frobenius(z):.3f}  ||Z||_*={linalg.nuclear(z):.3f}")

# %% [markdown]
# The Frobenius norm (sqrt of I_a) rewards confidence alone: the collapsed
# batch scores as high as the diverse one.  The nuclear norm also rewards
# spreading predictions over classes, because a batch predicting one class is
# rank one.  Both are sandwiched by ||Z||_F <= ||Z||_* <= sqrt(min(b, k)) ||Z||_F.

# %%
rng = np.random.default_rng(0)
z = rng.dirichlet(np.ones(4), size=10)
s = linalg.singular_values(z)
print("singular values:", np.round(s, 4))
print("bounds hold:", linalg.frobenius(z) <= s.sum() <= np.sqrt(4) * linalg.frobenius(z))
