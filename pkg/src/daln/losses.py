"""Training objectives.

Sign convention for every adversarial term: the returned ``total`` is always
*descended*.  The critic branch places a gradient reversal between the
features and the classifier, and ``total`` subtracts ``weight * L_nwd``, so a
descent step moves the classifier up the discrepancy and the feature
extractor down it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .model import Classifier, Discriminator, FeatureExtractor, classify, critic_score, discriminate, extract


@dataclass
class LossBundle:
    total: Node
    cls: float
    nwd: float = 0.0
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        values = [self.total.item(), self.cls, self.nwd, *self.extras.values()]
        if not all(np.isfinite(values)):
            raise FloatingPointError(f"non-finite loss component: total={values[0]}, cls={self.cls}, "
                                     f"nwd={self.nwd}, extras={self.extras}")


@dataclass
class DomainBatch:
    x_s: np.ndarray
    y_s: np.ndarray
    x_t: np.ndarray


def _taped(tape: ad.Tape | None, x) -> Node:
    if isinstance(x, Node):
        return x
    return (tape or ad.Tape()).constant(x)


def classification_loss(c: Classifier, g: FeatureExtractor, x_s, y_s, tape: ad.Tape | None = None) -> Node:
    return ad.cross_entropy_rows(classify(c, extract(g, _taped(tape, x_s))), y_s)


def critic_discrepancy(c: Classifier, f_s: Node, f_t: Node, grl_coeff: float, norm: str = "nuclear") -> Node:
    """Source critic score minus target critic score, both behind a gradient reversal."""
    if f_s.shape[0] == 0 or f_t.shape[0] == 0:
        raise ValueError("critic discrepancy needs nonempty source and target batches")
    d_s = critic_score(c, ad.grad_reverse(f_s, grl_coeff), norm)
    d_t = critic_score(c, ad.grad_reverse(f_t, grl_coeff), norm)
    return ad.sub(d_s, d_t)


def _check_batches(x_s, x_t):
    if len(x_s) == 0 or len(x_t) == 0:
        raise ValueError("source and target batches must be nonempty")


def nwd_loss(c: Classifier, g: FeatureExtractor, x_s, x_t, grl_coeff: float, tape: ad.Tape | None = None) -> Node:
    _check_batches(x_s, x_t)
    tape = tape or ad.Tape()
    f_s = extract(g, _taped(tape, x_s))
    f_t = extract(g, _taped(tape, x_t))
    return critic_discrepancy(c, f_s, f_t, grl_coeff, "nuclear")


def frobenius_critic_loss(c: Classifier, g: FeatureExtractor, x_s, x_t, grl_coeff: float,
                          tape: ad.Tape | None = None) -> Node:
    _check_batches(x_s, x_t)
    tape = tape or ad.Tape()
    f_s = extract(g, _taped(tape, x_s))
    f_t = extract(g, _taped(tape, x_t))
    return critic_discrepancy(c, f_s, f_t, grl_coeff, "frobenius")


def daln_total(c: Classifier, g: FeatureExtractor, batch: DomainBatch, lam: float, grl_coeff: float,
               tape: ad.Tape | None = None, critic: str = "nuclear") -> LossBundle:
    """Supervised loss minus ``lam`` times the reversed-gradient critic discrepancy."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    _check_batches(batch.x_s, batch.x_t)
    tape = tape or ad.Tape()
    f_s = extract(g, tape.constant(batch.x_s))
    l_cls = ad.cross_entropy_rows(classify(c, f_s), batch.y_s)
    if lam == 0:
        return LossBundle(total=l_cls, cls=l_cls.item(), nwd=_detached_nwd(c, g, f_s, batch.x_t, critic))
    f_t = extract(g, tape.constant(batch.x_t))
    l_nwd = critic_discrepancy(c, f_s, f_t, grl_coeff, critic)
    total = ad.sub(l_cls, ad.scale(l_nwd, lam))
    return LossBundle(total=total, cls=l_cls.item(), nwd=l_nwd.item())


def _detached_nwd(c, g, f_s: Node, x_t, critic: str) -> float:
    # reporting only: evaluated on a scratch tape so the training graph is untouched
    scratch = ad.Tape()
    fs = scratch.constant(f_s.value)
    ft = scratch.constant(extract(g, scratch.constant(x_t)).value)
    return critic_discrepancy(c, fs, ft, 0.0, critic).item()


def domain_loss(d: Discriminator, f_s: Node, f_t: Node, grl_coeff: float) -> Node:
    """Mean binary cross-entropy of the discriminator; source labeled 1, target 0."""
    p_s = discriminate(d, ad.grad_reverse(f_s, grl_coeff))
    p_t = discriminate(d, ad.grad_reverse(f_t, grl_coeff))
    b_s, b_t = p_s.shape[0], p_t.shape[0]
    l_s = ad.binary_cross_entropy(p_s, np.ones(b_s))
    l_t = ad.binary_cross_entropy(p_t, np.zeros(b_t))
    return ad.scale(ad.add(ad.scale(l_s, b_s), ad.scale(l_t, b_t)), 1.0 / (b_s + b_t))


def dann_losses(c: Classifier, g: FeatureExtractor, disc: Discriminator, batch: DomainBatch, grl_coeff: float,
                tape: ad.Tape | None = None) -> tuple[LossBundle, Node, Node]:
    """DANN objective.  Also returns the source and target feature nodes so a
    regularizer can reuse them without a second forward pass."""
    _check_batches(batch.x_s, batch.x_t)
    tape = tape or ad.Tape()
    f_s = extract(g, tape.constant(batch.x_s))
    f_t = extract(g, tape.constant(batch.x_t))
    l_cls = ad.cross_entropy_rows(classify(c, f_s), batch.y_s)
    l_dom = domain_loss(disc, f_s, f_t, grl_coeff)
    total = ad.add(l_cls, l_dom)
    bundle = LossBundle(total=total, cls=l_cls.item(), extras={"spe": l_dom.item()})
    return bundle, f_s, f_t


def regularized_total(base: LossBundle, nwd: Node, gamma: float) -> LossBundle:
    """Add the critic discrepancy as a regularizer with weight ``gamma``."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    extras = dict(base.extras)
    extras["nwd"] = nwd.item()
    if gamma == 0:
        return LossBundle(total=base.total, cls=base.cls, nwd=nwd.item(), extras=extras)
    total = ad.sub(base.total, ad.scale(nwd, gamma))
    return LossBundle(total=total, cls=base.cls, nwd=nwd.item(), extras=extras)
