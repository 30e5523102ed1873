"""SGD training loop for DALN, the DANN baseline, DANN with the NWD regularizer
and source-only training."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import metrics
from .data import Dataset, stream
from .linalg import SvdConvergenceError
from .losses import DomainBatch, LossBundle, critic_discrepancy, daln_total, dann_losses, regularized_total
from .model import DEFAULT_LAYER_DIMS, Model, classify, extract

log = logging.getLogger(__name__)

MODES = ("daln", "dann", "dann_nwd", "source_only")


class ConfigError(ValueError):
    pass


class NumericAbort(FloatingPointError):
    def __init__(self, step: int, what: str):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step


@dataclass
class TrainConfig:
    epochs: int = 200
    steps_per_epoch: int | None = None  # None: ceil(len(source) / batch_size)
    batch_size: int = 36
    momentum: float = 0.9
    weight_decay: float = 1e-3
    lr_classifier: float = 5e-3
    lr_extractor: float | None = None  # None: lr_classifier / 10
    lam: float = 1.0
    gamma: float = 0.01
    grl_gamma: float = 10.0
    lr_alpha: float = 10.0
    lr_beta: float = 0.75
    seed: int = 0
    mode: str = "daln"
    layer_dims: tuple[int, ...] = DEFAULT_LAYER_DIMS
    critic: str = "nuclear"
    probe_every: int = 1  # epochs between proxy A-distance evaluations

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.critic not in ("nuclear", "frobenius"):
            raise ConfigError(f"critic must be 'nuclear' or 'frobenius', got {self.critic!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ConfigError("steps_per_epoch must be at least 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if self.probe_every < 1:
            raise ConfigError("probe_every must be at least 1")
        for name in ("momentum", "weight_decay", "lr_classifier", "lam", "gamma", "grl_gamma", "lr_alpha", "lr_beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be a finite nonnegative number, got {v}")
        if self.lr_extractor is not None and not (math.isfinite(self.lr_extractor) and self.lr_extractor >= 0):
            raise ConfigError(f"lr_extractor must be a finite nonnegative number, got {self.lr_extractor}")

    @property
    def extractor_lr(self) -> float:
        return self.lr_classifier / 10.0 if self.lr_extractor is None else self.lr_extractor

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer_dims"] = list(self.layer_dims)
        return d


@dataclass
class StepRecord:
    step: int
    lr: float
    grl_coeff: float
    l_cls: float
    l_nwd: float


@dataclass
class TrainLog:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[metrics.MetricsReport] = field(default_factory=list)
    initial_classifier_norm: float = float("nan")

    @property
    def final(self) -> metrics.MetricsReport:
        return self.epochs[-1]

    @property
    def best_accuracy(self) -> float:
        return max(r.accuracy for r in self.epochs)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "steps.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "lr", "grl_coeff", "l_cls", "l_nwd"])
            for r in self.steps:
                w.writerow([r.step, repr(r.lr), repr(r.grl_coeff), repr(r.l_cls), repr(r.l_nwd)])
        with open(out / "metrics.jsonl", "w") as fh:
            for rep in self.epochs:
                fh.write(rep.to_json() + "\n")


def sgd_step(params, grads, lr: float, momentum: float, weight_decay: float, velocity: dict) -> None:
    """Momentum SGD with coupled weight decay, in place.

    ``v <- momentum * v + grad + weight_decay * param``; ``param <- param - lr * v``.
    ``velocity`` maps ``id(param)`` to its buffer and is created lazily.
    """
    for p, g in zip(params, grads):
        if g.shape != p.value.shape:
            raise ad.ShapeError(f"gradient shape {g.shape} does not match parameter shape {p.value.shape}")
        v = velocity.get(id(p))
        if v is None:
            v = np.zeros_like(p.value)
        v = momentum * v + g + weight_decay * p.value
        velocity[id(p)] = v
        p.value = p.value - lr * v


def lr_schedule(lr0: float, p: float, alpha: float = 10.0, beta: float = 0.75) -> float:
    return lr0 / (1.0 + alpha * p) ** beta


def grl_schedule(p: float, grl_gamma: float = 10.0) -> float:
    return 2.0 / (1.0 + math.exp(-grl_gamma * p)) - 1.0


class _CyclicBatches:
    """Endless shuffled mini-batches; reshuffles each time the data is exhausted."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        out = []
        need = self.batch_size
        while need:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            take = min(need, self.n - self.pos)
            out.append(self.order[self.pos:self.pos + take])
            self.pos += take
            need -= take
        return np.concatenate(out)


def _check_datasets(source: Dataset, target: Dataset) -> None:
    if source.labels is None:
        raise ConfigError("source dataset must be labeled")
    if source.class_count != target.class_count:
        raise ConfigError(f"class counts differ: source {source.class_count}, target {target.class_count}")
    if source.dim != target.dim:
        raise ConfigError(f"feature widths differ: source {source.dim}, target {target.dim}")


def evaluate(model: Model, ds: Dataset, epoch: int = 0) -> metrics.MetricsReport:
    """Classification metrics of ``model`` on one labeled dataset."""
    if ds.labels is None:
        raise ValueError("evaluate needs a labeled dataset")
    probs = model.predict_proba(ds.features)
    confusion, acc, recall = metrics.confusion_and_accuracy(probs, ds.labels)
    tape = ad.Tape()
    l_cls = ad.cross_entropy_rows(tape.constant(probs), ds.labels).item()
    sc = metrics.self_correlation(probs)
    return metrics.MetricsReport(
        epoch=epoch,
        accuracy=acc,
        per_class_recall=[float(r) for r in recall],
        confusion=confusion.tolist(),
        per_class_correct=[int(c) for c in metrics.per_class_correct(probs, ds.labels)],
        determinacy_ratio=metrics.determinacy_ratio(probs, ds.labels),
        l_cls=l_cls,
        i_a_src=float("nan"),
        i_e_src=float("nan"),
        i_a_tgt=sc.i_a,
        i_e_tgt=sc.i_e,
    )


def evaluate_domains(model: Model, source: Dataset, target: Dataset, epoch: int, critic: str = "nuclear",
                     probe: bool = True, probe_seed: int = 0) -> metrics.MetricsReport:
    """Target-set report plus domain-level diagnostics.

    Target labels are used for reporting only.  ``l_cls`` is the source
    cross-entropy and ``l_nwd`` the critic discrepancy on the full sets.
    """
    tape = ad.Tape()
    f_s = extract(model.extractor, tape.constant(source.features))
    f_t = extract(model.extractor, tape.constant(target.features))
    p_s = classify(model.classifier, f_s)
    p_t = classify(model.classifier, f_t)
    l_cls = ad.cross_entropy_rows(p_s, source.labels).item()
    l_nwd = critic_discrepancy(model.classifier, f_s, f_t, 0.0, critic).item()
    sc_s = metrics.self_correlation(p_s.value)
    sc_t = metrics.self_correlation(p_t.value)
    report = metrics.MetricsReport(
        epoch=epoch,
        accuracy=float("nan"),
        per_class_recall=[],
        confusion=[],
        per_class_correct=[],
        determinacy_ratio=float("nan"),
        l_cls=l_cls,
        l_nwd=l_nwd,
        mmd=metrics.mmd_rbf(f_s.value, f_t.value),
        a_distance=metrics.proxy_a_distance(f_s.value, f_t.value, seed=probe_seed) if probe else float("nan"),
        i_a_src=sc_s.i_a,
        i_e_src=sc_s.i_e,
        i_a_tgt=sc_t.i_a,
        i_e_tgt=sc_t.i_e,
    )
    report.extras["source_accuracy"] = metrics.confusion_and_accuracy(p_s.value, source.labels)[1]
    if target.labels is not None:
        confusion, acc, recall = metrics.confusion_and_accuracy(p_t.value, target.labels)
        report.accuracy = acc
        report.per_class_recall = [float(r) for r in recall]
        report.confusion = confusion.tolist()
        report.per_class_correct = [int(c) for c in metrics.per_class_correct(p_t.value, target.labels)]
        report.determinacy_ratio = metrics.determinacy_ratio(p_t.value, target.labels)
    return report


def _build_loss(model: Model, config: TrainConfig, batch: DomainBatch, grl_coeff: float, tape: ad.Tape) -> LossBundle:
    g, c = model.extractor, model.classifier
    if config.mode == "source_only":
        return daln_total(c, g, batch, 0.0, grl_coeff, tape, critic=config.critic)
    if config.mode == "daln":
        return daln_total(c, g, batch, config.lam, grl_coeff, tape, critic=config.critic)
    bundle, f_s, f_t = dann_losses(c, g, model.discriminator, batch, grl_coeff, tape)
    if config.mode == "dann":
        return bundle
    nwd = critic_discrepancy(c, f_s, f_t, grl_coeff, config.critic)
    return regularized_total(bundle, nwd, config.gamma)


def train(config: TrainConfig, source: Dataset, target: Dataset,
          on_epoch=None) -> tuple[Model, TrainLog]:
    """Train a model per ``config.mode``.  ``on_epoch(report)`` is called after
    each epoch's evaluation."""
    config.validate()
    _check_datasets(source, target)
    dims = (source.dim, *config.layer_dims[1:])
    model = Model.init(dims, source.class_count, stream(config.seed, "init"),
                       with_discriminator=config.mode in ("dann", "dann_nwd"))
    shuffle = stream(config.seed, "shuffle")
    src_batches = _CyclicBatches(len(source), config.batch_size, shuffle)
    tgt_batches = _CyclicBatches(len(target), config.batch_size, shuffle)
    steps_per_epoch = config.steps_per_epoch or math.ceil(len(source) / config.batch_size)
    total_steps = config.epochs * steps_per_epoch

    groups = [(model.extractor.parameters(), config.extractor_lr),
              (model.classifier.parameters(), config.lr_classifier)]
    if model.discriminator is not None:
        groups.append((model.discriminator.parameters(), config.lr_classifier))
    velocity: dict = {}
    trainlog = TrainLog(initial_classifier_norm=float(np.linalg.norm(model.classifier.weight.value)))
    step = 0
    for epoch in range(1, config.epochs + 1):
        for _ in range(steps_per_epoch):
            p = step / total_steps
            grl_coeff = grl_schedule(p, config.grl_gamma)
            model.grl.coeff = grl_coeff
            si = src_batches.next()
            ti = tgt_batches.next()
            batch = DomainBatch(source.features[si], source.labels[si], target.features[ti])
            tape = ad.Tape()
            try:
                bundle = _build_loss(model, config, batch, grl_coeff, tape)
            except (FloatingPointError, SvdConvergenceError):
                raise NumericAbort(step, "loss") from None
            tape.backward(bundle.total)
            for params, lr0 in groups:
                lr = lr_schedule(lr0, p, config.lr_alpha, config.lr_beta)
                sgd_step(params, [q.grad for q in params], lr, config.momentum, config.weight_decay, velocity)
            tape.clear()
            for q in model.parameters():
                if not np.all(np.isfinite(q.value)):
                    raise NumericAbort(step, "parameter")
            trainlog.steps.append(StepRecord(step, lr_schedule(config.lr_classifier, p, config.lr_alpha,
                                                               config.lr_beta), grl_coeff, bundle.cls, bundle.nwd))
            step += 1
        probe = epoch == 1 or epoch == config.epochs or epoch % config.probe_every == 0
        report = evaluate_domains(model, source, target, epoch, config.critic, probe=probe, probe_seed=config.seed)
        report.extras["classifier_norm"] = float(np.linalg.norm(model.classifier.weight.value))
        trainlog.epochs.append(report)
        if on_epoch is not None:
            on_epoch(report)
        log.debug("epoch %d acc=%.4f l_cls=%.4f l_nwd=%.4f", epoch, report.accuracy, report.l_cls, report.l_nwd)
    return model, trainlog
