import math

import numpy as np
import pytest

from daln import autodiff as ad
from daln.data import Dataset, make_moons, moons_domains
from daln.model import Model
from daln.trainer import (ConfigError, NumericAbort, TrainConfig, evaluate, grl_schedule, lr_schedule, sgd_step,
                          train)


def node(v):
    return ad.Node(np.array(v, dtype=np.float64), True)


class TestSgdStep:
    def test_plain_descent(self):
        p = node([[1.0, 2.0]])
        sgd_step([p], [np.array([[0.5, -1.0]])], 0.1, 0.0, 0.0, {})
        np.testing.assert_array_equal(p.value, [[0.95, 2.1]])

    def test_zero_gradient_no_decay(self):
        p = node([[3.0]])
        vel = {}
        for _ in range(3):
            sgd_step([p], [np.zeros((1, 1))], 0.1, 0.9, 0.0, vel)
        assert p.value[0, 0] == 3.0

    def test_two_steps_on_quadratic_match_scalar_oracle(self):
        # loss 0.5 * a * x^2, gradient a * x
        a, lr, m, wd = 3.0, 0.05, 0.9, 1e-3
        p = node([[2.0]])
        vel = {}
        x, v = 2.0, 0.0
        for _ in range(2):
            sgd_step([p], [a * p.value], lr, m, wd, vel)
            v = m * v + a * x + wd * x
            x = x - lr * v
        assert abs(p.value[0, 0] - x) <= 1e-15

    def test_shape_mismatch(self):
        with pytest.raises(ad.ShapeError):
            sgd_step([node([[1.0, 2.0]])], [np.zeros((2, 1))], 0.1, 0.0, 0.0, {})


class TestSchedules:
    def test_lr_endpoints(self):
        assert lr_schedule(0.01, 0.0) == 0.01
        assert lr_schedule(1.0, 1.0) == pytest.approx(11 ** -0.75)
        assert lr_schedule(1.0, 1.0) == pytest.approx(0.1655, abs=1e-4)

    def test_lr_monotone(self):
        ps = np.linspace(0, 1, 101)
        vals = [lr_schedule(0.005, p) for p in ps]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_grl_endpoints_and_range(self):
        assert grl_schedule(0.0) == 0.0
        assert grl_schedule(1.0) == pytest.approx(0.99991, abs=1e-5)
        vals = [grl_schedule(p) for p in np.linspace(0, 1, 101)]
        assert all(0.0 <= v < 1.0 for v in vals)
        assert all(a <= b for a, b in zip(vals, vals[1:]))


class TestConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.batch_size, c.momentum, c.weight_decay, c.lr_classifier) == (36, 0.9, 1e-3, 5e-3)
        assert c.extractor_lr == pytest.approx(5e-4)
        assert (c.lam, c.gamma, c.grl_gamma, c.lr_alpha, c.lr_beta) == (1.0, 0.01, 10.0, 10.0, 0.75)

    @pytest.mark.parametrize("bad", [{"batch_size": 1}, {"lam": -1.0}, {"gamma": -0.1}, {"mode": "mdd"},
                                     {"momentum": float("nan")}, {"epochs": 0}, {"critic": "spectral"}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)

    def test_round_trip(self):
        c = TrainConfig(lam=0.5, layer_dims=(2, 4, 3))
        assert TrainConfig.from_dict(c.to_dict()) == c

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({"alpha": 1})


def _small(mode="daln", **kw):
    return TrainConfig(mode=mode, epochs=kw.pop("epochs", 3), seed=kw.pop("seed", 0), **kw)


@pytest.fixture(scope="module")
def domains():
    return moons_domains(120, 0.1, 30, seed=0)


class TestTrain:
    @pytest.mark.parametrize("mode", ["daln", "dann", "dann_nwd", "source_only"])
    def test_runs_and_logs(self, domains, mode):
        model, log = train(_small(mode), *domains)
        assert len(log.epochs) == 3
        assert [r.step for r in log.steps] == list(range(len(log.steps)))
        assert len(log.steps) == 3 * math.ceil(120 / 36)
        for r in log.steps:
            assert all(math.isfinite(v) for v in (r.lr, r.grl_coeff, r.l_cls, r.l_nwd))
        assert all(np.all(np.isfinite(p.value)) for p in model.parameters())
        assert (model.discriminator is not None) == (mode in ("dann", "dann_nwd"))

    def test_schedules_use_step_over_total(self, domains):
        cfg = _small(steps_per_epoch=5, epochs=2)
        _, log = train(cfg, *domains)
        for r in log.steps:
            p = r.step / 10
            assert r.lr == lr_schedule(cfg.lr_classifier, p)
            assert r.grl_coeff == grl_schedule(p)

    def test_lambda_zero_matches_source_only_bitwise(self, domains):
        _, a = train(_small("daln", lam=0.0), *domains)
        _, b = train(_small("source_only"), *domains)
        assert [(r.lr, r.grl_coeff, r.l_cls, r.l_nwd) for r in a.steps] == \
               [(r.lr, r.grl_coeff, r.l_cls, r.l_nwd) for r in b.steps]
        assert [r.to_json() for r in a.epochs] == [r.to_json() for r in b.epochs]

    def test_deterministic(self, domains, tmp_path):
        for i in range(2):
            _, log = train(_small(), *domains)
            log.write(tmp_path / str(i))
        for name in ("steps.csv", "metrics.jsonl"):
            assert (tmp_path / "0" / name).read_bytes() == (tmp_path / "1" / name).read_bytes()

    def test_seed_changes_run(self, domains):
        _, a = train(_small(seed=0), *domains)
        _, b = train(_small(seed=1), *domains)
        assert a.steps[0].l_cls != b.steps[0].l_cls

    def test_unlabeled_target(self, domains):
        source, target = domains
        unlabeled = Dataset(target.features, None, "target", 2)
        _, log = train(_small(epochs=1), source, unlabeled)
        assert math.isnan(log.final.accuracy)
        assert math.isfinite(log.final.l_nwd)

    def test_class_count_mismatch(self, domains):
        source, target = domains
        other = Dataset(target.features, None, "target", 3)
        with pytest.raises(ConfigError):
            train(_small(), source, other)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numeric_abort_names_step(self, domains):
        with pytest.raises(NumericAbort) as info:
            train(_small(lr_classifier=1e305), *domains)
        assert f"step {info.value.step}" in str(info.value)
        assert info.value.step < 5

    def test_classifier_norm_tracked(self, domains):
        _, log = train(_small(), *domains)
        assert log.initial_classifier_norm > 0
        assert all(r.extras["classifier_norm"] > 0 for r in log.epochs)

    def test_source_only_fits_source(self):
        # supervised moons should be fit to 99% within 100 epochs of defaults
        source, target = moons_domains(300, 0.1, 30, seed=0)
        _, log = train(TrainConfig(mode="source_only", epochs=100, seed=0, probe_every=100), source, target)
        assert log.final.extras["source_accuracy"] >= 0.99


class TestEvaluate:
    def test_perfect_model(self):
        x = np.array([[-2.0, 0.3], [-1.0, -0.4], [1.0, 0.2], [3.0, 1.0]])
        ds = Dataset(x, np.array([0, 0, 1, 1]), "source", 2)
        model = Model.init((2, 1), 2, np.random.default_rng(0))
        model.extractor.weights[0].value = np.array([[1.0], [0.0]])
        model.classifier.weight.value = np.array([[-100.0], [100.0]])
        rep = evaluate(model, ds)
        assert rep.accuracy == 1.0 and rep.determinacy_ratio == 1.0

    def test_repeatable_and_pure(self):
        ds = make_moons(40, 0.1, seed=1)
        model = Model.init((2, 4, 3), 2, np.random.default_rng(1))
        before = [p.value.copy() for p in model.parameters()]
        assert evaluate(model, ds).to_json() == evaluate(model, ds).to_json()
        assert all(np.array_equal(a, p.value) for a, p in zip(before, model.parameters()))

    def test_matches_metrics_module(self):
        from daln import metrics
        ds = make_moons(40, 0.1, seed=2)
        model = Model.init((2, 4, 3), 2, np.random.default_rng(2))
        probs = model.predict_proba(ds.features)
        conf, acc, rec = metrics.confusion_and_accuracy(probs, ds.labels)
        rep = evaluate(model, ds)
        assert rep.accuracy == acc and rep.confusion == conf.tolist()
        assert rep.determinacy_ratio == metrics.determinacy_ratio(probs, ds.labels)

    def test_unlabeled(self):
        ds = Dataset(np.zeros((3, 2)), None, "target", 2)
        with pytest.raises(ValueError):
            evaluate(Model.init((2, 3), 2, np.random.default_rng(0)), ds)
