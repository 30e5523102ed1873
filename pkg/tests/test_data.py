import numpy as np
import pytest

from daln import data


class TestMakeMoons:
    def test_class_balance(self):
        ds = data.make_moons(300, 0.1, seed=0)
        np.testing.assert_array_equal(ds.class_sizes(), [150, 150])
        assert ds.features.shape == (300, 2)

    def test_noiseless_upper_moon_on_unit_circle(self):
        ds = data.make_moons(100, 0.0, seed=0)
        x = ds.features[ds.labels == 0]
        np.testing.assert_allclose(np.hypot(x[:, 0], x[:, 1]), 1.0, atol=1e-12)
        assert np.all(x[:, 1] >= -1e-12)

    def test_noiseless_lower_moon_geometry(self):
        ds = data.make_moons(100, 0.0, seed=0)
        x = ds.features[ds.labels == 1]
        np.testing.assert_allclose(np.hypot(x[:, 0] - 1.0, x[:, 1] - 0.5), 1.0, atol=1e-12)
        assert np.all(x[:, 1] <= 0.5 + 1e-12)

    def test_deterministic(self):
        a, b = data.make_moons(300, 0.1, seed=7), data.make_moons(300, 0.1, seed=7)
        assert np.array_equal(a.features, b.features)
        assert not np.array_equal(a.features, data.make_moons(300, 0.1, seed=8).features)

    def test_odd_n(self):
        with pytest.raises(ValueError):
            data.make_moons(301)


class TestRotate:
    def setup_method(self):
        self.ds = data.make_moons(60, 0.1, seed=1)

    def test_zero_and_full_turn(self):
        assert np.array_equal(data.rotate(self.ds, 0).features, self.ds.features)
        np.testing.assert_allclose(data.rotate(self.ds, 360).features, self.ds.features, atol=1e-12)

    def test_angle_advances_by_thirty_degrees(self):
        c = self.ds.features.mean(axis=0)
        before = self.ds.features - c
        after = data.rotate(self.ds, 30).features - c
        d = np.angle(after[:, 0] + 1j * after[:, 1]) - np.angle(before[:, 0] + 1j * before[:, 1])
        d = (d + np.pi) % (2 * np.pi) - np.pi
        np.testing.assert_allclose(d, np.deg2rad(30), atol=1e-12)

    def test_preserves_distances_and_labels(self):
        r = data.rotate(self.ds, 30)
        x, y = self.ds.features, r.features
        dx = np.linalg.norm(x[:, None] - x[None], axis=-1)
        dy = np.linalg.norm(y[:, None] - y[None], axis=-1)
        np.testing.assert_allclose(dx, dy, atol=1e-12)
        assert np.array_equal(r.labels, self.ds.labels)

    def test_needs_2d(self):
        ds = data.Dataset(np.ones((3, 3)), None, "source", 2)
        with pytest.raises(ValueError):
            data.rotate(ds, 30)


class TestSubsample:
    def test_full_class_keeps_multiset(self):
        ds = data.make_moons(40, 0.1, seed=2)
        out = data.subsample_class(ds, 0, 20, seed=0)
        assert sorted(map(tuple, out.features)) == sorted(map(tuple, ds.features))

    def test_imbalanced_fixture(self):
        _, target = data.moons_domains(300, 0.1, 30, seed=0, imbalanced_keep=38)
        np.testing.assert_array_equal(target.class_sizes(), [38, 150])

    def test_deterministic(self):
        ds = data.make_moons(300, 0.1, seed=3)
        a = data.subsample_class(ds, 0, 38, seed=5)
        b = data.subsample_class(ds, 0, 38, seed=5)
        assert np.array_equal(a.features, b.features)

    def test_keep_too_large(self):
        with pytest.raises(ValueError):
            data.subsample_class(data.make_moons(20), 0, 11, seed=0)


class TestCsv:
    def test_labeled_fixture(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("# x,y,label\n0.5,1.0,0\n-1,2,1\n3e-1,4,1\n")
        ds = data.load_csv(p, has_labels=True, k=2)
        assert ds.features.shape == (3, 2)
        np.testing.assert_array_equal(ds.labels, [0, 1, 1])

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(ValueError):
            data.load_csv(p, has_labels=False, k=2)

    def test_parse_error_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,0\n1,abc,1\n")
        with pytest.raises(ValueError, match=":2:"):
            data.load_csv(p, has_labels=True, k=2)

    def test_ragged_rows(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("1,2,0\n1,1\n")
        with pytest.raises(ValueError, match=":2:"):
            data.load_csv(p, has_labels=True, k=2)

    def test_label_out_of_range(self, tmp_path):
        p = tmp_path / "lab.csv"
        p.write_text("1,2,0\n1,1,5\n")
        with pytest.raises(ValueError, match="outside"):
            data.load_csv(p, has_labels=True, k=2)

    def test_round_trip(self, tmp_path):
        ds = data.make_moons(50, 0.1, seed=4)
        p = tmp_path / "rt.csv"
        data.write_csv(ds, p)
        back = data.load_csv(p, has_labels=True, k=2)
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, ds.labels)


class TestBoundaryGrid:
    def test_corners(self):
        g = data.boundary_grid((0, 1), (0, 1), 2)
        np.testing.assert_array_equal(g, [[0, 0], [1, 0], [0, 1], [1, 1]])

    def test_row_count_and_determinism(self):
        a = data.boundary_grid((-1, 2), (-1, 1.5), 7)
        assert a.shape == (49, 2)
        assert np.array_equal(a, data.boundary_grid((-1, 2), (-1, 1.5), 7))

    def test_resolution_too_small(self):
        with pytest.raises(ValueError):
            data.boundary_grid((0, 1), (0, 1), 1)


def test_streams_are_independent_and_stable():
    a = data.stream(3, "init").random(4)
    b = data.stream(3, "data").random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, data.stream(3, "init").random(4))
    with pytest.raises(KeyError):
        data.stream(3, "nope")
