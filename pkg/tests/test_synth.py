"""Synthetic-volume and toy-example tests."""

import numpy as np
import pytest

from geoal.entropy import total_entropy
from geoal.graph import propagate
from geoal.synth import SynthSpec, SynthError, fig3_toy, generate, synth_dataset


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(SynthError):
            SynthSpec(dims=(16, 16, 16), kind="torus")

    def test_negative_noise(self):
        with pytest.raises(SynthError):
            SynthSpec(dims=(16, 16, 16), kind="sphere", noise_std=-0.1)

    def test_dims_too_small(self):
        with pytest.raises(SynthError):
            SynthSpec(dims=(4, 16, 16), kind="sphere")


class TestGenerate:
    def test_noiseless_sphere_two_levels(self):
        spec = SynthSpec(dims=(16, 16, 16), kind="sphere", noise_std=0.0)
        intens, truth = generate(spec)
        assert set(np.unique(intens.voxels)) == {0.0, 1.0}
        assert set(np.unique(truth.voxels)) == {0, 1}
        # recoverable by thresholding
        np.testing.assert_array_equal(intens.voxels > 0.5, truth.voxels == 1)

    def test_deterministic_per_seed(self):
        spec = SynthSpec(dims=(16, 16, 16), kind="two-blob", noise_std=0.2, seed=9)
        a, _ = generate(spec)
        b, _ = generate(spec)
        np.testing.assert_array_equal(a.voxels, b.voxels)

    def test_seed_changes_noise(self):
        s1 = SynthSpec(dims=(16, 16, 16), kind="sphere", noise_std=0.2, seed=1)
        s2 = SynthSpec(dims=(16, 16, 16), kind="sphere", noise_std=0.2, seed=2)
        assert not np.array_equal(generate(s1)[0].voxels, generate(s2)[0].voxels)

    def test_layered_three_classes(self):
        spec = SynthSpec(dims=(32, 32, 32), kind="layered")
        _, truth = generate(spec)
        assert set(np.unique(truth.voxels)) == {0, 1, 2}

    def test_layered_histogram_matches_shells(self):
        """Class voxel counts agree with analytically computed shell
        volumes to within boundary discretization."""
        n = 48
        spec = SynthSpec(dims=(n, n, n), kind="layered")
        _, truth = generate(spec)
        r_outer, r_inner = n * 0.42, n * 0.22
        v_inner = 4 / 3 * np.pi * r_inner**3
        v_outer = 4 / 3 * np.pi * r_outer**3
        counts = np.bincount(truth.voxels.ravel(), minlength=3)
        # discretization + the notch carve-out allow a few-percent slack
        assert counts[2] == pytest.approx(v_inner, rel=0.05)
        assert counts[1] + counts[2] == pytest.approx(v_outer, rel=0.06)

    def test_sphere_class_volume(self):
        n = 32
        spec = SynthSpec(dims=(n, n, n), kind="sphere")
        _, truth = generate(spec)
        expected = 4 / 3 * np.pi * (0.3 * n) ** 3
        assert truth.voxels.sum() == pytest.approx(expected, rel=0.05)


class TestSynthDataset:
    def test_dataset_shapes(self):
        ds = synth_dataset(SynthSpec(dims=(16, 16, 16), kind="sphere"), cell=4)
        assert ds.n_supervoxels == 64
        assert len(ds.labels) == 2

    def test_multiclass_labels(self):
        ds = synth_dataset(SynthSpec(dims=(24, 24, 24), kind="layered"), cell=4)
        assert len(ds.labels) == 3


class TestFig3Toy:
    def test_one_hot_initial_field(self):
        _, _, p0, _ = fig3_toy()
        assert p0.shape == (64, 2)
        np.testing.assert_array_equal(np.sort(np.unique(p0)), [0.0, 1.0])
        np.testing.assert_allclose(p0.sum(axis=1), 1.0)

    def test_initial_entropy_zero(self):
        _, _, p0, _ = fig3_toy()
        np.testing.assert_allclose(np.abs(total_entropy(p0)), 0.0, atol=1e-12)

    def test_graph_is_4nn_equal_weight(self):
        _, graph, _, _ = fig3_toy()
        assert graph.neighbors.shape == (64, 4)
        T = graph.transition.toarray()
        np.testing.assert_allclose(T.sum(axis=1), 1.0, atol=1e-12)
        assert set(np.unique(T)) == {0.0, 0.25}

    def test_argmax_on_notch_after_propagation(self):
        """Regression-pinned: after tau=4 the entropy peaks exactly at the
        two re-entrant notch corners."""
        _, graph, p0, info = fig3_toy()
        H = np.abs(total_entropy(propagate(graph, p0, 4)))
        argmax = np.flatnonzero(H >= H.max() - 1e-12)
        np.testing.assert_array_equal(np.sort(argmax), np.sort(info["notch_ids"]))
        assert H.max() == pytest.approx(0.9984144269374469, abs=1e-12)
