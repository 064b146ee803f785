import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import fcluster, linkage

from tropnnc.compression import (
    Clustering,
    CompressionConfig,
    baseline_l1,
    baseline_neural_path_kmeans,
    baseline_random,
    baseline_zonotope_kmeans,
    compress_layer,
    compress_multi_output,
    compress_multi_output_iterative,
    compress_network,
    compress_single_output,
    criterion_value,
    hierarchical_cluster,
    kmeans,
    layer_threshold,
)
from tropnnc.compression.algorithms import split_k
from tropnnc.errors import UnsupportedTopologyError
from tropnnc.harness.fixtures import mlp, small_cnn
from tropnnc.hausdorff import hausdorff
from tropnnc.nn import Conv2d, Linear, Network, ReLU, count_params, flatten_conv_in, flatten_conv_out, forward
from tropnnc.nn import unflatten_conv_in, unflatten_conv_out
from tropnnc.tropical import Zonotope, network_forward, network_polys

TWO_A = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
TWO_C = np.array([[3.0, 5.0], [4.0, 2.0]])
# three generators: g1 alone, g2 and g3 close together
THREE_GENS = np.array([[1.0, 0.0], [0.3, 1.0], [0.5, 1.0]])


def same_partition(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return all((a[i] == a[j]) == (b[i] == b[j]) for i in range(a.size) for j in range(i + 1, a.size))


def hidden_widths(net):
    return [l.out_features for l in net.layers if isinstance(l, Linear)][:-1]


class TestKMeans:
    def test_full_rank_gives_singletons(self):
        x = np.random.default_rng(0).standard_normal((9, 3))
        assert sorted(kmeans(x, 9).labels.tolist()) == list(range(9))

    def test_three_generators(self):
        c = kmeans(THREE_GENS, 2, seed=3)
        assert same_partition(c.labels, [0, 1, 1])

    def test_deterministic(self):
        x = np.random.default_rng(1).standard_normal((40, 4))
        np.testing.assert_array_equal(kmeans(x, 5, seed=7).labels, kmeans(x, 5, seed=7).labels)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 40), st.integers(0, 2**31))
    def test_inertia_never_increases(self, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, 3))
        c = kmeans(x, int(rng.integers(1, n + 1)), seed)
        assert np.all(np.diff(c.inertia_trace) <= 1e-9)
        assert np.all(c.sizes() > 0)

    def test_no_empty_clusters_with_duplicates(self):
        x = np.vstack([np.zeros((6, 2)), np.ones((2, 2))])
        c = kmeans(x, 4, seed=0)
        assert c.K == 4 and np.all(c.sizes() > 0)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            kmeans(np.ones((3, 2)), 4)
        with pytest.raises(ValueError):
            kmeans(np.ones((3, 2)), 0)


class TestHierarchical:
    def test_low_threshold_singletons(self):
        x = np.arange(5.0)[:, None] * 2
        assert hierarchical_cluster(x, 0.5).K == 5

    def test_high_threshold_one_cluster(self):
        x = np.random.default_rng(2).standard_normal((8, 3))
        assert hierarchical_cluster(x, 100.0).K == 1

    def test_two_blobs(self):
        rng = np.random.default_rng(3)
        x = np.vstack([rng.normal(0, 0.1, (25, 2)), rng.normal(10, 0.1, (15, 2))])
        labels = hierarchical_cluster(x, 1.0).labels
        assert same_partition(labels, [0] * 25 + [1] * 15)

    @pytest.mark.parametrize("seed", range(15))
    def test_matches_scipy_average_linkage(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((int(rng.integers(2, 30)), int(rng.integers(1, 5))))
        t = float(rng.uniform(0.3, 2.5))
        ref = fcluster(linkage(x, "average"), t, criterion="distance")
        assert same_partition(hierarchical_cluster(x, t).labels, ref)

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            hierarchical_cluster(np.ones((2, 2)), 0.0)


class TestThresholds:
    def test_variant_1(self):
        assert layer_threshold(2.0, 1, np.ones((3, 25))) == pytest.approx(10.0)

    def test_variant_2(self):
        assert layer_threshold(1.0, 2, [[3.0, 4.0], [0.0, 0.0]]) == pytest.approx(2.5)

    def test_variant_1_grows_with_width(self):
        dims = [3 * 9 + 1, 64 * 9 + 1, 128 * 9 + 1, 256 * 9 + 1, 512 * 9 + 1]
        values = [layer_threshold(0.1, 1, np.zeros((2, d))) for d in dims]
        assert values == sorted(values)

    @pytest.mark.parametrize("c, variant", [(0.0, 1), (-1.0, 2), (1.0, 3)])
    def test_rejects(self, c, variant):
        with pytest.raises(ValueError):
            layer_threshold(c, variant, np.ones((2, 2)))


class TestSingleOutput:
    def test_sum_vs_mean_representative(self):
        g1, g2, g3 = THREE_GENS
        tro = compress_single_output(THREE_GENS, np.ones(3), 2, seed=3, split=(2, 0))
        zkm = baseline_zonotope_kmeans(THREE_GENS, np.ones(3), 2, seed=3, split=(2, 0))
        rows_t = {tuple(np.round(r, 12)) for r in tro.A}
        rows_z = {tuple(np.round(r, 12)) for r in zkm.A}
        assert rows_t == {tuple(g1), tuple(np.round(g2 + g3, 12))}
        assert rows_z == {tuple(g1), tuple(np.round((g2 + g3) / 2, 12))}
        np.testing.assert_array_equal(tro.C, [[1.0, 1.0]])

    def test_sum_is_closer_in_hausdorff(self):
        P = Zonotope.from_generators(THREE_GENS)
        tro = compress_single_output(THREE_GENS, np.ones(3), 2, seed=3, split=(2, 0))
        zkm = baseline_zonotope_kmeans(THREE_GENS, np.ones(3), 2, seed=3, split=(2, 0))
        h_sum = hausdorff(P, network_polys(tro.A, tro.C)[0].P)
        h_mean = hausdorff(P, network_polys(zkm.A, zkm.C)[0].P)
        assert h_sum < h_mean

    def test_output_weights_carry_signs(self):
        rng = np.random.default_rng(4)
        A, c = rng.standard_normal((8, 3)), np.array([1, -2, 3, -1, 0.5, 2, -0.5, 1.0])
        out = compress_single_output(A, c, 4)
        assert set(out.C.ravel().tolist()) == {1.0, -1.0}
        for k, idx in enumerate(out.clustering.clusters()):
            assert np.all(np.sign(c[idx]) == out.C[0, k])

    @pytest.mark.parametrize("seed", range(4))
    def test_full_rank_is_exact(self, seed):
        rng = np.random.default_rng(seed)
        A, c = rng.standard_normal((7, 4)), rng.standard_normal(7)
        x = rng.standard_normal((500, 3))
        for fn in (compress_single_output, baseline_zonotope_kmeans):
            out = fn(A, c, 7, seed=seed)
            np.testing.assert_allclose(network_forward(out.A, out.C, x), network_forward(A, c[None], x), atol=1e-10)

    def test_zero_weights_dropped(self):
        A, c = np.eye(3), np.array([1.0, 0.0, 2.0])
        out = compress_single_output(A, c, 2)
        assert out.clustering.labels[1] == -1
        assert out.A.shape == (2, 3)

    def test_k_split(self):
        assert split_k(4, 3, 1) == (3, 1)
        assert split_k(2, 10, 1) == (1, 1)
        assert split_k(5, 4, 0) == (4, 0)
        assert sum(split_k(6, 5, 5)) == 6
        with pytest.raises(ValueError):
            split_k(1, 2, 2)

    def test_too_few_clusters_for_both_signs(self):
        with pytest.raises(ValueError):
            compress_single_output(np.eye(2), [1.0, -1.0], 1)


class TestMultiOutput:
    def test_two_neuron(self):
        out = compress_multi_output(TWO_A[:, [0, 1, 2]], TWO_C, 1)
        np.testing.assert_array_equal(out.A, [[0.5, 0.5, 0.0]])
        np.testing.assert_array_equal(out.C, [[8.0], [6.0]])

    def test_two_neuron_means_baseline(self):
        out = baseline_neural_path_kmeans(TWO_A, TWO_C, 1)
        np.testing.assert_array_equal(out.A, [[0.5, 0.5, 0.0]])
        np.testing.assert_array_equal(out.C, [[4.0], [3.0]])

    def test_two_neuron_criterion(self):
        out = compress_multi_output(TWO_A, TWO_C, 1)
        per, total = criterion_value(TWO_A, TWO_C, out.clustering, out.A, out.C)
        # ||8 (.5,.5,0) - (3,5,0)||^2 + ||6 (.5,.5,0) - (4,2,0)||^2
        assert total == pytest.approx(4.0)
        np.testing.assert_allclose(per, [4.0])

    def test_full_rank_is_permutation(self):
        rng = np.random.default_rng(5)
        A, C = rng.standard_normal((6, 3)), rng.standard_normal((2, 6))
        for fn in (compress_multi_output, baseline_neural_path_kmeans):
            out = fn(A, C, 6)
            order = [int(idx[0]) for idx in out.clustering.clusters()]
            np.testing.assert_array_equal(out.A, A[order])
            np.testing.assert_array_equal(out.C, C[:, order])

    def test_duplicated_neurons_any_output(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((5, 4))
        A[3] = A[1]
        C = rng.standard_normal((3, 5))
        labels = np.array([0, 1, 2, 1, 3])
        out = compress_multi_output(A, C, 4, clustering=Clustering(labels))
        x = rng.standard_normal((500, 3))
        np.testing.assert_allclose(network_forward(out.A, out.C, x), network_forward(A, C, x), atol=1e-10)

    def test_duplicated_neurons_found_by_kmeans(self):
        rng = np.random.default_rng(7)
        A = 10 * rng.standard_normal((6, 4))
        A[4] = A[2]
        C = 0.01 * rng.standard_normal((2, 6))
        out = compress_multi_output(A, C, 5, seed=1)
        assert out.clustering.labels[2] == out.clustering.labels[4]
        x = rng.standard_normal((500, 3))
        np.testing.assert_allclose(network_forward(out.A, out.C, x), network_forward(A, C, x), atol=1e-10)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            compress_multi_output(TWO_A, TWO_C, 3)


class TestIterative:
    def test_zero_iterations_is_one_shot(self):
        rng = np.random.default_rng(8)
        A, C = rng.standard_normal((7, 3)), rng.standard_normal((2, 7))
        base = compress_multi_output(A, C, 3, seed=2)
        it = compress_multi_output_iterative(A, C, 3, 0, seed=2)
        np.testing.assert_array_equal(it.A, base.A)
        np.testing.assert_array_equal(it.C, base.C)

    def test_single_cluster_single_output_fits_exactly(self):
        rng = np.random.default_rng(9)
        A, C = rng.standard_normal((5, 4)), rng.standard_normal((1, 5))
        out = compress_multi_output_iterative(A, C, 1, 1)
        assert out.trace[-1] == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(out.C[0, 0] * out.A[0], C[0] @ A, atol=1e-12)

    def test_two_neuron_improves(self):
        out = compress_multi_output_iterative(TWO_A, TWO_C, 1, 1)
        assert out.trace[0] == pytest.approx(4.0)
        assert out.trace[-1] < 4.0
        assert criterion_value(TWO_A, TWO_C, out.clustering, out.A, out.C)[1] == pytest.approx(out.trace[-1])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.booleans())
    def test_monotone(self, seed, a6):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        A, C = rng.standard_normal((n, int(rng.integers(2, 5)))), rng.standard_normal((int(rng.integers(1, 4)), n))
        out = compress_multi_output_iterative(A, C, int(rng.integers(1, n + 1)), 10, a6_variant=a6, seed=seed)
        assert len(out.trace) == 21 + int(a6)
        assert np.all(np.diff(out.trace) <= 1e-9)

    def test_a6_signs_frozen(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            A, C = rng.standard_normal((9, 3)), rng.standard_normal((3, 9))
            init = compress_multi_output(A, C, 4, seed=1)
            out = compress_multi_output_iterative(A, C, 4, 10, a6_variant=True, seed=1)
            assert np.all(np.sign(out.C) * np.sign(init.C) >= 0)
            assert np.all(np.abs(out.C) >= 0)

    def test_a6_trace_uses_non_null_members(self):
        rng = np.random.default_rng(11)
        A, C = rng.standard_normal((8, 3)), rng.standard_normal((2, 8))
        out = compress_multi_output_iterative(A, C, 3, 5, a6_variant=True, seed=0)
        _, total = criterion_value(A, C, out.clustering, out.A, out.C, a6=True)
        assert total == pytest.approx(out.trace[-1])

    def test_zero_output_cluster(self):
        A = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
        C = np.array([[0.0, 0.0, 1.0]])
        out = compress_multi_output_iterative(A, C, 2, 3, clustering=Clustering(np.array([0, 0, 1])))
        assert np.all(np.isfinite(out.A)) and np.all(np.isfinite(out.C))
        np.testing.assert_allclose(out.C[:, 0], 0.0)

    def test_negative_iterations(self):
        with pytest.raises(ValueError):
            compress_multi_output_iterative(TWO_A, TWO_C, 1, -1)


class TestConfig:
    def test_exactly_one_target(self):
        with pytest.raises(ValueError):
            CompressionConfig("tropnnc")
        with pytest.raises(ValueError):
            CompressionConfig("tropnnc", ratio=0.5, k=3)

    @pytest.mark.parametrize("ratio", [0.0, 1.5, -0.2])
    def test_ratio_range(self, ratio):
        with pytest.raises(ValueError):
            CompressionConfig("l1", ratio=ratio)

    def test_threshold_needs_variant(self):
        with pytest.raises(ValueError):
            CompressionConfig("tropnnc", threshold_c=0.5)

    def test_method_names(self):
        assert CompressionConfig("Neural-Path-KMeans", ratio=0.5).method == "neural_path_kmeans"
        with pytest.raises(ValueError):
            CompressionConfig("magic", ratio=0.5)

    @pytest.mark.parametrize("ratio, n, K", [(0.5, 64, 32), (0.25, 64, 16), (0.1, 64, 6), (0.01, 10, 1), (1.0, 7, 7)])
    def test_ratio_to_k(self, ratio, n, K):
        assert CompressionConfig("tropnnc", ratio=ratio).target_k(n) == K


class TestPruning:
    def test_ratio_one_unchanged(self):
        net = mlp((6, 5, 3), seed=1, input_shape=(6,))
        for new in (baseline_l1(net, 1.0), baseline_random(net, 1.0)):
            np.testing.assert_array_equal(new.layers[0].weight, net.layers[0].weight)

    def test_l1_removes_zero_neuron(self):
        net = mlp((6, 5, 3), seed=2, input_shape=(6,))
        w = net.layers[0].weight.copy()
        w[3] = 0.0
        net = net.replace([Linear(w, net.layers[0].bias), *net.layers[1:]])
        new = baseline_l1(net, 4 / 5)
        kept = new.layers[0].weight
        assert kept.shape[0] == 4
        assert np.all(np.abs(kept).sum(axis=1) > 0)

    def test_random_reproducible(self):
        net = mlp((6, 8, 3), seed=3, input_shape=(6,))
        a, b = baseline_random(net, 0.5, seed=4), baseline_random(net, 0.5, seed=4)
        np.testing.assert_array_equal(a.layers[0].weight, b.layers[0].weight)
        assert a.layers[0].out_features == 4

    def test_removed_count(self):
        net = mlp((6, 10, 3), seed=5, input_shape=(6,))
        assert baseline_l1(net, 0.35).layers[0].out_features == 10 - math.ceil(0.65 * 10)

    def test_conv_channels_with_batchnorm(self):
        net = small_cnn(seed=6, batchnorm=True)
        new = baseline_l1(net, 0.6)
        x = np.random.default_rng(6).standard_normal((3, 2, 10, 10))
        assert forward(new, x).shape == (3, 3)
        assert new.layers[0].out_channels == 3


class TestNetworkCompression:
    def test_ratio_one_unchanged(self):
        net = mlp((8, 6, 5, 3), seed=1, input_shape=(8,))
        new, report = compress_network(net, CompressionConfig("tropnnc", ratio=1.0))
        x = np.random.default_rng(1).standard_normal((200, 8))
        np.testing.assert_allclose(forward(new, x), forward(net, x), atol=1e-12)
        assert report.params_before == report.params_after

    def test_deep_widths(self):
        net = mlp((784, 512, 256, 128, 10), seed=0)
        new, report = compress_network(net, CompressionConfig("tropnnc", ratio=0.5))
        assert hidden_widths(new) == [256, 128, 64]
        assert [r.K for r in report.layers] == [256, 128, 64]
        assert report.params_after == count_params(new) < report.params_before

    def test_layer_by_layer_equals_network(self):
        net = mlp((8, 7, 6, 2), seed=2, input_shape=(8,))
        cfg = CompressionConfig("tropnnc", ratio=0.5, seed=3)
        step, _ = compress_layer(net, 0, cfg)
        step, _ = compress_layer(step, 1, cfg)
        whole, _ = compress_network(net, cfg)
        x = np.random.default_rng(2).standard_normal((100, 8))
        np.testing.assert_allclose(forward(step, x), forward(whole, x), atol=1e-12)

    def test_two_neuron_block_inside_deeper_net(self):
        layers = (
            Linear(TWO_A[:, :2], TWO_A[:, 2]),
            ReLU(),
            Linear(TWO_C, [0.1, -0.2]),
            ReLU(),
            Linear([[1.0, -1.0]], [0.0]),
        )
        net = Network(layers, (2,))
        new, _ = compress_layer(net, 0, CompressionConfig("tropnnc", k=1))
        np.testing.assert_array_equal(new.layers[0].weight, [[0.5, 0.5]])
        np.testing.assert_array_equal(new.layers[0].bias, [0.0])
        np.testing.assert_array_equal(new.layers[2].weight, [[8.0], [6.0]])
        np.testing.assert_array_equal(new.layers[2].bias, [0.1, -0.2])

    def test_conv_matches_matrix_path(self):
        net = small_cnn(seed=4)
        cfg = CompressionConfig("tropnnc", k=3, seed=5)
        new, _ = compress_layer(net, 0, cfg)
        conv, nxt = net.layers[0], net.layers[3]
        A, C = flatten_conv_in(conv), flatten_conv_out(nxt)
        clustering = kmeans(np.hstack([A, C.T]), 3, 5)
        ref = compress_multi_output(A, C, 3, clustering=clustering)
        kernel, bias = unflatten_conv_in(ref.A, conv.in_channels, 3, 3)
        np.testing.assert_allclose(new.layers[0].kernel, kernel)
        np.testing.assert_allclose(new.layers[0].bias, bias)
        np.testing.assert_allclose(new.layers[3].kernel, unflatten_conv_out(ref.C, nxt.out_channels, 3, 3))

    def test_conv_full_rank_exact(self):
        net = small_cnn(seed=5)
        new, _ = compress_network(net, CompressionConfig("neural_path_kmeans", ratio=1.0))
        x = np.random.default_rng(5).standard_normal((50, 2, 10, 10))
        np.testing.assert_allclose(forward(new, x), forward(net, x), atol=1e-10)

    def test_linear_after_flatten_is_reshaped(self):
        net = small_cnn(seed=6)
        new, report = compress_layer(net, 1, CompressionConfig("tropnnc", k=2))
        assert new.layers[3].out_channels == 2
        assert new.layers[6].in_features == 2 * 3 * 3
        assert report.n == 4 and report.K == 2

    def test_batchnorm_needs_fusion_mode(self):
        net = small_cnn(seed=7, batchnorm=True)
        with pytest.raises(UnsupportedTopologyError):
            compress_layer(net, 0, CompressionConfig("tropnnc", k=3))
        new, report = compress_layer(net, 0, CompressionConfig("tropnnc", k=3, fuse_bn="per-layer"))
        assert report.fused_bn
        assert sum(l.kind == "batchnorm" for l in new.layers) == 1

    def test_prefusion_choice_is_exact_at_full_rank(self):
        net = small_cnn(seed=8, batchnorm=True)
        x = np.random.default_rng(8).standard_normal((20, 2, 10, 10))
        outs = []
        for pre in (True, False):
            cfg = CompressionConfig("tropnnc", k=5, fuse_bn="per-layer", cluster_on_prefusion=pre)
            outs.append(forward(compress_layer(net, 0, cfg)[0], x))
        # with K = n the clustering is irrelevant and both must be exact
        np.testing.assert_allclose(outs[0], outs[1], atol=1e-10)

    def test_fuse_all(self):
        net = small_cnn(seed=9, batchnorm=True)
        new, report = compress_network(net, CompressionConfig("tropnnc", ratio=0.5, fuse_bn="all"))
        assert not any(l.kind == "batchnorm" for l in new.layers)
        assert [r.K for r in report.layers] == [2, 2, 4]

    def test_single_output_method_needs_one_output(self):
        with pytest.raises(UnsupportedTopologyError):
            compress_network(mlp((5, 4, 3), input_shape=(5,)), CompressionConfig("tropnnc_single", ratio=0.5))
        net = mlp((5, 6, 1), input_shape=(5,))
        new, _ = compress_network(net, CompressionConfig("tropnnc_single", ratio=0.5))
        assert new.layers[-1].weight.shape[0] == 1

    def test_residual_like_topology_rejected(self):
        net = Network(
            (Linear(np.ones((3, 3)), np.zeros(3)), Linear(np.ones((3, 3)), np.zeros(3)), ReLU(), Linear(np.ones((1, 3)), [0.0])),
            (3,),
        )
        with pytest.raises(UnsupportedTopologyError):
            compress_layer(net, 0, CompressionConfig("tropnnc", k=2))

    def test_non_uniform_profiles(self):
        net = mlp((30, 24, 16, 5), seed=10, input_shape=(30,))
        profiles = {}
        for variant in (1, 2):
            cfg = CompressionConfig("tropnnc", threshold_c=0.35, variant=variant)
            new, report = compress_network(net, cfg)
            profiles[variant] = [r.K for r in report.layers]
            assert all(r.threshold > 0 for r in report.layers)
            forward(new, np.zeros((1, 30)))
        assert profiles[1] != profiles[2]

    def test_report_csv(self):
        net = mlp((6, 5, 3), seed=11, input_shape=(6,))
        _, report = compress_network(net, CompressionConfig("tropnnc_iter", ratio=0.6, num_iter=2))
        (row,) = report.csv_rows()
        fields = row.split(",")
        assert fields[:5] == ["0", "linear", "5", "3", "tropnnc_iter"]
        assert len(fields[-1].split()) == 5
