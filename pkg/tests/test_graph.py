import numpy as np
import pytest

from ninconv import graph
from ninconv.graph import BranchGroup, Conv, NetworkSpec, Parameter, ParameterStore, ReLU
from ninconv.inception import ArchitectureSpec, build_inception_module, build_network, make_variant
from ninconv.tensor import ConvParams, TensorError, conv2d_backward


def _identity_store(names_channels):
    store = ParameterStore()
    for name, c in names_channels:
        store[name] = Parameter(np.eye(c).reshape(c, c, 1, 1), np.zeros(c))
    return store


def test_single_relu_layer():
    net = NetworkSpec([ReLU("r")], 1)
    out, _ = graph.forward(net, ParameterStore(), np.array([-1.0, 2.0]).reshape(1, 1, 1, 2))
    np.testing.assert_array_equal(out.ravel(), [0, 2])


def test_branch_group_stacks_copies():
    net = NetworkSpec([BranchGroup("g", ((Conv("a", 2, 2, 1),), (Conv("b", 2, 2, 1),)))], 2)
    x = np.random.default_rng(0).standard_normal((1, 2, 3, 3))
    out, _ = graph.forward(net, _identity_store([("a", 2), ("b", 2)]), x)
    assert out.shape == (1, 4, 3, 3)
    np.testing.assert_array_equal(out[:, :2], x)
    np.testing.assert_array_equal(out[:, 2:], x)


def test_full_skin_network_shape():
    net, params = build_network(ArchitectureSpec(task="skin"))
    out, _ = graph.forward(net, params, np.random.default_rng(0).standard_normal((1, 3, 50, 50)))
    assert out.shape == (1, 1, 50, 50)


def test_forward_errors():
    net = NetworkSpec([Conv("c", 3, 1, 3)], 3)
    params = graph.init_parameters(net)
    with pytest.raises(TensorError):
        graph.forward(net, params, np.zeros((1, 2, 4, 4)))
    params["c"].weight[...] = np.inf
    with pytest.raises(TensorError, match="c"):
        graph.forward(net, params, np.ones((1, 3, 4, 4)))
    with pytest.raises(ValueError):
        NetworkSpec([Conv("c", 3, 4, 3), Conv("d", 5, 1, 1)], 3)
    with pytest.raises(ValueError):
        NetworkSpec([Conv("c", 3, 3, 3), Conv("c", 3, 1, 1)], 3)


def test_backward_needs_tape():
    net = NetworkSpec([ReLU("r")], 1)
    _, tape = graph.forward(net, ParameterStore(), np.ones((1, 1, 2, 2)))
    with pytest.raises(ValueError):
        graph.backward(net, ParameterStore(), tape, np.ones((1, 1, 2, 2)))


def test_zero_grad_output_gives_zero_parameter_grads():
    net, params = build_network(ArchitectureSpec(task="restoration", n_inception=1, width=8))
    x = np.random.default_rng(1).standard_normal((2, 1, 6, 6))
    out, tape = graph.forward(net, params, x, record=True)
    graph.backward(net, params, tape, np.zeros_like(out))
    for p in params.values():
        assert not p.grad_weight.any() and not p.grad_bias.any()


def test_single_conv_backward_delegates_bit_exact():
    rng = np.random.default_rng(2)
    net = NetworkSpec([Conv("c", 3, 4, 5)], 3)
    params = graph.init_parameters(net, seed=3)
    x = rng.standard_normal((2, 3, 7, 7))
    g = rng.standard_normal((2, 4, 7, 7))
    _, tape = graph.forward(net, params, x, record=True)
    gx = graph.backward(net, params, tape, g)
    ref = conv2d_backward(x, ConvParams(params["c"].weight, params["c"].bias), g)
    np.testing.assert_array_equal(gx, ref[0])
    np.testing.assert_array_equal(params["c"].grad_weight, ref[1])
    np.testing.assert_array_equal(params["c"].grad_bias, ref[2])


def test_backward_accumulates_until_zeroed():
    net = NetworkSpec([Conv("c", 1, 1, 3)], 1)
    params = graph.init_parameters(net)
    x = np.random.default_rng(4).standard_normal((1, 1, 4, 4))
    _, tape = graph.forward(net, params, x, record=True)
    graph.backward(net, params, tape, np.ones((1, 1, 4, 4)))
    once = params["c"].grad_weight.copy()
    graph.backward(net, params, tape, np.ones((1, 1, 4, 4)))
    np.testing.assert_allclose(params["c"].grad_weight, 2 * once)
    params.zero_grads()
    assert not params["c"].grad_weight.any()


def _jitter_biases(params, seed):
    rng = np.random.default_rng(seed)
    for p in params.values():
        p.bias[:] = rng.uniform(-0.1, 0.1, p.bias.shape)


def test_gradient_check_three_layer_net():
    net = NetworkSpec([Conv("a", 2, 3, 3), ReLU("ar"), Conv("b", 3, 3, 1), ReLU("br"), Conv("c", 3, 1, 5)], 2)
    params = graph.init_parameters(net, seed=5)
    _jitter_biases(params, 5)
    report = graph.gradient_check(net, params, np.random.default_rng(6).standard_normal((2, 2, 5, 5)))
    assert report.passed, "\n".join(report.lines())
    assert report.max_error < 1e-6


def test_gradient_check_conv_relu_euclidean():
    net = NetworkSpec([Conv("a", 1, 2, 3), ReLU("r"), Conv("b", 2, 1, 1)], 1)
    params = graph.init_parameters(net, seed=7)
    _jitter_biases(params, 7)
    report = graph.gradient_check(net, params, np.random.default_rng(8).standard_normal((1, 1, 4, 4)), "euclidean")
    assert report.passed


@pytest.mark.parametrize("tag", ["with_7x7", "googlenet_inception"])
def test_gradient_check_one_inception_module(tag):
    variant = make_variant(tag, 8)
    module = build_inception_module(variant, 4, "m")
    net = NetworkSpec([module, Conv("head", variant.out_channels, 1, 3)], 4)
    params = graph.init_parameters(net, seed=9)
    _jitter_biases(params, 9)
    report = graph.gradient_check(net, params, np.random.default_rng(10).standard_normal((1, 4, 6, 6)))
    assert report.passed, "\n".join(report.lines())


def test_gradient_check_flags_sign_flip():
    net = NetworkSpec([Conv("a", 1, 2, 3), ReLU("r"), Conv("b", 2, 1, 1)], 1)
    params = graph.init_parameters(net, seed=11)
    _jitter_biases(params, 11)
    report = graph.gradient_check(
        net, params, np.random.default_rng(12).standard_normal((1, 1, 4, 4)), backward_fn=graph.sign_flipped_backward
    )
    assert not report.passed
    assert report.max_error == pytest.approx(2.0, abs=1e-6)


def test_gradient_check_subsamples_large_nets():
    net = NetworkSpec([Conv("a", 1, 2, 3), Conv("b", 2, 1, 1)], 1)
    params = graph.init_parameters(net, seed=13)
    report = graph.gradient_check(
        net, params, np.random.default_rng(14).standard_normal((1, 1, 4, 4)), max_exhaustive=10, n_sample=12
    )
    assert report.n_checked == 12


def test_relative_error_floor():
    assert graph.relative_error(0.0, 0.0) == 0.0
    assert graph.relative_error(1.0, -1.0) == 2.0


def test_count_parameters_blocks():
    net, params = build_network(ArchitectureSpec(task="skin"))
    counts = graph.count_parameters(net, params)
    assert counts.per_layer["conv1"]["kernel"] == 9408
    inc = sum(v["kernel"] for k, v in counts.per_layer.items() if k.startswith("inception1/"))
    assert inc == 22848
    assert counts.kernel_only == 234752
    assert counts.total == 235905


def test_forward_is_deterministic():
    net, params = build_network(ArchitectureSpec(task="restoration", n_inception=2, width=16), seed=3)
    x = np.random.default_rng(15).standard_normal((2, 1, 12, 12))
    a, _ = graph.forward(net, params, x)
    b, _ = graph.forward(net, params, x)
    assert a.tobytes() == b.tobytes()


def test_batch_result_matches_per_sample():
    net, params = build_network(ArchitectureSpec(task="restoration", n_inception=1, width=8), seed=4)
    x = np.random.default_rng(16).standard_normal((3, 1, 9, 9))
    batched, _ = graph.forward(net, params, x)
    for i in range(3):
        single, _ = graph.forward(net, params, x[i : i + 1])
        np.testing.assert_allclose(batched[i : i + 1], single, rtol=0, atol=1e-12)
