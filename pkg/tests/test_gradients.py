import dataclasses

import numpy as np
import pytest

from lorma.adapters import AdapterConfig, AdapterVariant, MultiplySide, forward, init_adapter, perturb
from lorma.exceptions import ConfigurationError, ShapeError
from lorma.gradients import GradientBundle, backward, grad_check, probe_loss

from .oracles import central_difference, max_relative_error

CASES = [(v, s) for v in AdapterVariant for s in MultiplySide
         if v.multiplicative or s is MultiplySide.PRE]


def _state(variant, side, d=8, k=8, r=2, seed=0):
    gen = np.random.default_rng(seed)
    w0 = gen.standard_normal((d, k)) / np.sqrt(k)
    state = init_adapter(w0, AdapterConfig(variant, side, r, float(r) + 1.0, seed))
    return perturb(state, std=0.3, seed=seed + 100)


@pytest.mark.parametrize("variant,side", CASES)
def test_zero_upstream_gives_zero_gradients(variant, side):
    state = _state(variant, side)
    x = np.ones((8, 3))
    g = backward(state, x, np.zeros((8, 3)))
    for arr in (g.d_b, g.d_a, g.d_x):
        assert not np.any(arr)


@pytest.mark.parametrize("variant,side", CASES)
@pytest.mark.parametrize("dims", [(8, 8), (7, 5), (5, 7)])
def test_matches_central_differences(variant, side, dims):
    d, k = dims
    state = _state(variant, side, d=d, k=k, r=2, seed=d * 10 + k)
    gen = np.random.default_rng(1)
    x = gen.standard_normal((k, 3))
    y = gen.standard_normal((d, 3))
    g = backward(state, x, forward(state, x) - y)

    def loss_b(b):
        return probe_loss(dataclasses.replace(state, b=b), x, y)

    def loss_a(a):
        return probe_loss(dataclasses.replace(state, a=a), x, y)

    assert max_relative_error(g.d_b, central_difference(loss_b, state.b)) < 1e-4
    assert max_relative_error(g.d_a, central_difference(loss_a, state.a)) < 1e-4
    assert max_relative_error(g.d_x, central_difference(lambda xx: probe_loss(state, xx, y), x)) < 1e-4


@pytest.mark.parametrize("variant,side", CASES)
def test_input_gradient_is_adjoint_of_forward(variant, side):
    # forward is linear in x, so <g, f(x)> = <backward(g).d_x, x>
    state = _state(variant, side, seed=3)
    gen = np.random.default_rng(2)
    x = gen.standard_normal((8, 4))
    g = gen.standard_normal((8, 4))
    lhs = np.sum(g * forward(state, x))
    rhs = np.sum(backward(state, x, g).d_x * x)
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("variant,side", CASES)
def test_gradients_linear_in_upstream(variant, side):
    state = _state(variant, side, seed=4)
    gen = np.random.default_rng(3)
    x = gen.standard_normal((8, 2))
    g1, g2 = gen.standard_normal((2, 8, 2))
    a = backward(state, x, 2.0 * g1 - g2)
    b1, b2 = backward(state, x, g1), backward(state, x, g2)
    np.testing.assert_allclose(a.d_b, 2.0 * b1.d_b - b2.d_b, atol=1e-12)
    np.testing.assert_allclose(a.d_a, 2.0 * b1.d_a - b2.d_a, atol=1e-12)


@pytest.mark.parametrize("variant,side", CASES)
def test_grad_check_passes(variant, side):
    state = _state(variant, side, d=12, k=12, r=3, seed=9)
    x = np.random.default_rng(9).standard_normal((12, 3))
    report = grad_check(state, x, seed=1, wrt=("b", "a", "x"))
    assert report.passed(1e-4), report
    assert report.n_checked == state.b.size + state.a.size + x.size


def test_grad_check_detects_corrupted_coordinate():
    state = _state("lorma_plus", "pre", seed=5)
    x = np.random.default_rng(5).standard_normal((8, 3))

    def broken(st, xx, up):
        g = backward(st, xx, up)
        d_b = g.d_b.copy()
        d_b[2, 1] += 0.5
        return GradientBundle(d_b=d_b, d_a=g.d_a, d_x=g.d_x)

    report = grad_check(state, x, seed=0, backward_fn=broken)
    assert report.max_rel_error > 1e-2
    assert (report.parameter, report.index) == ("b", (2, 1))


def test_grad_check_is_deterministic():
    state = _state("lorma_pi", "post", seed=6)
    x = np.random.default_rng(6).standard_normal((8, 2))
    assert grad_check(state, x, seed=3) == grad_check(state, x, seed=3)


def test_grad_check_cost_guard():
    state = init_adapter(np.eye(65), AdapterConfig("lora", r=1, alpha=1))
    with pytest.raises(ConfigurationError, match="64"):
        grad_check(state, np.ones((65, 1)))


def test_grad_check_unknown_parameter():
    state = _state("lora", "pre")
    with pytest.raises(ValueError):
        grad_check(state, np.ones((8, 1)), wrt=("w0",))


def test_backward_shape_errors():
    state = _state("lora", "pre")
    with pytest.raises(ShapeError):
        backward(state, np.ones((7, 2)), np.ones((8, 2)))
    with pytest.raises(ShapeError):
        backward(state, np.ones((8, 2)), np.ones((8, 3)))
