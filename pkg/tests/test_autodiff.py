import numpy as np
import pytest

from core.autodiff import tensor as T
from core.autodiff.gradcheck import GradCase, check_case, relative_error, run_gradcheck
from core.autodiff.layers import MLP
from core.autodiff.optim import Adam
from core.autodiff.rng import Stream, make_rng
from core.autodiff.tensor import Tensor
from core.errors import ClassIndexError, DimensionError, ParameterError


def test_every_op_passes_finite_differences():
    rows = run_gradcheck(seed=0, instances=100, tol=1e-5)
    failed = [(r.op, r.max_rel_error) for r in rows if not r.passed]
    assert not failed
    assert all(r.instances == 100 for r in rows)


def test_corrupted_gradient_is_reported():
    def broken(x):
        a = x[0]
        return Tensor.from_op(a.data * 3.0, (a,), lambda g: (g * 2.0,), "broken")

    row = check_case(GradCase("broken", broken, [(2, 2)]), np.random.default_rng(0), instances=5)
    assert not row.passed
    assert row.max_rel_error > 0.1


def test_relative_error_is_relative_for_small_gradients():
    analytic, numeric = np.array([1e-3]), np.array([1.001e-3])
    assert relative_error(analytic, numeric) == pytest.approx(1e-6 / 2.001e-3)
    assert relative_error(analytic, numeric) > 1e-5
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


def test_gradcheck_is_seeded():
    a = run_gradcheck(seed=3, instances=2)
    b = run_gradcheck(seed=3, instances=2)
    assert [r.max_rel_error for r in a] == [r.max_rel_error for r in b]


def test_shared_subexpression_accumulates():
    x = Tensor([[1.5, -2.0]], requires_grad=True)
    y = T.sum(T.add(T.mul(x, x), x))
    y.backward()
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_backward_twice_accumulates_on_leaves():
    x = Tensor([[2.0]], requires_grad=True)
    T.square(x).backward()
    T.square(x).backward()
    assert x.grad[0, 0] == pytest.approx(8.0)


def test_stop_gradient_blocks_upstream():
    x = Tensor([[1.0, 2.0]], requires_grad=True)
    w = Tensor([[3.0, 4.0]], requires_grad=True)
    loss = T.sum(T.mul(T.stop_gradient(T.tanh(x)), w))
    loss.backward()
    assert x.grad is None
    np.testing.assert_allclose(w.grad, np.tanh(x.data))


def test_gumbel_bernoulli_forward_is_hard():
    logits = Tensor(np.linspace(-3, 3, 40).reshape(4, 10), requires_grad=True)
    out = T.gumbel_bernoulli(logits, 1.0, make_rng(0, Stream.GUMBEL))
    assert set(np.unique(out.data)) <= {0.0, 1.0}
    T.sum(out).backward()
    assert np.all(logits.grad > 0)


def test_gumbel_bernoulli_rejects_bad_temperature():
    with pytest.raises(ParameterError):
        T.gumbel_bernoulli(Tensor([[0.0]]), 0.0, make_rng(0))


def test_gumbel_bernoulli_frequency_tracks_sigmoid():
    rng = make_rng(1, Stream.GUMBEL)
    logits = Tensor(np.full((1, 20000), 1.0))
    freq = T.gumbel_bernoulli(logits, 1.0, rng).data.mean()
    assert freq == pytest.approx(1 / (1 + np.exp(-1.0)), abs=0.02)


def test_shape_errors():
    with pytest.raises(DimensionError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(DimensionError):
        T.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 2))).backward()


def test_categorical_nll_checks_targets():
    logits = Tensor(np.zeros((2, 3)))
    with pytest.raises(ClassIndexError):
        T.categorical_nll(logits, [0, 3])
    nll = T.categorical_nll(logits, [0, 2])
    np.testing.assert_allclose(nll.data, np.log(3.0))


def test_gaussian_nll_clamps_log_std():
    out = T.gaussian_nll(Tensor([[0.0]]), Tensor([[-50.0]]), Tensor([[0.0]]))
    assert np.isfinite(out.data).all()
    assert out.item() == pytest.approx(-6.0 + 0.5 * np.log(2 * np.pi))


def test_same_stream_same_numbers():
    a = make_rng(7, Stream.INIT, 2).random(5)
    b = make_rng(7, Stream.INIT, 2).random(5)
    c = make_rng(7, Stream.INIT, 3).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_adam_reduces_quadratic():
    net = MLP([2, 8, 1], make_rng(0))
    opt = Adam(net.parameters(), lr=1e-2)
    x = Tensor(make_rng(1).normal(size=(32, 2)))
    target = x.data.sum(axis=1, keepdims=True)

    def loss():
        return T.mean(T.square(T.sub(net(x), target)))

    start = loss().item()
    for _ in range(200):
        opt.zero_grad()
        value = loss()
        value.backward()
        opt.step()
    assert loss().item() < 0.2 * start


def test_state_dict_round_trip_and_errors():
    net = MLP([3, 4, 2], make_rng(0))
    other = MLP([3, 4, 2], make_rng(1))
    other.load_state_dict(net.state_dict())
    x = Tensor(np.ones((1, 3)))
    np.testing.assert_array_equal(net(x).data, other(x).data)

    blobs = net.state_dict()
    blobs.pop("layers.0.weight")
    with pytest.raises(KeyError):
        other.load_state_dict(blobs)
    bad = net.state_dict()
    bad["layers.1.bias"] = np.zeros((1, 5))
    with pytest.raises(ValueError):
        other.load_state_dict(bad)


def test_uniform_logits_cost_log_of_class_count():
    nll = T.categorical_nll(Tensor(np.full((2, 5), 0.7)), [0, 4])
    np.testing.assert_allclose(nll.data, np.log(5.0))


def test_gaussian_nll_reference_points():
    zero_residual = T.gaussian_nll(Tensor([[1.0, -2.0]]), Tensor([[0.0, 0.0]]), Tensor([[1.0, -2.0]]))
    assert zero_residual.item() == pytest.approx(2 * 0.91894, abs=1e-5)
    unit = T.gaussian_nll(Tensor([[0.0]]), Tensor([[0.0]]), Tensor([[1.0]]))
    assert unit.item() == pytest.approx(0.5 + 0.91894, abs=1e-5)


def test_first_adam_step_moves_by_learning_rate():
    for g in (3.0, -0.02):
        p = Tensor([[1.0]], requires_grad=True)
        opt = Adam([p], lr=1e-3)
        p.grad = np.array([[g]])
        opt.step()
        assert p.data[0, 0] == pytest.approx(1.0 - np.sign(g) * 1e-3, rel=1e-6)
