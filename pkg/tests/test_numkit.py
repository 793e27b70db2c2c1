import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from totokit import numkit as nk
from totokit.numkit import Rng, Tensor


class TestOps:
    def test_matmul_identity(self):
        out = nk.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0, 0.0], [0.0, 1.0]]))
        assert np.array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])

    def test_softmax_symmetry(self):
        out = nk.softmax_last(Tensor([0.0, 0.0]))
        assert np.allclose(out.data, [0.5, 0.5])

    def test_cumsum_running_sum_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=17)
        expected = [x[: i + 1].sum() for i in range(17)]
        out = nk.cumsum_last(Tensor(x))
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(nk.ShapeError, match=r"\(2,\).*\(3,\)"):
            nk.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_inner_broadcast_rejected(self):
        # (4, 1) against (4, 3) is not leading-axis expansion
        with pytest.raises(nk.ShapeError):
            nk.mul(Tensor(np.ones((4, 1))), Tensor(np.ones((4, 3))))

    def test_suffix_broadcast_allowed(self):
        out = nk.add(Tensor(np.zeros((2, 3, 4))), Tensor(np.arange(4.0)))
        assert out.shape == (2, 3, 4)
        assert np.array_equal(out.data[1, 2], np.arange(4.0))

    def test_division_by_zero_is_an_error(self):
        with pytest.raises(ZeroDivisionError):
            nk.div(Tensor([1.0]), Tensor([0.0]))

    def test_matmul_inner_dim_mismatch(self):
        with pytest.raises(nk.ShapeError, match="inner"):
            nk.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_where_selects(self):
        mask = np.array([True, False, True])
        out = nk.where(mask, Tensor([1.0, 1.0, 1.0]), Tensor([9.0, 9.0, 9.0]))
        assert np.array_equal(out.data, [1.0, 9.0, 1.0])

    def test_clamp(self):
        out = nk.clamp(Tensor([-5.0, 0.5, 5.0]), min_value=0.0, max_value=1.0)
        assert np.array_equal(out.data, [0.0, 0.5, 1.0])

    def test_concat_and_slice_roundtrip(self):
        a = Tensor(np.arange(6.0).reshape(2, 3))
        joined = nk.concat([a[:, :2], a[:, 2:]], axis=1)
        assert np.array_equal(joined.data, a.data)


class TestBackward:
    def test_square_gradient(self):
        x = Tensor([3.0], requires_grad=True)
        nk.backward(nk.tsum(x * x))
        assert np.allclose(x.grad, [6.0])

    def test_linear_map_gradient(self):
        x = Tensor(np.ones((1, 2)))
        w = Tensor(np.ones((2, 1)), requires_grad=True)
        nk.backward(nk.tsum(nk.matmul(x, w)))
        assert np.array_equal(w.grad, [[1.0], [1.0]])

    def test_three_op_chain_matches_finite_differences(self):
        def f(t):
            return nk.tsum(nk.exp(nk.mul(t, t)) + nk.log(t * t + 1.0))

        x = Tensor(np.random.default_rng(1).normal(size=(4,)))
        assert nk.finite_difference_check(f, x, eps=1e-6) < 1e-6

    def test_accumulation_doubles(self):
        x = Tensor([2.0, -1.0], requires_grad=True)
        loss = nk.tsum(x * x * 3.0)
        nk.backward(loss)
        first = x.grad.copy()
        nk.backward(loss)
        assert np.array_equal(x.grad, 2.0 * first)

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(nk.GraphError, match="scalar"):
            nk.backward(x * x)

    def test_detached_graph_rejected(self):
        with pytest.raises(nk.GraphError, match="detached"):
            nk.backward(Tensor(3.0))

    def test_branching_graph_accumulates_through_shared_node(self):
        x = Tensor([1.5], requires_grad=True)
        y = x * 2.0
        loss = nk.tsum(y * y + y)  # d/dx = 8x + 2
        nk.backward(loss)
        assert np.allclose(x.grad, [8.0 * 1.5 + 2.0])

    @pytest.mark.parametrize("op", [
        lambda t: nk.tsum(nk.softmax_last(t) * Tensor(np.arange(5.0))),
        lambda t: nk.tsum(nk.logsumexp_last(nk.reshape(t, (1, 5)))),
        lambda t: nk.tsum(nk.cumsum_last(t) * t),
        lambda t: nk.tsum(nk.silu(t) + nk.softplus(t) + nk.sigmoid(t)),
        lambda t: nk.tsum(nk.sqrt(t * t + 1.0)),
        lambda t: nk.tsum(nk.gammaln(t * t + 2.0)),
        lambda t: nk.tsum(nk.power(t * t + 0.5, 1.3)),
        lambda t: nk.tsum(nk.expand_last(nk.tmean(t, axis=-1), 5) * t),
        lambda t: nk.tsum(nk.where(np.array([1, 0, 1, 0, 1], bool), t * 2.0, t * t)),
        lambda t: nk.tsum(nk.concat([t[:2] * 3.0, t[2:]], axis=0) * t),
    ])
    def test_op_gradients_match_finite_differences(self, op):
        x = Tensor(np.random.default_rng(7).normal(size=(5,)))
        assert nk.finite_difference_check(op, x, eps=1e-6) < 1e-6

    def test_matmul_batched_gradients(self):
        a = Tensor(np.random.default_rng(2).normal(size=(2, 3, 4)))

        def f(t):
            b = Tensor(np.random.default_rng(3).normal(size=(2, 4, 2)))
            return nk.tsum(nk.matmul(t, b) * 0.5)

        assert nk.finite_difference_check(f, a, eps=1e-6) < 1e-7

    def test_transpose_slice_gradients(self):
        def f(t):
            moved = nk.transpose(nk.reshape(t, (2, 3)), (1, 0))
            return nk.tsum(moved[1:] * moved[1:])

        x = Tensor(np.random.default_rng(4).normal(size=(6,)))
        assert nk.finite_difference_check(f, x, eps=1e-6) < 1e-8


class TestGradcheckContract:
    def test_quadratic_is_nearly_exact(self):
        err = nk.finite_difference_check(lambda t: nk.tsum(t * t), Tensor([1.0, -2.0, 3.0]),
                                         eps=1e-5)
        assert err < 1e-8

    def test_constant_function_zero_error(self):
        err = nk.finite_difference_check(lambda t: nk.tsum(t * 0.0), Tensor([1.0, 2.0]),
                                         eps=1e-5)
        assert err == 0.0

    def test_bad_eps_rejected(self):
        with pytest.raises(ValueError):
            nk.finite_difference_check(lambda t: nk.tsum(t), Tensor([1.0]), eps=0.0)

    def test_nonfinite_intermediate_raises(self):
        def f(t):
            return nk.tsum(nk.log(t))  # negative input -> error before any FD

        with pytest.raises((FloatingPointError, ValueError)):
            nk.finite_difference_check(f, Tensor([-1.0]), eps=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=-10.0, max_value=10.0), min_size=2, max_size=6))
def test_composed_graph_gradients_property(values):
    x = Tensor(np.asarray(values))

    def f(t):
        y = nk.softmax_last(t * 0.5)
        z = nk.cumsum_last(y) + nk.exp(t * 0.1)
        return nk.tsum(nk.sqrt(z * z + 1.0))

    assert nk.finite_difference_check(f, x, eps=1e-6) < 1e-5


class TestRng:
    def test_equal_seeds_equal_streams_million_draws(self):
        a, b = Rng(123), Rng(123)
        assert np.array_equal(a.normal(1_000_000), b.normal(1_000_000))

    def test_different_seeds_differ(self):
        assert not np.array_equal(Rng(1).normal(100), Rng(2).normal(100))

    def test_children_are_independent_and_deterministic(self):
        root = Rng(9)
        c1, c2 = root.child(0), root.child(1)
        again = Rng(9).child(0)
        assert np.array_equal(c1.normal(50), again.normal(50))
        assert not np.array_equal(Rng(9).child(0).normal(50), c2.normal(50))

    def test_state_roundtrip(self):
        r = Rng(5)
        r.normal(10)
        snap = r.get_state()
        first = r.normal(10)
        r2 = Rng(0)
        r2.set_state(snap)
        assert np.array_equal(r2.normal(10), first)
