import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retargetlab.autodiff import (
    Tape,
    Tensor,
    add,
    backward,
    concat,
    conv1d,
    gather_rows,
    gradcheck,
    matmul,
    multiply,
    reshape,
    scatter_add_rows,
    sigmoid,
    slice_axis,
    square,
    subtract,
    tensor_mean,
    tensor_sum,
    transpose,
    transposed_conv1d,
    upsample_nearest,
)
from retargetlab.errors import NonFiniteError, ShapeError


def naive_conv1d(x, kernel, stride, padding):
    """Direct sliding-window oracle, loops only."""
    out_ch, in_ch, k = kernel.shape
    xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(padding, padding)])
    l_out = (x.shape[-1] + 2 * padding - k) // stride + 1
    out = np.zeros(x.shape[:-2] + (out_ch, l_out))
    for o in range(out_ch):
        for t in range(l_out):
            for c in range(in_ch):
                for kk in range(k):
                    out[..., o, t] += kernel[o, c, kk] * xp[..., c, t * stride + kk]
    return out


class TestForwardValues:
    def test_sigmoid_at_zero(self):
        assert sigmoid(Tensor.constant(0.0)).item() == 0.5

    def test_sigmoid_extremes_are_finite(self):
        out = sigmoid(Tensor.constant([-1000.0, 1000.0]))
        np.testing.assert_allclose(out.data, [0.0, 1.0], atol=1e-12)

    def test_conv1d_length_arithmetic(self):
        # length 8, k=3, s=2, p=1 -> floor((8 + 2 - 3)/2) + 1 = 4
        x = np.arange(8.0).reshape(1, 8)
        kernel = np.ones((1, 1, 3))
        out = conv1d(Tensor.constant(x), Tensor.constant(kernel), stride=2, padding=1)
        assert out.shape == (1, 4)
        np.testing.assert_allclose(out.data, naive_conv1d(x, kernel, 2, 1))

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        length=st.integers(3, 12),
        stride=st.integers(1, 3),
        padding=st.integers(0, 2),
    )
    def test_conv1d_matches_sliding_window_oracle(self, seed, length, stride, padding):
        rng = np.random.default_rng(seed)
        if length + 2 * padding < 3:
            return
        x = rng.normal(size=(2, 3, length))
        kernel = rng.normal(size=(4, 3, 3))
        out = conv1d(Tensor.constant(x), Tensor.constant(kernel), stride, padding)
        np.testing.assert_allclose(out.data, naive_conv1d(x, kernel, stride, padding), atol=1e-12)

    def test_transposed_conv_doubles_length(self):
        x = np.random.default_rng(0).normal(size=(2, 4))
        kernel = np.random.default_rng(1).normal(size=(2, 3, 3))
        out = transposed_conv1d(
            Tensor.constant(x), Tensor.constant(kernel), stride=2, padding=1, output_padding=1
        )
        assert out.shape == (3, 8)

    def test_transposed_conv_is_conv_adjoint(self):
        # <conv(x), y> == <x, conv_transpose(y)> with matching geometry
        rng = np.random.default_rng(2)
        x = rng.normal(size=(3, 8))
        y = rng.normal(size=(5, 4))
        kernel = rng.normal(size=(5, 3, 3))  # (out, in, k) for conv
        cx = conv1d(Tensor.constant(x), Tensor.constant(kernel), stride=2, padding=1).data
        # the same array read as (in=5, out=3, k) is the adjoint's kernel
        ty = transposed_conv1d(
            Tensor.constant(y), Tensor.constant(kernel),
            stride=2, padding=1, output_padding=1,
        ).data
        np.testing.assert_allclose(np.sum(cx * y), np.sum(x * ty), atol=1e-10)

    def test_upsample_duplicates(self):
        out = upsample_nearest(Tensor.constant([[1.0, 2.0, 3.0, 4.0]]), factor=2)
        np.testing.assert_array_equal(out.data, [[1, 1, 2, 2, 3, 3, 4, 4]])

    def test_matmul_broadcasts_leading_batch(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(4, 4))
        b = rng.normal(size=(6, 4, 2))
        out = matmul(Tensor.constant(a), Tensor.constant(b))
        np.testing.assert_allclose(out.data, np.matmul(a, b), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), rows=st.integers(1, 8), out_rows=st.integers(1, 8))
    def test_gather_scatter_adjointness(self, seed, rows, out_rows):
        """<gather(x, I), y> == <x, scatter_add(y, I)> by brute-force inner products."""
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(out_rows, 3))
        y = rng.normal(size=(rows, 3))
        idx = rng.integers(0, out_rows, size=rows)
        gathered = gather_rows(Tensor.constant(x), idx).data
        scattered = scatter_add_rows(Tensor.constant(y), idx, out_rows).data
        np.testing.assert_allclose(np.sum(gathered * y), np.sum(x * scattered), atol=1e-10)


class TestShapeErrors:
    def test_mid_shape_broadcast_rejected(self):
        with pytest.raises(ShapeError):
            add(Tensor.constant(np.zeros((3, 1))), Tensor.constant(np.zeros((2, 3, 4))))

    def test_suffix_broadcast_accepted(self):
        out = add(Tensor.constant(np.zeros((2, 3, 4))), Tensor.constant(np.ones(4)))
        assert out.shape == (2, 3, 4)

    def test_matmul_inner_mismatch_names_op(self):
        with pytest.raises(ShapeError, match="matmul"):
            matmul(Tensor.constant(np.zeros((2, 3))), Tensor.constant(np.zeros((4, 2))))

    def test_nonfinite_is_surfaced(self):
        big = Tensor.constant(np.full(3, 1e308))
        with pytest.raises(NonFiniteError, match="multiply"):
            multiply(big, big)

    def test_mixed_tapes_rejected(self):
        t1, t2 = Tape(), Tape()
        with pytest.raises(ShapeError, match="tapes"):
            add(t1.leaf(np.zeros(2)), t2.leaf(np.zeros(2)))


class TestBackward:
    def test_sum_of_squares_gradient(self):
        tape = Tape()
        x = tape.leaf([1.0, 2.0, 3.0])
        out = tensor_sum(square(x))
        np.testing.assert_allclose(backward(tape, out).wrt(x), [2.0, 4.0, 6.0])

    def test_sigmoid_gradient_at_zero(self):
        tape = Tape()
        x = tape.leaf(0.0)
        g = backward(tape, sigmoid(x)).wrt(x)
        np.testing.assert_allclose(g, 0.25)

    def test_zero_influence_leaf_gets_exact_zeros(self):
        tape = Tape()
        x = tape.leaf([1.0, 2.0])
        unused = tape.leaf([3.0, 4.0])
        out = tensor_sum(square(x))
        g = backward(tape, out).wrt(unused)
        assert np.all(g == 0.0)

    def test_non_scalar_output_rejected(self):
        tape = Tape()
        x = tape.leaf([1.0, 2.0])
        with pytest.raises(ShapeError, match="scalar"):
            backward(tape, square(x))

    def test_reused_node_accumulates(self):
        tape = Tape()
        x = tape.leaf([2.0])
        out = tensor_sum(add(square(x), square(x)))
        np.testing.assert_allclose(backward(tape, out).wrt(x), [8.0])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), a=st.floats(-2, 2), b=st.floats(-2, 2))
    def test_backward_linearity(self, seed, a, b):
        """grad(a*f + b*g) == a*grad(f) + b*grad(g) on shared leaves."""
        rng = np.random.default_rng(seed)
        x0 = rng.normal(size=(4,))

        def f(x):
            return tensor_sum(square(x))

        def g(x):
            return tensor_mean(sigmoid(x))

        tape = Tape()
        x = tape.leaf(x0)
        combined = add(a * f(x), b * g(x))
        gc = backward(tape, combined).wrt(x)
        tape_f = Tape()
        xf = tape_f.leaf(x0)
        gf = backward(tape_f, f(xf)).wrt(xf)
        tape_g = Tape()
        xg = tape_g.leaf(x0)
        gg = backward(tape_g, g(xg)).wrt(xg)
        np.testing.assert_allclose(gc, a * gf + b * gg, atol=1e-12)

    def test_determinism_bitwise(self):
        def run():
            rng = np.random.default_rng(7)
            tape = Tape()
            x = tape.leaf(rng.normal(size=(3, 4)))
            w = tape.leaf(rng.normal(size=(4, 2)))
            out = tensor_mean(sigmoid(matmul(x, w)))
            return out.data.copy(), backward(tape, out).wrt(x).copy()

        (o1, g1), (o2, g2) = run(), run()
        assert np.array_equal(o1, o2)
        assert np.array_equal(g1, g2)


PRIMITIVE_CASES = {
    "add": lambda x: tensor_sum(add(x, Tensor.constant(np.linspace(0.1, 1, x.size).reshape(x.shape)))),
    "subtract": lambda x: tensor_sum(subtract(Tensor.constant(np.ones(x.shape)), x)),
    "multiply": lambda x: tensor_sum(multiply(x, Tensor.constant(np.linspace(-1, 1, x.size).reshape(x.shape)))),
    "square": lambda x: tensor_sum(square(x)),
    "sigmoid": lambda x: tensor_sum(sigmoid(x)),
    "mean": lambda x: tensor_mean(x),
    "transpose": lambda x: tensor_sum(square(transpose(x))),
    "transpose_axes": lambda x: tensor_sum(square(transpose(x, (2, 0, 1)))),
    "reshape": lambda x: tensor_sum(square(reshape(x, (x.size,)))),
    "slice": lambda x: tensor_sum(square(slice_axis(x, 1, 0, 2))),
    "concat": lambda x: tensor_sum(square(concat([x, x], axis=0))),
    "upsample": lambda x: tensor_sum(square(upsample_nearest(x, 2))),
    "gather": lambda x: tensor_sum(square(gather_rows(x, [1, 0, 1]))),
    "scatter": lambda x: tensor_sum(square(scatter_add_rows(x, [0, 2, 0], 4))),
}


class TestGradcheckPrimitives:
    @pytest.mark.parametrize("name", sorted(PRIMITIVE_CASES))
    def test_primitive_gradcheck(self, name):
        rng = np.random.default_rng(11)
        x = rng.normal(0.0, 0.8, size=(3, 4, 2))
        assert gradcheck(PRIMITIVE_CASES[name], Tensor.constant(x)) <= 1e-5

    def test_matmul_gradcheck_both_sides(self):
        rng = np.random.default_rng(12)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        err_a = gradcheck(
            lambda t: tensor_sum(square(matmul(t, Tensor.constant(b)))), Tensor.constant(a)
        )
        err_b = gradcheck(
            lambda t: tensor_sum(square(matmul(Tensor.constant(a), t))), Tensor.constant(b)
        )
        assert max(err_a, err_b) <= 1e-5

    def test_conv_gradchecks(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=(2, 3, 8))
        k = rng.normal(size=(4, 3, 3))
        kt = rng.normal(size=(3, 4, 3))
        checks = [
            gradcheck(lambda t: tensor_sum(square(conv1d(t, Tensor.constant(k), 2, 1))), Tensor.constant(x)),
            gradcheck(lambda t: tensor_sum(square(conv1d(Tensor.constant(x), t, 2, 1))), Tensor.constant(k)),
            gradcheck(
                lambda t: tensor_sum(square(transposed_conv1d(t, Tensor.constant(kt), 2, 1, 1))),
                Tensor.constant(x),
            ),
            gradcheck(
                lambda t: tensor_sum(square(transposed_conv1d(Tensor.constant(x), t, 2, 1, 1))),
                Tensor.constant(kt),
            ),
        ]
        assert max(checks) <= 1e-5

    def test_linear_map_is_machine_exact(self):
        # small function values keep the central difference below 1e-10 noise
        rng = np.random.default_rng(14)
        w = rng.normal(size=(3, 3))
        x = rng.normal(size=(3, 2)) * 0.05
        err = gradcheck(lambda t: tensor_sum(matmul(Tensor.constant(w), t)), Tensor.constant(x))
        assert err <= 1e-10

    def test_sigmoid_affine_chain(self):
        rng = np.random.default_rng(15)
        w = rng.normal(size=(4, 3)) * 0.5
        x = rng.normal(size=(3, 2))
        err = gradcheck(
            lambda t: tensor_sum(sigmoid(matmul(Tensor.constant(w), t))), Tensor.constant(x)
        )
        assert err <= 1e-5

    @settings(max_examples=25, deadline=None, derandomize=True)
    @given(seed=st.integers(0, 10_000), depth=st.integers(1, 6))
    def test_random_compositions_depth_six(self, seed, depth):
        """Chain-rule correctness through randomized op pipelines.

        Draws stay bounded away from zero: a multiply by a ~0 constant makes
        the true gradient fall below what a float64 central difference can
        resolve relatively, which would test the oracle's noise floor rather
        than the chain rule.
        """
        rng = np.random.default_rng(seed)
        ops = [int(rng.integers(0, 5)) for _ in range(depth)]

        def bounded(shape):
            return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.3, 1.2, size=shape)

        consts = np.stack([bounded((2, 3, 4)) for _ in range(depth)])

        def f(t):
            h = t
            for i, op in enumerate(ops):
                c = Tensor.constant(consts[i])
                if op == 0:
                    h = sigmoid(h)
                elif op == 1:
                    h = add(h, c)
                elif op == 2:
                    h = multiply(h, c)
                elif op == 3:
                    h = subtract(c, h)
                else:
                    h = sigmoid(multiply(h, Tensor.constant(0.5)))
            return tensor_mean(square(add(h, Tensor.constant(0.25))))

        x = bounded((2, 3, 4))
        assert gradcheck(f, Tensor.constant(x)) <= 1e-5

    def test_gradcheck_rejects_bad_eps(self):
        with pytest.raises(ShapeError):
            gradcheck(lambda t: tensor_sum(t), Tensor.constant([1.0]), eps=0.0)
