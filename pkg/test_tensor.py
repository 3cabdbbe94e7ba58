"""
Tests für den Tensor-Kern: Faltungen mit Padding pro Achse, Pooling, Normierung und Backward.
"""
import numpy as np
import pytest

from rangeloop.config import get_dtype, precision
from rangeloop.models.conv import PadKind, PadMode, conv1d, conv2d
from rangeloop.models.tensor import (
    Tensor, backward, concat, elementwise, l2norm, matmul, pool, sigmoid, softmax,
)
from rangeloop.services.projection_service import roll_columns


class TestConv2d:
    def test_circular_padding_wraps_columns(self):
        x = Tensor([[[1.0, 2.0, 3.0, 4.0]]])
        kernel = Tensor(np.ones((1, 1, 1, 3)))
        out = conv2d(x, kernel, pad=PadMode.circular(2))
        assert out.shape == (1, 1, 4)
        assert out.data.reshape(-1).tolist() == [7.0, 6.0, 9.0, 8.0]

    def test_zero_padding_differs_at_edges(self):
        x = Tensor([[[1.0, 2.0, 3.0, 4.0]]])
        kernel = Tensor(np.ones((1, 1, 1, 3)))
        out = conv2d(x, kernel, pad=PadMode.zero(1))
        assert out.data.reshape(-1).tolist() == [3.0, 6.0, 9.0, 7.0]

    def test_identity_kernel(self, rng):
        x = Tensor(rng.standard_normal((2, 5, 7)))
        kernel = np.zeros((2, 2, 1, 1))
        kernel[0, 0, 0, 0] = kernel[1, 1, 0, 0] = 1.0
        out = conv2d(x, Tensor(kernel))
        np.testing.assert_array_equal(out.data, x.data)

    def test_channel_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="channel mismatch"):
            conv2d(Tensor(rng.standard_normal((3, 4, 4))), Tensor(rng.standard_normal((1, 2, 3, 3))))

    def test_zero_stride_rejected(self, rng):
        with pytest.raises(ValueError, match="stride"):
            conv2d(Tensor(rng.standard_normal((1, 4, 4))), Tensor(rng.standard_normal((1, 1, 3, 3))), stride=(0, 1))

    def test_kernel_larger_than_padded_input_rejected(self, rng):
        with pytest.raises(ValueError, match="larger than padded input"):
            conv2d(Tensor(rng.standard_normal((1, 2, 2))), Tensor(rng.standard_normal((1, 1, 5, 5))))

    def test_circular_split_enforced(self):
        with pytest.raises(ValueError):
            PadMode(horizontal=PadKind.CIRCULAR, left=2, right=1)
        pad = PadMode.circular(3)
        assert (pad.left, pad.right) == (1, 2)

    @pytest.mark.parametrize("k", [1, 3, 5, 8, -2, 11])
    def test_circular_shift_equivariance_is_exact(self, rng, k):
        x = rng.standard_normal((3, 6, 11))
        kernel = Tensor(rng.standard_normal((4, 3, 3, 5)))
        pad = PadMode.circular(4, vertical=1)
        shifted_out = conv2d(Tensor(roll_columns(x, k)), kernel, stride=(2, 1), pad=pad)
        out_shifted = roll_columns(conv2d(Tensor(x), kernel, stride=(2, 1), pad=pad).data, k)
        np.testing.assert_array_equal(shifted_out.data, out_shifted)

    def test_zero_padding_breaks_equivariance(self, rng):
        x = rng.uniform(1.0, 2.0, size=(1, 4, 10))
        kernel = Tensor(rng.uniform(0.5, 1.0, size=(2, 1, 3, 3)))
        pad = PadMode.zero(1, vertical=1)
        worst = max(
            np.abs(conv2d(Tensor(roll_columns(x, k)), kernel, pad=pad).data
                   - roll_columns(conv2d(Tensor(x), kernel, pad=pad).data, k)).max()
            for k in range(1, 10)
        )
        assert worst > 1e-6

    def test_deterministic(self, rng):
        x = rng.standard_normal((2, 8, 9))
        kernel = rng.standard_normal((3, 2, 3, 3))
        first = conv2d(Tensor(x), Tensor(kernel), pad=PadMode.circular(2, vertical=1)).data
        second = conv2d(Tensor(x), Tensor(kernel), pad=PadMode.circular(2, vertical=1)).data
        assert first.tobytes() == second.tobytes()


class TestConv1d:
    def test_identity_kernel(self):
        out = conv1d(Tensor([[1.0, 2.0, 3.0]]), Tensor([[[0.0, 1.0, 0.0]]]))
        assert out.data.tolist() == [[1.0, 2.0, 3.0]]

    def test_circular_sum(self):
        out = conv1d(Tensor([[1.0, 2.0, 3.0]]), Tensor([[[1.0, 1.0, 1.0]]]), circular=True)
        assert out.data.tolist() == [[6.0, 6.0, 6.0]]

    def test_matches_direct_convolution(self):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        k = np.array([1.0, 2.0, 3.0])
        expected = [sum(k[t] * x[(j + t - 1) % 4] for t in range(3)) for j in range(4)]
        out = conv1d(Tensor(x[None, :]), Tensor(k[None, None, :]), circular=True)
        assert out.data.reshape(-1).tolist() == expected

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            conv1d(Tensor([[1.0, 2.0, 3.0]]), Tensor([[[1.0, 1.0]]]))

    def test_length_preserved_with_zero_padding(self, rng):
        out = conv1d(Tensor(rng.standard_normal((1, 9))), Tensor(rng.standard_normal((1, 1, 5))), circular=False)
        assert out.shape == (1, 9)


class TestElementwiseAndReductions:
    def test_sigmoid_at_zero(self):
        assert sigmoid(Tensor([0.0])).item() == 0.5
        assert elementwise(Tensor([0.0]), "sigmoid").item() == 0.5

    def test_relu(self):
        assert elementwise(Tensor([-1.0, 0.0, 2.0]), "relu").data.tolist() == [0.0, 0.0, 2.0]

    def test_unknown_function_rejected(self):
        with pytest.raises(ValueError, match="Unknown elementwise"):
            elementwise(Tensor([1.0]), "tanh")

    def test_softmax_symmetric(self):
        assert softmax(Tensor([0.0, 0.0]), axis=0).data.tolist() == [0.5, 0.5]

    def test_softmax_sums_to_one(self, rng):
        out = softmax(Tensor(rng.standard_normal((4, 7)) * 10), axis=1)
        np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-12)

    def test_max_pool_over_rows(self):
        out = pool(Tensor([[1.0, 5.0], [2.0, 3.0]]), "max", axes=0, keepdims=False)
        assert out.data.tolist() == [2.0, 5.0]

    def test_mean_pool(self):
        out = pool(Tensor([[1.0, 5.0], [2.0, 3.0]]), "mean", axes=1, keepdims=False)
        assert out.data.tolist() == [3.0, 2.5]

    def test_l2norm_unit_length(self, rng):
        out = l2norm(Tensor(rng.standard_normal((5, 6))), axis=1)
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=1), 1.0, atol=1e-12)

    def test_l2norm_zero_slice_rejected(self):
        with pytest.raises(ValueError, match="all-zero"):
            l2norm(Tensor([[1.0, 2.0], [0.0, 0.0]]), axis=1)

    def test_invalid_axis_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            softmax(Tensor([1.0, 2.0]), axis=3)

    def test_matmul_shape_mismatch(self, rng):
        with pytest.raises(ValueError, match="mismatch"):
            matmul(Tensor(rng.standard_normal((2, 3))), Tensor(rng.standard_normal((2, 3))))

    def test_concat(self):
        out = concat([Tensor([[1.0]]), Tensor([[2.0, 3.0]])], axis=1)
        assert out.data.tolist() == [[1.0, 2.0, 3.0]]


class TestBackward:
    def test_full_reduction_is_scalar(self):
        a = Tensor(np.ones((6, 6)), requires_grad=True)
        loss = a.sum()
        assert loss.data.shape == ()
        assert a.mean().data.shape == ()
        loss.backward()
        assert a.grad.shape == (6, 6)
        assert np.all(a.grad == 1.0)

    def test_mean_backward_over_matrix(self, rng):
        a = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        a.square().mean().backward()
        np.testing.assert_allclose(a.grad, 2.0 * a.data / 20.0, rtol=1e-12)

    def test_sum_of_squares(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * x).sum().backward()
        assert x.grad.tolist() == [2.0, 4.0]

    def test_constant_has_no_grad(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([3.0, 4.0])
        backward((x * c).sum())
        assert c.grad is None
        assert x.grad.tolist() == [3.0, 4.0]

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            backward(x * x)

    def test_grad_shape_matches_data(self, rng):
        w = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal(4), requires_grad=True)
        (matmul(Tensor(rng.standard_normal((2, 3))), w) + b).sum().backward()
        assert w.grad.shape == w.shape
        assert b.grad.shape == b.shape

    def test_shared_subexpression_accumulates(self):
        x = Tensor([3.0], requires_grad=True)
        y = x * x
        (y + y).sum().backward()
        assert x.grad.tolist() == [12.0]


class TestPrecision:
    def test_float32_mode(self):
        with precision("float32"):
            assert Tensor([1.0]).data.dtype == np.float32
        assert get_dtype() == np.float64

    def test_unknown_precision_rejected(self):
        with pytest.raises(ValueError):
            with precision("float16"):
                pass
