"""
Tensor operations and the differentiation tape.
"""
import numpy as np
import pytest

from covnmt.errors import ConfigError, DimensionError, InvalidMaskError, VocabIndexError
from covnmt.tensor import (
    Tape, _result, absolute, add, concat, constant, gather_rows, get_precision, grad_check, log,
    masked_softmax, matmul, mul, no_grad, one_minus, parameter, pointwise, precision, put_rows,
    reshape, scale, set_precision, sigmoid, stack, sub, sum_all, take, tanh,
)


def test_matmul_row_vector():
    x = constant([1.0, 2.0])
    W = constant([[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]])
    assert np.allclose(matmul(x, W).data, [1.0, 2.0, 0.0])


def test_matmul_dimension_error_names_both_shapes():
    with pytest.raises(DimensionError) as info:
        matmul(constant(np.ones((2, 3))), constant(np.ones((2, 3))))
    assert '(2, 3) vs (2, 3)' in str(info.value)
    assert isinstance(info.value, ValueError)


def test_precision_context(wide):
    assert get_precision() == 'wide'
    assert constant([1.0]).data.dtype == np.float64
    with precision('standard'):
        assert constant([1.0]).data.dtype == np.float32
    assert get_precision() == 'wide'


def test_unknown_precision():
    with pytest.raises(ConfigError):
        set_precision('quad')


def test_reused_tensor_accumulates(wide):
    x = parameter([3.0, -1.0])
    with Tape() as tape:
        y = sum_all(mul(x, x))
    tape.backward(y)
    assert np.allclose(x.grad, [6.0, -2.0])


def test_no_grad_does_not_record(wide):
    x = parameter([1.0, 2.0])
    with Tape() as tape:
        with no_grad():
            sum_all(tanh(x))
        assert len(tape) == 0
        sum_all(tanh(x))
    assert len(tape) == 2


def test_backward_needs_scalar(wide):
    x = parameter([1.0, 2.0])
    with Tape() as tape:
        y = tanh(x)
    with pytest.raises(DimensionError):
        tape.backward(y)


def test_masked_softmax():
    p = masked_softmax(constant([1.0, 50.0, 2.0]), np.array([True, False, True]))
    assert p.data[1] == 0.0
    assert abs(float(p.data.sum()) - 1.0) < 1e-6
    assert p.data[2] > p.data[0]


def test_masked_softmax_all_masked():
    with pytest.raises(InvalidMaskError):
        masked_softmax(constant([1.0, 2.0]), np.array([False, False]))


def test_gather_rows_out_of_range():
    table = constant(np.zeros((3, 2)))
    with pytest.raises(VocabIndexError) as info:
        gather_rows(table, [0, 3])
    assert 'id 3' in str(info.value)
    assert isinstance(info.value, IndexError)


def test_gather_rows_gradient_hits_only_selected_rows(wide):
    table = parameter(np.arange(8.0).reshape(4, 2))
    with Tape() as tape:
        y = sum_all(gather_rows(table, [1, 1, 3]))
    tape.backward(y)
    assert np.allclose(table.grad, [[0, 0], [2, 2], [0, 0], [1, 1]])


def test_put_rows_replaces_selected_rows():
    base = constant(np.zeros((3, 2)))
    out = put_rows(base, [0, 2], constant([[1.0, 1.0], [2.0, 2.0]]))
    assert np.allclose(out.data, [[1, 1], [0, 0], [2, 2]])


def test_pointwise_dispatch():
    a, b = constant([1.0, 2.0]), constant([3.0, 5.0])
    assert np.allclose(pointwise('sub', a, b).data, [-2.0, -3.0])
    with pytest.raises(ConfigError):
        pointwise('cube', a)


def test_sigmoid_is_finite_for_large_inputs():
    y = sigmoid(constant([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(y.data))
    assert np.allclose(y.data, [0.0, 0.5, 1.0])


def test_grad_check_elementwise_chain(wide):
    rng = np.random.default_rng(0)
    x = parameter(rng.normal(size=(3, 4)), name='x')
    W = parameter(rng.normal(size=(4, 2)), name='W')
    v = parameter(rng.normal(size=(2,)), name='v')

    def f():
        h = tanh(matmul(x, W))
        g = sigmoid(add(h, v))
        return sum_all(mul(one_minus(g), sub(h, scale(g, 0.3))))

    assert grad_check(f, [x, W, v]) < 1e-6


def test_grad_check_structural_ops(wide):
    rng = np.random.default_rng(1)
    a = parameter(rng.normal(size=(4,)), name='a')
    b = parameter(rng.normal(size=(4,)), name='b')
    mask = np.array([True, True, False, True])

    def f():
        joined = concat([a, b])
        rows = reshape(stack([a, b]), (2, 4))
        p = masked_softmax(take(joined, slice(2, 6)), mask)
        filled = put_rows(rows, [1], reshape(mul(p, a), (1, 4)))
        return add(sum_all(absolute(filled)), sum_all(log(add(p, 1.0))))

    assert grad_check(f, [a, b]) < 1e-6


def test_grad_check_flags_a_wrong_gradient(wide):
    x = parameter([0.5, -0.2], name='x')

    def broken_square(t):
        return _result(t.data * t.data, (t,), lambda g: (g * 0.0,))

    assert grad_check(lambda: sum_all(broken_square(x)), [x]) > 0.1


def test_tensor_used_twice_gets_both_gradients(wide):
    x = parameter([0.3, -1.2])
    with Tape() as tape:
        y = sum_all(add(x, x))
    tape.backward(y)
    doubled = parameter([0.3, -1.2])
    with Tape() as tape:
        z = sum_all(scale(doubled, 2.0))
    tape.backward(z)
    assert np.array_equal(x.grad, [2.0, 2.0])
    assert np.array_equal(x.grad, doubled.grad)


def test_masked_softmax_exact_ratio(wide):
    p = masked_softmax(constant([0.0, np.log(2.0)]))
    assert np.allclose(p.data, [1.0 / 3, 2.0 / 3], atol=1e-12)
    assert abs(float(p.data.sum()) - 1.0) <= 1e-12


def test_grad_check_quadratic_and_flat_objectives(wide):
    x = parameter([1.0, 2.0], name='x')
    assert grad_check(lambda: sum_all(mul(x, x)), [x]) < 1e-8
    assert np.allclose(x.grad, [2.0, 4.0])
    assert grad_check(lambda: sum_all(scale(x, 0.0)), [x]) == 0.0
    assert np.array_equal(x.data, [1.0, 2.0])
