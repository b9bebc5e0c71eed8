import math

import numpy as np
import pytest

from cone import nn


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def scalar_cell(wx, wh, b):
    """p=1, e=1 cell with per-gate scalars ordered (i, f, o, g)."""
    return nn.LSTMCell(
        nn.Parameter(np.array([wx], dtype=float)),
        nn.Parameter(np.array([wh], dtype=float)),
        nn.Parameter(np.array(b, dtype=float)),
    )


def test_zero_weights_give_zero_output():
    cell = nn.LSTMCell.init(np.random.default_rng(0), 3, 5)
    for p in cell.parameters():
        p.value[...] = 0.0
    table = nn.Parameter(np.random.default_rng(1).normal(size=(4, 3)))
    np.testing.assert_array_equal(nn.lstm_forward([1, 2, 3], cell, table), np.zeros(5))


def test_empty_sequence_is_zero():
    cell = nn.LSTMCell.init(np.random.default_rng(0), 3, 5)
    table = nn.Parameter(np.ones((4, 3)))
    np.testing.assert_array_equal(nn.lstm_forward([], cell, table), np.zeros(5))


def test_single_step_hand_recurrence():
    wx, wh, b = [0.5, -0.3, 0.8, 1.2], [0.1, 0.2, 0.3, 0.4], [0.05, 1.0, -0.2, 0.1]
    cell = scalar_cell(wx, wh, b)
    x = 0.7
    table = nn.Parameter(np.array([[0.0], [x]]))
    z = [wx[j] * x + b[j] for j in range(4)]  # h0 = 0 so wh drops out
    i, f, o, g = sig(z[0]), sig(z[1]), sig(z[2]), math.tanh(z[3])
    c = f * 0.0 + i * g
    h = o * math.tanh(c)
    assert nn.lstm_forward([1], cell, table)[0] == pytest.approx(h, abs=1e-14)


def test_two_step_hand_recurrence():
    wx, wh, b = [0.5, -0.3, 0.8, 1.2], [0.1, 0.2, 0.3, 0.4], [0.05, 1.0, -0.2, 0.1]
    cell = scalar_cell(wx, wh, b)
    table = nn.Parameter(np.array([[0.0], [0.7], [-1.1]]))
    h = c = 0.0
    for x in (0.7, -1.1):
        z = [wx[j] * x + wh[j] * h + b[j] for j in range(4)]
        c = sig(z[1]) * c + sig(z[0]) * math.tanh(z[3])
        h = sig(z[2]) * math.tanh(c)
    assert nn.lstm_forward([1, 2], cell, table)[0] == pytest.approx(h, abs=1e-14)


def test_padding_does_not_change_result():
    rng = np.random.default_rng(3)
    cell = nn.LSTMCell.init(rng, 4, 3)
    table = nn.Parameter(rng.normal(size=(6, 4)))
    tokens, lengths = nn.pad_sequences([[1, 2], [3, 4, 5, 1]])
    batch = nn.lstm_encode(tokens, lengths, cell, table).value
    np.testing.assert_allclose(batch[0], nn.lstm_forward([1, 2], cell, table), atol=1e-15)


def test_token_outside_table_is_error():
    cell = nn.LSTMCell.init(np.random.default_rng(0), 2, 2)
    with pytest.raises(IndexError):
        nn.lstm_forward([5], cell, nn.Parameter(np.zeros((3, 2))))


def test_forget_bias_initialised_to_one():
    cell = nn.LSTMCell.init(np.random.default_rng(0), 2, 3)
    np.testing.assert_array_equal(cell.b.value, [0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0])


def test_mean_pool_examples(rng):
    v = np.array([1.0, 2.0])
    np.testing.assert_array_equal(nn.mean_pool([v]).value, v)
    np.testing.assert_array_equal(nn.mean_pool([np.array([1.0, 3.0]), np.array([3.0, 1.0])]).value, [2, 2])
    vs = [rng.normal(size=5) for _ in range(4)]
    np.testing.assert_allclose(nn.mean_pool(vs).value, (vs[0] + vs[1] + vs[2] + vs[3]) / 4, atol=1e-15)


def test_mean_pool_errors():
    with pytest.raises(ValueError):
        nn.mean_pool([])
    with pytest.raises(ValueError):
        nn.mean_pool([np.zeros(2), np.zeros(3)])


def test_mean_pool_backward_splits_gradient():
    ps = [nn.Parameter(np.ones(3), name=f"v{j}") for j in range(4)]
    g = np.array([1.0, -2.0, 4.0])
    with nn.Tape() as tape:
        out = nn.mean_pool(ps)
        loss = nn.matmul(out, g)
        tape.backward(loss)
    for p in ps:
        np.testing.assert_allclose(p.grad, g / 4)


def _stack(weights, biases):
    return nn.DenseStack([nn.Parameter(w) for w in weights], [nn.Parameter(b) for b in biases])


def test_dense_zero_input_zero_bias():
    rng = np.random.default_rng(0)
    layers = nn.DenseStack.init(rng, 5, (4, 3, 2))
    np.testing.assert_array_equal(nn.dense_relu_stack(np.zeros((1, 5)), layers).value, np.zeros((1, 2)))


def test_dense_identity_relu_clamp():
    layers = _stack([np.eye(2), np.eye(2)], [np.zeros(2), np.zeros(2)])
    np.testing.assert_array_equal(nn.dense_relu_stack(np.array([[-1.0, 2.0]]), layers).value, [[0, 2]])
    single = _stack([np.eye(2)], [np.zeros(2)])
    # A single layer is the output layer, so it stays linear.
    np.testing.assert_array_equal(nn.dense_relu_stack(np.array([[-1.0, 2.0]]), single).value, [[-1, 2]])


def test_dense_against_matmul_oracle(rng):
    ws = [rng.normal(size=(6, 5)), rng.normal(size=(4, 6)), rng.normal(size=(3, 4))]
    bs = [rng.normal(size=6), rng.normal(size=4), rng.normal(size=3)]
    x = rng.normal(size=(7, 5))
    h = x
    for j, (w, b) in enumerate(zip(ws, bs)):
        h = h @ w.T + b
        if j < 2:
            h = np.maximum(h, 0)
    np.testing.assert_allclose(nn.dense_relu_stack(x, _stack(ws, bs)).value, h, atol=1e-12)


def test_dense_shape_mismatch():
    with pytest.raises(ValueError):
        nn.dense_relu_stack(np.zeros((1, 3)), _stack([np.eye(2)], [np.zeros(2)]))


def test_softmax_uniform():
    loss, p = nn.softmax_xent(np.full(4, 0.3), np.array([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_allclose(p, 0.25)
    assert loss == pytest.approx(math.log(4), abs=1e-12)


def test_softmax_dominant_logit():
    loss, _ = nn.softmax_xent(np.array([50.0, 0.0]), np.array([1.0, 0.0]))
    assert loss < 1e-20


def test_softmax_closed_form():
    loss, _ = nn.softmax_xent(np.array([1.0, 2.0]), np.array([0.0, 1.0]))
    assert loss == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)
    assert loss == pytest.approx(0.3133, abs=1e-4)


def test_softmax_rejects_bad_inputs():
    with pytest.raises(FloatingPointError):
        nn.softmax_xent(np.array([np.inf, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        nn.softmax_xent(np.array([0.0, 0.0]), np.array([0.5, 0.6]))


def test_adagrad_first_step_is_rho():
    p = nn.Parameter(np.array([1.0, -2.0, 0.0]))
    p.grad[...] = [3.0, -0.001, 0.0]
    nn.adagrad_step([p], 0.1)
    np.testing.assert_allclose(p.value, [0.9, -1.9, 0.0], atol=1e-6)
    np.testing.assert_array_equal(p.grad, 0.0)
    assert p.acc[2] == 0.0


def test_adagrad_second_step():
    p = nn.Parameter(np.array([0.0]))
    p.grad[...] = 3.0
    nn.adagrad_step([p], 0.1)
    before = p.value.copy()
    p.grad[...] = 4.0
    nn.adagrad_step([p], 0.1)
    assert (before - p.value)[0] == pytest.approx(0.08, abs=1e-9)


def test_adagrad_skips_frozen():
    p = nn.Parameter(np.array([1.0]), frozen=True)
    p.grad[...] = 5.0
    nn.adagrad_step([p], 0.1)
    assert p.value[0] == 1.0 and p.acc[0] == 0.0


def test_tape_single_backward():
    w = nn.Parameter(np.array([2.0]))
    with nn.Tape() as tape:
        loss = nn.matmul(w, np.array([3.0]))
        tape.backward(loss)
        with pytest.raises(RuntimeError):
            tape.backward(loss)
    assert w.grad[0] == 3.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_forward_rejects_non_finite():
    w = nn.Parameter(np.array([1e308]))
    with pytest.raises(FloatingPointError):
        nn.mul(w, np.array([10.0]))


def test_grad_check_linear_model_exact(rng):
    W = nn.Parameter(rng.normal(size=(3, 4)), name="W")
    b = nn.Parameter(rng.normal(size=3), name="b")
    x = rng.normal(size=(5, 4))
    c = rng.normal(size=15)

    def forward():
        y = nn.linear(x, W, b)
        flat = nn.matmul(np.ones(5), y)  # column sums, still linear
        return nn.matmul(flat, c[:3])

    report = nn.grad_check(forward, [W, b])
    assert report.max_error < 1e-9


def test_grad_check_omits_frozen_block(rng):
    W = nn.Parameter(rng.normal(size=(2, 3)), name="W")
    F = nn.Parameter(rng.normal(size=(2, 3)), name="F", frozen=True)
    x = rng.normal(size=(4, 3))
    t = np.full((4, 2), 0.5)
    report = nn.grad_check(lambda: nn.softmax_xent_rows(nn.add(nn.linear(x, W), nn.linear(x, F)), t), [W, F])
    assert set(report.errors) == {"W"}
    assert report.passed


@pytest.mark.parametrize("seed", range(10))
def test_primitive_gradients(seed):
    rng = np.random.default_rng(seed)
    n, e, p, K = 5, 3, 4, 3
    table = nn.Parameter(rng.normal(size=(6, e)) * 0.5, name="table")
    cell = nn.LSTMCell.init(rng, e, p, "c.", scale=0.5)
    stack = nn.DenseStack.init(rng, p, (4, K), "ff.", scale=0.5)
    m = rng.random((n, n))
    m /= m.sum(axis=1, keepdims=True)
    tokens, lengths = nn.pad_sequences([list(rng.integers(1, 6, size=rng.integers(0, 4))) for _ in range(n)])
    t = rng.dirichlet(np.ones(K), size=n)
    rows = np.array([0, 2, 3])

    def forward():
        h = nn.lstm_encode(tokens, lengths, cell, table)
        h = nn.mean_pool([h, nn.tanh(h), nn.sigmoid(h)])
        s = nn.propagate(h, m)
        z = nn.dense_relu_stack(s, stack)
        return nn.softmax_xent_rows(z, t, rows)

    params = [table, *cell.parameters(), *stack.parameters()]
    report = nn.grad_check(forward, params, tolerance=1e-4)
    assert report.passed, report.errors
