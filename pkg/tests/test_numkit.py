"""Tensor core: forward ops, autodiff vs finite differences, Adam, LTEN io."""

import numpy as np
import pytest

from latentcast import numkit as nk
from oracles import central_difference_grads


def rng(seed=0):
    return np.random.default_rng(seed)


# -- forward ops ---------------------------------------------------------------


def test_matmul_identity():
    a = nk.tensor(rng(1).normal(size=(2, 2)).astype(np.float32))
    eye = nk.tensor(np.eye(2, dtype=np.float32))
    np.testing.assert_array_equal((eye @ a).data, a.data)


def test_matmul_shape_error_names_op():
    with pytest.raises(nk.ShapeError, match="matmul"):
        nk.matmul(nk.tensor(np.zeros((2, 3))), nk.tensor(np.zeros((2, 3))))


def test_layer_norm_constant_row_is_zero():
    x = nk.tensor(np.full((3, 8), 2.5, dtype=np.float32))
    g = nk.tensor(np.ones(8, dtype=np.float32))
    b = nk.tensor(np.zeros(8, dtype=np.float32))
    out = nk.layer_norm(x, g, b)
    np.testing.assert_allclose(out.data, 0.0, atol=1e-4)


def test_layer_norm_moments():
    x = nk.tensor(rng(2).normal(size=(16, 32)).astype(np.float32) * 3 + 1)
    out = nk.layer_norm(x, nk.tensor(np.ones(32)), nk.tensor(np.zeros(32)))
    np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-5)
    np.testing.assert_allclose(out.data.var(axis=-1), 1.0, atol=1e-3)


def test_layer_norm_shift_invariance():
    x = rng(3).normal(size=(4, 16)).astype(np.float32)
    g = nk.tensor(np.ones(16))
    b = nk.tensor(np.zeros(16))
    base = nk.layer_norm(nk.tensor(x), g, b).data
    shifted = nk.layer_norm(nk.tensor(x + 7.0), g, b).data
    np.testing.assert_allclose(base, shifted, atol=1e-5)


def test_attention_single_token_returns_value():
    q = nk.tensor(rng(4).normal(size=(1, 8)).astype(np.float32))
    k = nk.tensor(rng(5).normal(size=(1, 8)).astype(np.float32))
    v = nk.tensor(rng(6).normal(size=(1, 8)).astype(np.float32))
    out = nk.attention(q, k, v)
    np.testing.assert_allclose(out.data, v.data, rtol=1e-6)


def test_softmax_rows_sum_to_one():
    x = nk.tensor(rng(7).normal(size=(5, 9)).astype(np.float32) * 10)
    np.testing.assert_allclose(nk.softmax(x).data.sum(axis=-1), 1.0, rtol=1e-5)


def test_embedding_gathers_rows():
    table = nk.tensor(rng(8).normal(size=(10, 4)).astype(np.float32))
    idx = np.array([[1, 3], [9, 1]])
    out = nk.embedding(table, idx)
    np.testing.assert_array_equal(out.data, table.data[idx])


def test_forward_determinism():
    x = rng(9).normal(size=(6, 6)).astype(np.float32)
    w = rng(10).normal(size=(6, 6)).astype(np.float32)

    def run():
        a = nk.param(x.copy())
        out = nk.gelu(nk.matmul(a, nk.tensor(w))).sum()
        out.backward()
        return out.item(), a.grad.copy()

    v1, g1 = run()
    v2, g2 = run()
    assert v1 == v2
    np.testing.assert_array_equal(g1, g2)


def test_finite_outputs_on_finite_inputs():
    x = nk.tensor(rng(11).normal(size=(8, 8)).astype(np.float32) * 50)
    for fn in (nk.softmax, nk.gelu, nk.sigmoid, nk.softplus, nk.tanh):
        assert np.all(np.isfinite(fn(x).data))
    assert np.all(np.isfinite(nk.layer_norm(x, nk.tensor(np.ones(8)), nk.tensor(np.zeros(8))).data))


# -- backward ------------------------------------------------------------------


def test_backward_sum_gives_ones():
    x = nk.param(rng(12).normal(size=(3, 4)).astype(np.float32))
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((3, 4), dtype=np.float32))


def test_backward_square_gives_2x():
    x = nk.param(rng(13).normal(size=(5,)).astype(np.float32))
    nk.square(x).sum().backward()
    np.testing.assert_allclose(x.grad, 2 * x.data, rtol=1e-6)


def test_backward_requires_scalar():
    x = nk.param(np.ones((2, 2), dtype=np.float32))
    with pytest.raises(ValueError, match="scalar"):
        (x * x).backward()


def test_backward_repeatable_after_zeroing():
    x = nk.param(rng(14).normal(size=(4, 4)).astype(np.float32))
    w = nk.param(rng(15).normal(size=(4, 4)).astype(np.float32))

    def once():
        x.zero_grad()
        w.zero_grad()
        loss = nk.gelu(x @ w).sum()
        loss.backward()
        return x.grad.copy(), w.grad.copy()

    gx1, gw1 = once()
    gx2, gw2 = once()
    np.testing.assert_array_equal(gx1, gx2)
    np.testing.assert_array_equal(gw1, gw2)


def test_two_layer_net_matches_finite_differences():
    r = rng(16)
    x0 = r.normal(size=(3, 6))
    w1 = r.normal(size=(6, 5))
    w2 = r.normal(size=(5, 2))

    def np_loss(arrays):
        a, b, c = arrays
        return float(np.sum(np.tanh(a @ b) @ c) ** 2)

    def nk_loss(ts):
        a, b, c = ts
        return nk.square(nk.reduce_sum(nk.tanh(a @ b) @ c))

    params = [nk.Tensor(w.copy(), requires_grad=True) for w in (x0, w1, w2)]
    nk_loss(params).backward()
    numeric = central_difference_grads(np_loss, [x0.copy(), w1.copy(), w2.copy()], step=1e-3)
    for p, n in zip(params, numeric):
        rel = np.abs(p.grad - n) / (np.abs(p.grad) + np.abs(n) + 1e-8)
        assert rel.max() < 1e-3


OP_CASES = {
    "add_mul": lambda a, b, g: (a + b * a - b).sum(),
    "matmul": lambda a, b, g: nk.reduce_sum(a @ b),
    "softmax": lambda a, b, g: nk.square(nk.softmax(a)).sum(),
    "gelu": lambda a, b, g: nk.gelu(a).sum(),
    "layer_norm": lambda a, b, g: nk.square(nk.layer_norm(a, g, g)).sum(),
    "attention": lambda a, b, g: nk.square(nk.attention(a, b, b)).sum(),
    "mean_pool": lambda a, b, g: nk.square(nk.mean_pool(a, 0)).sum(),
    "sigmoid": lambda a, b, g: nk.sigmoid(a).sum(),
    "softplus": lambda a, b, g: nk.softplus(a).sum(),
    "div_exp": lambda a, b, g: nk.exp(a * 0.3).sum() + (a / (nk.square(b) + 1.0)).sum(),
}


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_every_op_gradcheck_at_random_points(name):
    fn = OP_CASES[name]
    for seed in range(10):
        r = rng(1000 * seed + hash(name) % 1000)
        a = nk.Tensor(r.normal(size=(4, 4)), requires_grad=True)
        b = nk.Tensor(r.normal(size=(4, 4)), requires_grad=True)
        g = nk.Tensor(r.normal(size=(4,)), requires_grad=True)
        err = nk.grad_check(lambda ts: fn(*ts), [a, b, g], step=1e-5)
        assert err < 1e-3, f"{name} gradcheck failed at seed {seed} ({err})"


def test_grad_check_quadratic_form():
    r = rng(17)
    a_mat = r.normal(size=(5, 5))
    a_sym = nk.tensor((a_mat + a_mat.T).astype(np.float64), dtype=np.float64)
    x = nk.Tensor(r.normal(size=(1, 5)), requires_grad=True)
    err = nk.grad_check(lambda t: nk.reduce_sum(t @ a_sym @ t.swapaxes(0, 1)), x, step=1e-4)
    assert err < 1e-6


def test_grad_check_layer_norm_sum():
    x = nk.Tensor(rng(18).normal(size=(3, 7)), requires_grad=True)
    g = nk.tensor(np.ones(7, dtype=np.float64), dtype=np.float64)
    b = nk.tensor(np.zeros(7, dtype=np.float64), dtype=np.float64)
    err = nk.grad_check(lambda t: nk.square(nk.layer_norm(t, g, b)).sum(), x, step=1e-5)
    assert err < 1e-4


def test_grad_check_constant_function():
    x = nk.Tensor(np.ones((2, 2)), requires_grad=True)
    err = nk.grad_check(lambda t: (t * 0.0).sum(), x)
    assert err == 0.0


# -- optimizer -----------------------------------------------------------------


def test_adam_zero_grad_leaves_params():
    p = nk.param(np.array([1.0, -2.0], dtype=np.float32))
    state = nk.OptimizerState(lr=0.1)
    before = p.data.copy()
    nk.adam_step(state, [p], [np.zeros(2, dtype=np.float32)])
    np.testing.assert_array_equal(p.data, before)
    assert state.step_count == 1


def test_adam_first_step_magnitude():
    p = nk.param(np.zeros(4, dtype=np.float32))
    g = np.array([0.5, -3.0, 1e-3, 10.0], dtype=np.float32)
    nk.adam_step(nk.OptimizerState(lr=0.01), [p], [g])
    np.testing.assert_allclose(np.abs(p.data), 0.01, rtol=1e-3)
    np.testing.assert_array_equal(np.sign(p.data), -np.sign(g))


def test_adam_nan_grad_raises():
    p = nk.param(np.zeros(2, dtype=np.float32))
    with pytest.raises(FloatingPointError):
        nk.adam_step(nk.OptimizerState(), [p], [np.array([np.nan, 0.0], dtype=np.float32)])


def test_adam_converges_on_quadratic():
    # loss = sum((x - c)^2), 200 steps should shrink it by >= 100x
    r = rng(19)
    c = r.normal(size=(8,)).astype(np.float32) * 3
    x = nk.param(np.zeros(8, dtype=np.float32))
    state = nk.OptimizerState(lr=0.05)

    def loss_val():
        return float(((x.data - c) ** 2).sum())

    first = loss_val()
    for _ in range(200):
        x.zero_grad()
        loss = nk.square(x - nk.tensor(c)).sum()
        loss.backward()
        nk.adam_step(state, [x])
    assert loss_val() <= first / 100.0


# -- LTEN io -------------------------------------------------------------------


def test_tensor_roundtrip(tmp_path):
    arr = rng(20).normal(size=(3, 4, 5)).astype(np.float32)
    nk.save_tensor(tmp_path / "a.lten", arr)
    np.testing.assert_array_equal(nk.load_tensor(tmp_path / "a.lten"), arr)


def test_tensor_bad_magic(tmp_path):
    path = tmp_path / "bad.lten"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(nk.TensorFormatError, match="magic"):
        nk.load_tensor(path)


def test_tensor_truncated(tmp_path):
    arr = np.ones((4, 4), dtype=np.float32)
    nk.save_tensor(tmp_path / "t.lten", arr)
    raw = (tmp_path / "t.lten").read_bytes()
    (tmp_path / "t.lten").write_bytes(raw[:-8])
    with pytest.raises(nk.TensorFormatError, match="truncated"):
        nk.load_tensor(tmp_path / "t.lten")


def test_tensor_version_mismatch(tmp_path):
    arr = np.ones(3, dtype=np.float32)
    nk.save_tensor(tmp_path / "v.lten", arr)
    raw = bytearray((tmp_path / "v.lten").read_bytes())
    raw[4] = 99
    (tmp_path / "v.lten").write_bytes(bytes(raw))
    with pytest.raises(nk.TensorFormatError, match="version"):
        nk.load_tensor(tmp_path / "v.lten")


def test_checkpoint_roundtrip_and_checksum(tmp_path):
    tensors = {"w1": rng(21).normal(size=(2, 3)).astype(np.float32), "b": np.zeros(3, dtype=np.float32)}
    nk.save_checkpoint(tmp_path / "ckpt", tensors, meta={"kind": "test"})
    loaded, meta = nk.load_checkpoint(tmp_path / "ckpt")
    assert meta == {"kind": "test"}
    for k in tensors:
        np.testing.assert_array_equal(loaded[k], tensors[k])
    c1 = nk.checkpoint_checksum(tmp_path / "ckpt")
    nk.save_checkpoint(tmp_path / "ckpt2", tensors)
    assert c1 == nk.checkpoint_checksum(tmp_path / "ckpt2")
