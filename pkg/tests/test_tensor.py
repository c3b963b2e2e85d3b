import math

import numpy as np
import pytest

from edgekt.tensor import AdamState, Tensor, adam_step, f16_decode, f16_encode, l2_sq_distance


def test_tensor_rejects_non_finite():
    with pytest.raises(ValueError):
        Tensor([1.0, float("nan")])
    with pytest.raises(ValueError):
        Tensor([float("inf")])


def test_tensor_immutable():
    t = Tensor([[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ValueError):
        t.array[0, 0] = 9.0


def test_l2_identity_is_zero():
    t = Tensor(np.arange(12, dtype=np.float32).reshape(3, 4))
    assert l2_sq_distance(t, t) == 0.0


def test_l2_unit_shift():
    a = Tensor([1.0, 2.0])
    b = Tensor([2.0, 3.0])
    assert l2_sq_distance(a, b) == pytest.approx(2.0)


def test_l2_matches_scalar_loop():
    rng = np.random.Generator(np.random.PCG64(3))
    a = Tensor(rng.uniform(-5, 5, (3, 3)).astype(np.float32))
    b = Tensor(rng.uniform(-5, 5, (3, 3)).astype(np.float32))
    expected = 0.0
    for x, y in zip(a.data.tolist(), b.data.tolist()):
        expected += (x - y) ** 2
    assert l2_sq_distance(a, b) == pytest.approx(expected, rel=1e-10)


def test_l2_symmetry():
    rng = np.random.Generator(np.random.PCG64(4))
    for _ in range(20):
        a = Tensor(rng.uniform(-3, 3, (2, 5)).astype(np.float32))
        b = Tensor(rng.uniform(-3, 3, (2, 5)).astype(np.float32))
        assert l2_sq_distance(a, b) == l2_sq_distance(b, a)


def test_l2_shape_mismatch():
    with pytest.raises(ValueError):
        l2_sq_distance(Tensor([1.0]), Tensor([1.0, 2.0]))


def test_adam_zero_gradient_fixpoint():
    param = Tensor([1.5, -2.0, 0.25])
    state = AdamState.for_param(param)
    out = adam_step(param, Tensor.zeros((3,)), state)
    assert out == param
    assert state.step == 1


def test_adam_first_step_hand_calc():
    # scalar param 1.0, grad 1.0, lr 0.1: bias correction makes the first
    # update one full lr step (up to eps)
    param = Tensor([1.0])
    state = AdamState.for_param(param, lr=0.1)
    out = adam_step(param, Tensor([1.0]), state)
    assert out.data[0] == pytest.approx(0.9, abs=1e-6)
    assert state.step == 1


def test_adam_descends_quadratic():
    # f(x) = x^2, grad 2x; matches an independent scalar reference
    def reference(x0, lr, steps):
        m = v = 0.0
        x = x0
        for t in range(1, steps + 1):
            g = 2.0 * x
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            x -= lr * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        return x

    param = Tensor([1.0])
    state = AdamState.for_param(param, lr=0.05)
    for _ in range(200):
        param = adam_step(param, Tensor([2.0 * float(param.data[0])]), state)
    assert abs(param.data[0]) < 0.1
    assert param.data[0] == pytest.approx(reference(1.0, 0.05, 200), abs=1e-3)


def test_adam_deterministic():
    def run():
        p = Tensor([0.5, -0.5])
        st = AdamState.for_param(p, lr=0.01)
        for k in range(10):
            p = adam_step(p, Tensor([0.1 * (k + 1), -0.2]), st)
        return p.tobytes()

    assert run() == run()


def test_adam_shape_mismatch():
    p = Tensor([1.0, 2.0])
    st = AdamState.for_param(p)
    with pytest.raises(ValueError):
        adam_step(p, Tensor([1.0]), st)


def test_f16_exact_values_round_trip():
    t = Tensor([0.0, 1.0, -2.0, 0.5])
    back = f16_decode(f16_encode(t), (4,))
    assert back == t


def test_f16_third_within_tolerance():
    t = Tensor([1.0 / 3.0])
    back = f16_decode(f16_encode(t), (1,))
    rel = abs(back.data[0] - t.data[0]) / abs(t.data[0])
    assert rel <= 2 ** -11


def test_f16_two_bytes_per_element():
    t = Tensor([1.0, 2.0, 3.0, 4.0])
    assert len(f16_encode(t)) == 8


def test_f16_overflow_errors():
    with pytest.raises(OverflowError):
        f16_encode(Tensor([70000.0]))
    with pytest.raises(OverflowError):
        f16_encode(Tensor([-65600.0]))


def test_f16_round_trip_tolerance_sweep():
    # normal binary16 range: relative error bounded by 2^-11; below it the
    # absolute error stays under 6e-5
    rng = np.random.Generator(np.random.PCG64(9))
    vals = rng.uniform(-1000.0, 1000.0, 100_000).astype(np.float32)
    t = Tensor(vals)
    back = f16_decode(f16_encode(t), t.shape)
    err = np.abs(back.data.astype(np.float64) - vals.astype(np.float64))
    normal = np.abs(vals) >= 6.104e-5
    assert np.all(err[normal] <= np.abs(vals[normal]) * 2 ** -11)
    assert np.all(err[~normal] <= 6e-5)


def test_f16_decode_length_check():
    with pytest.raises(ValueError):
        f16_decode(b"\x00\x00\x00", (2,))
