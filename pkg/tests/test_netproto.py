import numpy as np
import pytest

from edgekt.models import DecoderWeights, Precision
from edgekt.netproto import (Ack, AckStatus, ChannelConfig, LognormalJitter,
                             ProtocolError, SimulatedChannel, WeightUpdate, decode_message,
                             encode_message, frame_upload_from_tensor, lan_config,
                             tensor_from_frame_upload, wifi_config, zero_cost_config)
from edgekt.tensor import Tensor, f16_decode, f16_encode


def _random_weights(rng, precision=Precision.FULL, version=1):
    blocks = tuple(Tensor(rng.uniform(-1, 1, s).astype(np.float32))
                   for s in ((4, 3), (3,), (2, 2, 2)))
    return DecoderWeights(version=version, blocks=blocks, precision=precision)


def _random_message(rng):
    kind = int(rng.integers(0, 3))
    if kind == 0:
        t = Tensor(rng.uniform(0, 1, (int(rng.integers(2, 6)), 3)).astype(np.float32))
        return frame_upload_from_tensor(int(rng.integers(0, 1000)), t)
    if kind == 1:
        return WeightUpdate(int(rng.integers(0, 1000)), _random_weights(rng),
                            float(rng.uniform(0, 10)))
    return Ack(int(rng.integers(0, 1000)), AckStatus(int(rng.integers(0, 2))))


def test_ack_is_18_bytes():
    data = encode_message(Ack(1, AckStatus.OK))
    assert len(data) == 18  # 4 magic + 1 type + 4 length + 8 id + 1 status


def test_round_trip_randomized_thousand():
    rng = np.random.Generator(np.random.PCG64(30))
    for _ in range(1000):
        m = _random_message(rng)
        assert decode_message(encode_message(m)) == m


def test_frame_upload_payload_round_trip():
    rng = np.random.Generator(np.random.PCG64(31))
    t = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
    m = frame_upload_from_tensor(7, t)
    assert tensor_from_frame_upload(decode_message(encode_message(m))) == t


def test_half_precision_round_trip_is_f16():
    rng = np.random.Generator(np.random.PCG64(32))
    t = Tensor(rng.uniform(0, 1, (6, 6, 3)).astype(np.float32))
    m = frame_upload_from_tensor(9, t, Precision.HALF)
    back = tensor_from_frame_upload(decode_message(encode_message(m)))
    assert back == f16_decode(f16_encode(t), t.shape)


def test_weight_update_half_rounds_blocks():
    rng = np.random.Generator(np.random.PCG64(33))
    w = _random_weights(rng, precision=Precision.HALF)
    m = decode_message(encode_message(WeightUpdate(4, w, 1.5)))
    for orig, back in zip(w.blocks, m.weights.blocks):
        assert back == f16_decode(f16_encode(orig), orig.shape)


def test_bad_magic_detected():
    data = bytearray(encode_message(Ack(1, AckStatus.OK)))
    data[0] ^= 0xFF
    with pytest.raises(ProtocolError) as err:
        decode_message(bytes(data))
    assert err.value.code == "bad_magic"


def test_truncated_body_detected():
    data = encode_message(Ack(1, AckStatus.OK))
    with pytest.raises(ProtocolError) as err:
        decode_message(data[:-3])
    assert err.value.code == "truncated"


def test_unknown_type_detected():
    data = bytearray(encode_message(Ack(1, AckStatus.OK)))
    data[4] = 99
    with pytest.raises(ProtocolError) as err:
        decode_message(bytes(data))
    assert err.value.code == "unknown_type"


def test_half_size_is_half_payload_plus_constant_header():
    rng = np.random.Generator(np.random.PCG64(34))
    for shape in ((4, 4, 3), (8, 8, 3), (16, 16, 3)):
        t = Tensor(rng.uniform(0, 1, shape).astype(np.float32))
        full = len(encode_message(frame_upload_from_tensor(1, t, Precision.FULL)))
        half = len(encode_message(frame_upload_from_tensor(1, t, Precision.HALF)))
        # framing + id + precision + rank + dims = 31 bytes for rank-3 shapes
        assert 2 * half - full == 31
        assert half == full / 2 + 15.5


# -- channel -------------------------------------------------------------------

def test_transmit_serialization_arithmetic():
    ch = SimulatedChannel(ChannelConfig(bandwidth_bps=100e6, base_latency_s=0.0), 0)
    m = Ack(1, AckStatus.OK)
    res = ch.transmit(m, now=0.0)
    assert res.size_bytes == 18
    assert res.serialize_s == pytest.approx(18 * 8 / 100e6)
    assert res.delivery_time == pytest.approx(res.serialize_s)


def test_transmit_bandwidth_ratio():
    rng = np.random.Generator(np.random.PCG64(35))
    t = Tensor(rng.uniform(0, 1, (64, 64, 3)).astype(np.float32))
    m = frame_upload_from_tensor(0, t)
    lan = SimulatedChannel(ChannelConfig(bandwidth_bps=100e6), 0).transmit(m, 0.0)
    wifi = SimulatedChannel(ChannelConfig(bandwidth_bps=13e6), 0).transmit(m, 0.0)
    assert wifi.serialize_s / lan.serialize_s == pytest.approx(100 / 13)


def test_transmit_monotone_in_payload():
    ch = SimulatedChannel(ChannelConfig(bandwidth_bps=13e6), 0)
    small = frame_upload_from_tensor(0, Tensor(np.zeros((4, 4, 3), np.float32)))
    large = frame_upload_from_tensor(0, Tensor(np.zeros((16, 16, 3), np.float32)))
    assert ch.transmit(small, 0.0).serialize_s < ch.transmit(large, 0.0).serialize_s


def test_transmit_fifo_order():
    cfg = wifi_config(seed=2)
    ch = SimulatedChannel(cfg, 0)
    deliveries = [ch.transmit(Ack(i, AckStatus.OK), now=0.001 * i).delivery_time
                  for i in range(50)]
    assert all(a <= b for a, b in zip(deliveries, deliveries[1:]))


def test_transmit_deterministic_given_seed():
    def run():
        ch = SimulatedChannel(wifi_config(seed=4), 0)
        return [ch.transmit(Ack(i, AckStatus.OK), now=float(i)).delivery_time
                for i in range(20)]
    assert run() == run()


def test_wifi_jitter_positive_and_lan_jitter_absent():
    wifi = SimulatedChannel(wifi_config(seed=6), 0)
    base = wifi_config(seed=6)
    m = Ack(1, AckStatus.OK)
    res = wifi.transmit(m, 0.0)
    floor = base.base_latency_s + res.serialize_s
    assert res.delivery_time > floor  # jitter draw added

    lan = SimulatedChannel(lan_config(seed=6), 0)
    res2 = lan.transmit(m, 0.0)
    assert res2.delivery_time == pytest.approx(lan_config().base_latency_s + res2.serialize_s)


def test_zero_cost_channel():
    ch = SimulatedChannel(zero_cost_config(), 0)
    res = ch.transmit(frame_upload_from_tensor(0, Tensor(np.zeros((64, 64, 3), np.float32))), 5.0)
    assert res.serialize_s == 0.0
    assert res.delivery_time == 5.0


def test_channel_config_validation():
    with pytest.raises(ValueError):
        ChannelConfig(bandwidth_bps=0.0)
    with pytest.raises(ValueError):
        ChannelConfig(bandwidth_bps=1e6, base_latency_s=-1.0)


def test_jitter_median_scale():
    cfg = ChannelConfig(bandwidth_bps=1e9, base_latency_s=0.0,
                        jitter=LognormalJitter(0.005, 0.5), seed=8)
    ch = SimulatedChannel(cfg, 0)
    draws = []
    for i in range(4000):
        res = ch.transmit(Ack(i, AckStatus.OK), now=float(i))
        draws.append(res.delivery_time - float(i) - res.serialize_s)
    assert float(np.median(draws)) == pytest.approx(0.005, rel=0.1)
