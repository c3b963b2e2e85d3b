"""Toy-scale student and oracle detectors.

The student splits into a frozen feature extractor, a frozen general decoder
and a trainable adaptive decoder whose per-scale linear heads add onto the
general heads (a zero adaptive decoder is a no-op). The finest scale carries
an extra stack in the adaptive decoder for small objects. The oracle is a
much deeper frozen model realized as a near-perfect encoder of scene truth
into detection tensors plus small deterministic noise, so its decoded output
can serve as evaluation ground truth.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .detection import (BOX_CHANNELS, CH_OBJ, CH_TH, CH_TW, CH_TX, CH_TY,
                        COORD_LOGIT_SCALE, SIZE_PRIOR, Box, logit)
from .tensor import AdamState, Tensor, adam_step, f16_decode, f16_encode, l2_sq_distance


class Precision(str, Enum):
    FULL = "full"
    HALF = "half"


_PRECISION_TAG = {Precision.FULL: 0, Precision.HALF: 1}
_TAG_PRECISION = {v: k for k, v in _PRECISION_TAG.items()}


@dataclass(frozen=True)
class ModelConfig:
    """Shared geometry of student and oracle outputs."""

    input_hw: int = 64
    classes: int = 3
    grids: tuple[int, ...] = (8, 4, 2)
    feat1: int = 10
    feat2: int = 20

    def __post_init__(self):
        if len(self.grids) != 3:
            raise ValueError("exactly three output scales are required")
        if self.input_hw % 4 != 0:
            raise ValueError("input size must be divisible by 4")
        fg = self.input_hw // 4
        for g in self.grids:
            if fg % g != 0:
                raise ValueError(f"feature grid {fg} not divisible by scale grid {g}")

    @property
    def channels(self) -> int:
        return BOX_CHANNELS + self.classes

    @property
    def feature_grid(self) -> int:
        return self.input_hw // 4


@dataclass(frozen=True)
class DetectionTensorSet:
    """The three per-scale output tensors, tagged with the producer version."""

    scales: tuple[Tensor, Tensor, Tensor]
    version: int = 0

    def __post_init__(self):
        if len(self.scales) != 3:
            raise ValueError("a detection tensor set has exactly three scales")
        for t in self.scales:
            if len(t.shape) != 3 or t.shape[0] != t.shape[1]:
                raise ValueError(f"scale tensor must be GxGxC, got {t.shape}")


@dataclass(frozen=True)
class DecoderWeights:
    """Versioned snapshot of the adaptive decoder; the unit of transfer."""

    version: int
    blocks: tuple[Tensor, ...]
    precision: Precision = Precision.FULL

    def __post_init__(self):
        if self.version <= 0:
            raise ValueError("weight version must be positive")

    def byte_size(self) -> int:
        return len(encode_weights(self))


def distill_loss(student_out: DetectionTensorSet, oracle_out: DetectionTensorSet) -> float:
    """Sum over the three scales of squared L2 distance between outputs."""
    total = 0.0
    for s, o in zip(student_out.scales, oracle_out.scales):
        total += l2_sq_distance(s, o)
    return total


# ---------------------------------------------------------------------------
# Student


def _avg_pool(a: np.ndarray, k: int) -> np.ndarray:
    h, w = a.shape[0], a.shape[1]
    return a.reshape(h // k, k, w // k, k, a.shape[2]).mean(axis=(1, 3))


class StudentModel:
    """Shallow detector; only the adaptive decoder changes after construction.

    The adaptive decoder mirrors the general decoder's per-scale linear
    heads, but at the finest scale it carries one extra layer for small
    objects: a fine feature view (the cell's four quadrant feature vectors,
    not just their average) feeding a wider head. Adaptive head inputs are
    whitened with statistics frozen at pretraining time.
    """

    # adaptive blocks per scale: (W, b) each; scale 0's W reads the
    # four-quadrant small-object view
    _BLOCKS_PER_SCALE = (2, 2, 2)

    def __init__(self, config: ModelConfig, extractor: dict, general: list,
                 adaptive: tuple[Tensor, ...], version: int = 1):
        self.config = config
        self._extractor = extractor
        self._general = general
        self._adaptive = tuple(adaptive)
        self.version = version

    # -- construction -------------------------------------------------------

    @classmethod
    def seeded(cls, config: ModelConfig | None = None, seed: int = 7) -> "StudentModel":
        """Random frozen extractor, zero decoders, identity whitening."""
        cfg = config or ModelConfig()
        rng = np.random.Generator(np.random.PCG64(seed))
        f1, f2, ch = cfg.feat1, cfg.feat2, cfg.channels
        extractor = {
            "mix1": Tensor(rng.normal(0.0, 0.8 / np.sqrt(3), (3, f1)).astype(np.float32)),
            "b1": Tensor(rng.normal(0.0, 0.05, (f1,)).astype(np.float32)),
            "mix2": Tensor(rng.normal(0.0, 0.8 / np.sqrt(f1), (f1, f2)).astype(np.float32)),
            "b2": Tensor(rng.normal(0.0, 0.05, (f2,)).astype(np.float32)),
        }
        for i, dim in enumerate(cls._adaptive_in_dims(cfg)):
            extractor[f"mu{i}"] = Tensor.zeros((dim,))
            extractor[f"white{i}"] = Tensor(np.eye(dim, dtype=np.float32))
        general = [(Tensor.zeros((f2, ch)), Tensor.zeros((ch,))) for _ in cfg.grids]
        adaptive = []
        for dim in cls._adaptive_in_dims(cfg):
            adaptive.append(Tensor.zeros((dim, ch)))
            adaptive.append(Tensor.zeros((ch,)))
        return cls(cfg, extractor, general, tuple(adaptive), version=1)

    @staticmethod
    def _adaptive_in_dims(cfg: ModelConfig) -> list[int]:
        return [4 * cfg.feat2] + [cfg.feat2] * (len(cfg.grids) - 1)

    @classmethod
    def pretrained(cls, config: ModelConfig | None = None, seed: int = 7,
                   ridge_lambda: float = 1.0, pos_weight: float = 20.0,
                   samples=None) -> "StudentModel":
        """Student whose general decoder was fit by ridge regression against
        oracle targets on a generic scene, standing in for base training.

        Object cells are rare, so their rows are up-weighted by
        ``pos_weight``; the resulting base detector is recall-leaning and
        blurry -- the intended starting point for online adaptation.
        ``samples`` is an iterable of (frame, truth-box list); when omitted a
        built-in generic pretraining stream is used.
        """
        model = cls.seeded(config, seed)
        cfg = model.config
        if samples is None:
            from .scenegen import SceneStream, pretrain_script
            stream = SceneStream(pretrain_script(size=cfg.input_hw))
            samples = [(ev.frame, ev.truth) for ev in stream.events()]
        else:
            samples = list(samples)
        teacher = OracleModel(cfg, seed=seed, noise_amp=0.0)

        per_scale_x: list[list[np.ndarray]] = [[] for _ in cfg.grids]
        per_scale_a: list[list[np.ndarray]] = [[] for _ in cfg.grids]
        per_scale_y: list[list[np.ndarray]] = [[] for _ in cfg.grids]
        for frame, truth in samples:
            phis = model.scale_features(frame)
            fine = model.adaptive_inputs(frame)
            targets = teacher.forward(frame, truth).scales
            for i in range(3):
                per_scale_x[i].append(phis[i])
                per_scale_a[i].append(fine[i])
                per_scale_y[i].append(targets[i].array.reshape(-1, cfg.channels))

        # freeze ZCA whitening of the adaptive head inputs; without it the
        # head features are correlated enough that Adam crawls
        for i in range(3):
            a = np.concatenate(per_scale_a[i]).astype(np.float64)
            mu = a.mean(axis=0)
            centered = a - mu
            cov = centered.T @ centered / max(1, len(a) - 1)
            evals, evecs = np.linalg.eigh(cov)
            floor = 1e-4 * max(float(evals.max()), 1e-12)
            inv_sqrt = evecs @ np.diag(1.0 / np.sqrt(np.maximum(evals, floor))) @ evecs.T
            model._extractor[f"mu{i}"] = Tensor(mu.astype(np.float32))
            model._extractor[f"white{i}"] = Tensor(inv_sqrt.astype(np.float32))

        general = []
        for i in range(3):
            x = np.concatenate(per_scale_x[i]).astype(np.float64)
            y = np.concatenate(per_scale_y[i]).astype(np.float64)
            row_w = np.where(y[:, CH_OBJ] > 0.0, pos_weight, 1.0)
            xa = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
            reg = ridge_lambda * np.eye(xa.shape[1])
            reg[-1, -1] = 0.0  # bias unregularized
            w_aug = np.linalg.solve(xa.T @ (xa * row_w[:, None]) + reg,
                                    xa.T @ (y * row_w[:, None]))
            general.append((Tensor(w_aug[:-1].astype(np.float32)),
                            Tensor(w_aug[-1].astype(np.float32))))
        model._general = general
        return model

    # -- forward ------------------------------------------------------------

    def features(self, frame: Tensor) -> np.ndarray:
        """Frozen two-stage extractor: pool, mix channels, tanh, twice."""
        cfg = self.config
        if frame.shape != (cfg.input_hw, cfg.input_hw, 3):
            raise ValueError(
                f"frame shape {frame.shape} != {(cfg.input_hw, cfg.input_hw, 3)}")
        ex = self._extractor
        h = _avg_pool(frame.array, 2)
        h = np.tanh(h @ ex["mix1"].array + ex["b1"].array)
        h = _avg_pool(h, 2)
        h = np.tanh(h @ ex["mix2"].array + ex["b2"].array)
        return h

    def scale_features(self, frame: Tensor) -> list[np.ndarray]:
        """Per-scale cell features (region average), flattened to (G*G, feat2)."""
        feats = self.features(frame)
        cfg = self.config
        out = []
        for g in cfg.grids:
            pooled = _avg_pool(feats, cfg.feature_grid // g)
            out.append(pooled.reshape(g * g, cfg.feat2))
        return out

    def adaptive_inputs(self, frame: Tensor,
                        feats: np.ndarray | None = None) -> list[np.ndarray]:
        """Whitened per-scale inputs of the adaptive heads.

        The finest scale gets the extra small-object view: the cell's four
        quadrant feature averages (4*feat2 wide) instead of one blurred cell
        average; coarser scales reuse the pooled features.
        """
        cfg = self.config
        if feats is None:
            feats = self.features(frame)
        out = []
        for i, g in enumerate(cfg.grids):
            k = cfg.feature_grid // g
            if i == 0:
                x = _quadrant_pool(feats, k).reshape(g * g, 4 * cfg.feat2)
            else:
                x = _avg_pool(feats, k).reshape(g * g, cfg.feat2)
            mu = self._extractor[f"mu{i}"].array
            white = self._extractor[f"white{i}"].array
            out.append((x - mu) @ white)
        return out

    def adaptive_by_scale(self, blocks: tuple | None = None) -> list[tuple]:
        blocks = self._adaptive if blocks is None else blocks
        out, i = [], 0
        for n in self._BLOCKS_PER_SCALE:
            out.append(tuple(blocks[i:i + n]))
            i += n
        return out

    def forward(self, frame: Tensor) -> DetectionTensorSet:
        feats = self.features(frame)
        phis = []
        cfg = self.config
        for g in cfg.grids:
            phis.append(_avg_pool(feats, cfg.feature_grid // g).reshape(g * g, cfg.feat2))
        ada_x = self.adaptive_inputs(frame, feats)
        outs = _head_forward(phis, ada_x, self._general, self.adaptive_by_scale())
        scales = tuple(
            Tensor(outs[i].reshape(g, g, cfg.channels).astype(np.float32))
            for i, g in enumerate(cfg.grids)
        )
        return DetectionTensorSet(scales=scales, version=self.version)

    # -- bookkeeping ---------------------------------------------------------

    @property
    def adaptive_blocks(self) -> tuple[Tensor, ...]:
        return self._adaptive

    @property
    def layer_count(self) -> int:
        # two extractor stages, the general head layer, the adaptive head
        # and its extra small-object feature layer
        return 5

    def frozen_checksum(self) -> str:
        """Digest over extractor and general decoder bytes (must never move)."""
        h = hashlib.sha256()
        for key in sorted(self._extractor):
            h.update(self._extractor[key].tobytes())
        for w, b in self._general:
            h.update(w.tobytes())
            h.update(b.tobytes())
        return h.hexdigest()

    def adaptive_checksum(self) -> str:
        h = hashlib.sha256()
        for t in self._adaptive:
            h.update(t.tobytes())
        return h.hexdigest()

    def decoder_weights(self, precision: Precision = Precision.FULL) -> DecoderWeights:
        return DecoderWeights(version=self.version, blocks=self._adaptive,
                              precision=precision)

    def clone(self) -> "StudentModel":
        return StudentModel(self.config, self._extractor, self._general,
                            self._adaptive, self.version)

    def mac_count(self) -> int:
        """Multiply-accumulate count of one forward pass (cost-model proxy)."""
        cfg = self.config
        hw2 = (cfg.input_hw // 2) ** 2
        fg2 = cfg.feature_grid ** 2
        macs = hw2 * 3 * cfg.feat1 + fg2 * cfg.feat1 * cfg.feat2
        macs += sum(g * g * cfg.feat2 * cfg.channels for g in cfg.grids)
        dims = self._adaptive_in_dims(cfg)
        macs += sum(g * g * d * d for g, d in zip(cfg.grids, dims))  # whitening
        macs += self.adaptive_mac_count()
        return macs

    def adaptive_mac_count(self) -> int:
        cfg = self.config
        dims = self._adaptive_in_dims(cfg)
        return sum(g * g * dims[i] * cfg.channels for i, g in enumerate(cfg.grids))

    def train_step_mac_count(self) -> int:
        # one Adam step touches the adaptive heads only: head forward plus
        # gradient products (features are extracted once per adaptation)
        return 3 * self.adaptive_mac_count()

    def train_overhead_mac_count(self) -> int:
        # per-adaptation one-off work: feature extraction and whitening
        return self.mac_count()


def _quadrant_pool(feats: np.ndarray, k: int) -> np.ndarray:
    """Per-cell quadrant averages, shape (G, G, 4*C); the small-object view.

    Cells of width 1 in feature space degenerate to four copies of the cell.
    """
    if k == 1:
        return np.concatenate([feats] * 4, axis=2)
    half = k // 2
    g = feats.shape[0] // k
    c = feats.shape[2]
    # split each k-wide cell into 2x2 half-cells and average within each
    r = feats.reshape(g, 2, half, g, 2, half, c).mean(axis=(2, 5))
    return r.transpose(0, 3, 1, 2, 4).reshape(g, g, 4 * c)


def _head_forward(phis: list[np.ndarray], ada_x: list[np.ndarray],
                  general: list, adaptive_scales: list) -> list[np.ndarray]:
    """General plus adaptive head outputs per scale, flattened (G*G, C)."""
    outs = []
    for i, phi in enumerate(phis):
        wg, bg = general[i]
        w, b = (v.array if isinstance(v, Tensor) else v for v in adaptive_scales[i])
        outs.append(phi @ wg.array + bg.array + ada_x[i] @ w + b)
    return outs


# ---------------------------------------------------------------------------
# Adaptation


def distill_gradients(model: StudentModel, frame: Tensor,
                      oracle_out: DetectionTensorSet,
                      blocks: tuple | None = None,
                      dtype=np.float32):
    """Loss and analytic gradients of the distillation loss with respect to
    every adaptive block, at the given (or the model's current) blocks.

    ``dtype`` may be float64 for high-precision verification.
    """
    cfg = model.config
    phis = [p.astype(dtype) for p in model.scale_features(frame)]
    ada_x = [x.astype(dtype) for x in model.adaptive_inputs(frame)]
    gen = [(w.array.astype(dtype), b.array.astype(dtype)) for w, b in model._general]
    targets = [s.array.reshape(-1, cfg.channels).astype(dtype) for s in oracle_out.scales]
    raw = model._adaptive if blocks is None else blocks
    arrs = [b.array.astype(dtype) if isinstance(b, Tensor) else np.asarray(b, dtype=dtype)
            for b in raw]

    loss = 0.0
    grads: list[np.ndarray] = []
    per_scale = model.adaptive_by_scale(tuple(arrs))
    for i, phi in enumerate(phis):
        wg, bg = gen[i]
        w, b = per_scale[i]
        out = phi @ wg + bg + ada_x[i] @ w + b
        resid = 2.0 * (out - targets[i])
        grads.extend([ada_x[i].T @ resid, resid.sum(axis=0)])
        diff = out - targets[i]
        loss += float(np.sum(diff.astype(np.float64) ** 2))
    return loss, grads


def adapt_decoder(model: StudentModel, frame: Tensor,
                  oracle_out: DetectionTensorSet, steps: int = 20,
                  lr: float = 1e-3) -> tuple[DecoderWeights, float]:
    """Run Adam on the adaptive decoder against the oracle output.

    Frozen parts are untouched; the model itself is not mutated. Returns the
    new versioned weights and the loss after the final step (the selector's
    loss-trend input). A non-finite loss aborts and discards the weights.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    for s, o in zip(model.forward(frame).scales, oracle_out.scales):
        if s.shape != o.shape:
            raise ValueError(f"target shape {o.shape} != student shape {s.shape}")

    arrs = [b.array.astype(np.float32) for b in model._adaptive]
    states = [AdamState.for_param(Tensor(a), lr=lr) for a in arrs]
    for _ in range(steps):
        loss, grads = distill_gradients(model, frame, oracle_out, tuple(arrs))
        if not np.isfinite(loss):
            raise ValueError("non-finite distillation loss; weights discarded")
        for k in range(len(arrs)):
            arrs[k] = adam_step(Tensor(arrs[k]), Tensor(grads[k].astype(np.float32)),
                                states[k]).array
    final_loss, _ = distill_gradients(model, frame, oracle_out, tuple(arrs))
    if not np.isfinite(final_loss):
        raise ValueError("non-finite distillation loss; weights discarded")
    weights = DecoderWeights(version=model.version + 1,
                             blocks=tuple(Tensor(a) for a in arrs))
    return weights, final_loss


def swap_decoder(model: StudentModel, weights: DecoderWeights) -> StudentModel:
    """Replace the adaptive decoder, rejecting stale versions.

    Returns a new model on success (frozen parts shared) or the original,
    unmodified model when the incoming version is not newer.
    """
    if weights.version <= model.version:
        return model
    if len(weights.blocks) != len(model._adaptive):
        raise ValueError("adaptive block count mismatch")
    for new, cur in zip(weights.blocks, model._adaptive):
        if new.shape != cur.shape:
            raise ValueError(f"block shape {new.shape} != {cur.shape}")
    return StudentModel(model.config, model._extractor, model._general,
                        weights.blocks, version=weights.version)


# ---------------------------------------------------------------------------
# Oracle


class OracleModel:
    """Deep frozen detector standing in for the full-size oracle.

    Functionally it encodes the scene truth into output tensors and adds a
    small deterministic perturbation derived from the frame content, so the
    same frame always yields the same tensors and decoding recovers the
    truth almost exactly. Its frozen stage parameters exist to define its
    depth and compute cost.
    """

    OBJ_ON = 2.5    # sigmoid 0.924, comfortably above the 0.5 decode threshold
    OBJ_OFF = -2.5
    CLS_ON = 1.5
    CLS_OFF = -1.5

    # (spatial divisor, in channels, out channels) per stage; more than twice
    # the student's layer count and roughly 3.5x its MACs
    _STAGE_PLAN = ((2, 3, 16), (2, 16, 24), (4, 24, 32), (4, 32, 32), (4, 32, 32),
                   (4, 24, 32), (4, 32, 24), (8, 24, 32), (8, 32, 32), (8, 32, 24),
                   (16, 24, 24), (16, 24, 16))

    def __init__(self, config: ModelConfig | None = None, seed: int = 7,
                 noise_amp: float = 0.01):
        self.config = config or ModelConfig()
        self.seed = seed
        self.noise_amp = noise_amp
        rng = np.random.Generator(np.random.PCG64(seed ^ 0x5EED))
        self.stages = tuple(
            Tensor(rng.normal(0.0, 0.1, (cin, cout)).astype(np.float32))
            for _, cin, cout in self._STAGE_PLAN
        )

    @property
    def layer_count(self) -> int:
        return len(self._STAGE_PLAN)

    def mac_count(self) -> int:
        hw = self.config.input_hw
        return sum((hw // div) ** 2 * cin * cout
                   for div, cin, cout in self._STAGE_PLAN)

    def _preferred_scale(self, w: float, h: float) -> int:
        g0, g1 = self.config.grids[0], self.config.grids[1]
        m = max(w, h)
        if m <= 1.8 / g0:
            return 0
        if m <= 1.8 / g1:
            return 1
        return 2

    def forward(self, frame: Tensor, truth: list[Box]) -> DetectionTensorSet:
        cfg = self.config
        if frame.shape != (cfg.input_hw, cfg.input_hw, 3):
            raise ValueError(
                f"frame shape {frame.shape} != {(cfg.input_hw, cfg.input_hw, 3)}")
        targets = [np.zeros((g, g, cfg.channels), dtype=np.float32) for g in cfg.grids]
        for t in targets:
            t[:, :, CH_OBJ] = self.OBJ_OFF
            t[:, :, BOX_CHANNELS:] = self.CLS_OFF

        occupied: set[tuple[int, int, int]] = set()
        for box in truth:
            if not (0.0 <= box.x <= 1.0 and 0.0 <= box.y <= 1.0
                    and 0.0 < box.w <= 1.0 and 0.0 < box.h <= 1.0):
                raise ValueError(f"truth box out of frame bounds: {box}")
            pref = self._preferred_scale(box.w, box.h)
            placed = False
            for s in sorted(range(3), key=lambda k: abs(k - pref)):
                g = cfg.grids[s]
                c = min(int(box.x * g), g - 1)
                r = min(int(box.y * g), g - 1)
                if (s, r, c) in occupied:
                    continue
                occupied.add((s, r, c))
                cell = targets[s][r, c]
                k = COORD_LOGIT_SCALE
                prior = logit(SIZE_PRIOR)
                cell[CH_TX] = k * logit(float(np.clip(box.x * g - c, 0.02, 0.98)))
                cell[CH_TY] = k * logit(float(np.clip(box.y * g - r, 0.02, 0.98)))
                cell[CH_TW] = k * (logit(float(np.clip(box.w, 0.02, 0.98))) - prior)
                cell[CH_TH] = k * (logit(float(np.clip(box.h, 0.02, 0.98))) - prior)
                cell[CH_OBJ] = self.OBJ_ON
                cell[BOX_CHANNELS + box.class_id] = self.CLS_ON
                placed = True
                break
            if not placed:
                # all three scales collide; presets avoid this, last one wins
                g = cfg.grids[pref]
                c = min(int(box.x * g), g - 1)
                r = min(int(box.y * g), g - 1)
                cell = targets[pref][r, c]
                cell[CH_OBJ] = self.OBJ_ON
                cell[BOX_CHANNELS + box.class_id] = self.CLS_ON

        if self.noise_amp > 0.0:
            mix = zlib.crc32(frame.tobytes()) ^ (self.seed * 0x9E3779B1 & 0xFFFFFFFF)
            nrng = np.random.Generator(np.random.PCG64(mix))
            for t in targets:
                t += nrng.uniform(-self.noise_amp, self.noise_amp,
                                  t.shape).astype(np.float32)
        return DetectionTensorSet(scales=tuple(Tensor(t) for t in targets))


# ---------------------------------------------------------------------------
# DecoderWeights wire codec
# layout: version u64 LE | precision u8 | per block: rank u8, dims u32 LE
# each, payload (f32 or binary16, little-endian)


def encode_weights(w: DecoderWeights) -> bytes:
    out = bytearray()
    out += struct.pack("<QB", w.version, _PRECISION_TAG[w.precision])
    for block in w.blocks:
        out += struct.pack("<B", len(block.shape))
        for d in block.shape:
            out += struct.pack("<I", d)
        if w.precision is Precision.HALF:
            out += f16_encode(block)
        else:
            out += block.tobytes()
    return bytes(out)


def decode_weights(data: bytes) -> DecoderWeights:
    if len(data) < 9:
        raise ValueError("weight blob shorter than its fixed header")
    version, tag = struct.unpack_from("<QB", data, 0)
    if tag not in _TAG_PRECISION:
        raise ValueError(f"unknown precision tag {tag}")
    precision = _TAG_PRECISION[tag]
    offset = 9
    blocks: list[Tensor] = []
    while offset < len(data):
        rank = data[offset]
        offset += 1
        if offset + 4 * rank > len(data):
            raise ValueError("truncated block dims")
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        n = int(np.prod(dims, dtype=np.int64))
        width = 2 if precision is Precision.HALF else 4
        if offset + width * n > len(data):
            raise ValueError("truncated block payload")
        payload = data[offset:offset + width * n]
        offset += width * n
        if precision is Precision.HALF:
            blocks.append(f16_decode(payload, dims))
        else:
            blocks.append(Tensor(np.frombuffer(payload, dtype="<f4").reshape(dims)))
    return DecoderWeights(version=version, blocks=tuple(blocks), precision=precision)
