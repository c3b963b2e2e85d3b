"""Scenario orchestration under virtual time: energy cost model, event loop,
metric aggregation and report emission.

All stage durations come from an operation-count proxy (multiply-accumulate
counts times a per-op virtual time) and configured power draws, so runs are
machine-independent and reproducible. The power/time coefficients are
calibration knobs of this simulator, not measured hardware values.
"""

from __future__ import annotations

import csv
import heapq
import json
import logging
from dataclasses import dataclass, field, replace

from .detection import MetricsReport, compute_metrics, decode_boxes, nms
from .models import (ModelConfig, OracleModel, StudentModel, adapt_decoder,
                     distill_loss, swap_decoder)
from .netproto import (SimulatedChannel, WeightUpdate, decode_message,
                       encode_message, frame_upload_from_tensor, lan_config,
                       wifi_config)
from .runtime import ConfigError, EdgeNode, Mode, ScenarioConfig, TrainJob
from .scenegen import PRESETS, SceneScript, SceneStream
from .selector import KeyFrameSelector

logger = logging.getLogger("edgekt.harness")

SCHEMA_VERSION = 1

ACTIVITIES = ("Decode", "Inference", "NMS", "TrainLocal", "OracleLocal",
              "Transmit", "Receive", "Idle")

DEFAULT_POWER_W = {
    "Idle": 1.0,
    "Decode": 1.5,
    "Inference": 4.0,
    "NMS": 2.0,
    "OracleLocal": 8.0,
    "TrainLocal": 8.0,
    "Transmit": 2.5,
    "Receive": 2.5,
}


@dataclass(frozen=True)
class CostModel:
    """Virtual-time/power coefficients for the user-end device.

    These are calibration knobs chosen so the qualitative behavior of the
    scenarios is reproducible on any machine; they are not measurements.
    """

    power_w: dict = field(default_factory=lambda: dict(DEFAULT_POWER_W))
    op_seconds: float = 1.8e-7         # seconds per multiply-accumulate
    decode_seconds_per_value: float = 1.6e-6
    nms_seconds_per_candidate: float = 7e-5
    swap_seconds_per_byte: float = 5e-7
    train_contention: float = 0.35     # inference slowdown while training locally
    radio_contention: float = 0.2      # inference seconds added per radio-active second

    def decode_seconds(self, n_values: int) -> float:
        return n_values * self.decode_seconds_per_value

    def nms_seconds(self, n_candidates: int) -> float:
        return n_candidates * self.nms_seconds_per_candidate

    def swap_seconds(self, n_bytes: int) -> float:
        return n_bytes * self.swap_seconds_per_byte


class EnergyLedger:
    """Per-activity time-times-power accumulation."""

    def __init__(self, power_w: dict | None = None):
        self.power_w = dict(power_w or DEFAULT_POWER_W)
        self.entries: list[tuple[str, float, float]] = []
        self.seconds: dict[str, float] = {a: 0.0 for a in ACTIVITIES}
        self.joules: dict[str, float] = {a: 0.0 for a in ACTIVITIES}

    def charge(self, activity: str, duration_s: float) -> None:
        if activity not in self.power_w:
            raise ValueError(f"unknown activity {activity!r}")
        if duration_s < 0:
            raise ValueError("duration must be >= 0")
        power = self.power_w[activity]
        self.entries.append((activity, duration_s, power))
        self.seconds[activity] += duration_s
        self.joules[activity] += duration_s * power

    @property
    def total_joules(self) -> float:
        return sum(self.joules.values())

    @property
    def total_active_seconds(self) -> float:
        return sum(s for a, s in self.seconds.items() if a != "Idle")


def energy_charge(ledger: EnergyLedger, activity: str, duration_s: float) -> EnergyLedger:
    """Functional-style wrapper around :meth:`EnergyLedger.charge`."""
    ledger.charge(activity, duration_s)
    return ledger


# ---------------------------------------------------------------------------
# Run report


@dataclass
class RunReport:
    schema_version: int
    scenario: str
    config: dict
    frame_count: int
    aggregate: MetricsReport
    mean_inference_s: float
    mean_training_s: float
    total_joules: float
    energy_per_frame_j: float
    overall_score: float
    wall_time_s: float
    key_frame_indices: list[int]
    f1_trace: list[float]
    inference_trace: list[float]
    candidate_trace: list[int]
    version_trace: list[int]
    energy_by_activity: dict
    swap_log: list[dict]

    def to_dict(self) -> dict:
        d = {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "config": self.config,
            "frame_count": self.frame_count,
            "aggregate": {
                "true_positives": self.aggregate.true_positives,
                "false_positives": self.aggregate.false_positives,
                "false_negatives": self.aggregate.false_negatives,
                "precision": self.aggregate.precision,
                "recall": self.aggregate.recall,
                "f1": self.aggregate.f1,
                "overall_score": self.aggregate.overall_score,
            },
            "mean_inference_s": self.mean_inference_s,
            "mean_training_s": self.mean_training_s,
            "total_joules": self.total_joules,
            "energy_per_frame_j": self.energy_per_frame_j,
            "overall_score": self.overall_score,
            "wall_time_s": self.wall_time_s,
            "key_frame_indices": self.key_frame_indices,
            "f1_trace": self.f1_trace,
            "inference_trace": self.inference_trace,
            "candidate_trace": self.candidate_trace,
            "version_trace": self.version_trace,
            "energy_by_activity": self.energy_by_activity,
            "swap_log": self.swap_log,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        agg = d["aggregate"]
        report = cls(
            schema_version=d["schema_version"],
            scenario=d["scenario"],
            config=d["config"],
            frame_count=d["frame_count"],
            aggregate=MetricsReport(
                true_positives=agg["true_positives"],
                false_positives=agg["false_positives"],
                false_negatives=agg["false_negatives"],
                precision=agg["precision"],
                recall=agg["recall"],
                f1=agg["f1"],
                overall_score=agg["overall_score"],
            ),
            mean_inference_s=d["mean_inference_s"],
            mean_training_s=d["mean_training_s"],
            total_joules=d["total_joules"],
            energy_per_frame_j=d["energy_per_frame_j"],
            overall_score=d["overall_score"],
            wall_time_s=d["wall_time_s"],
            key_frame_indices=list(d["key_frame_indices"]),
            f1_trace=list(d["f1_trace"]),
            inference_trace=list(d["inference_trace"]),
            candidate_trace=list(d["candidate_trace"]),
            version_trace=list(d["version_trace"]),
            energy_by_activity=d["energy_by_activity"],
            swap_log=list(d["swap_log"]),
        )
        return report

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def emit_report(report: RunReport, fmt: str = "json", path: str | None = None) -> str:
    """Serialize a report; ``json`` is the full report with stable key order,
    ``csv`` is the per-frame trace (one row per frame plus a header)."""
    if fmt == "json":
        text = report.to_json() + "\n"
    elif fmt == "csv":
        lines = ["frame,f1,inference_s,candidates,weight_version,key_frame"]
        keys = set(report.key_frame_indices)
        for i in range(report.frame_count):
            lines.append(
                f"{i},{report.f1_trace[i]!r},{report.inference_trace[i]!r},"
                f"{report.candidate_trace[i]},{report.version_trace[i]},"
                f"{1 if i in keys else 0}"
            )
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    return text


def parse_report(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Scenario runner (the harness owns the virtual clock)

_FRAME, _LOCAL_DONE, _EDGE_RECV, _USER_RECV = 0, 1, 2, 3


def run_scenario(config: ScenarioConfig, script: SceneScript,
                 cost: CostModel | None = None, scenario_name: str | None = None) -> RunReport:
    """Drive the full pipeline over the stream under virtual time.

    Ground truth for the metrics is the oracle's decoded output for every
    frame (the deep model plays ground truth); the scene generator's truth
    only feeds the oracle encoder. Deterministic given the config seeds.
    """
    cost = cost or CostModel()
    model_cfg = config.model or ModelConfig(input_hw=script.size)
    if model_cfg.input_hw != script.size:
        raise ConfigError("model input size does not match the stream size")
    student = StudentModel.pretrained(model_cfg, seed=config.model_seed)
    oracle = OracleModel(model_cfg, seed=config.model_seed)
    selector = KeyFrameSelector(replace(config.selector, seed=config.seed * 31 + 1))
    stream = SceneStream(script)
    ledger = EnergyLedger(cost.power_w)

    up = down = None
    edge = None
    if config.channel is not None:
        up = SimulatedChannel(config.channel, direction=0)
        down = SimulatedChannel(config.channel, direction=1)
    if config.trains:
        edge = EdgeNode(oracle, student.clone(), stream.truth_at,
                        config.adapt_steps, config.adapt_lr)

    period = 1.0 / script.fps
    n_frames = script.duration_frames

    events: list[tuple[float, int, int, object]] = []
    seq = 0
    for i in range(n_frames):
        heapq.heappush(events, (i * period, seq, _FRAME, i))
        seq += 1

    # mutable loop state
    prev_done = 0.0
    in_flight: TrainJob | None = None
    local_window: tuple[float, float] | None = None
    pending_swap_s = 0.0
    radio_accum_s = 0.0
    wall = 0.0

    f1_trace: list[float] = []
    inference_trace: list[float] = []
    candidate_trace: list[int] = []
    version_trace: list[int] = []
    key_frames: list[int] = []
    training_times: list[float] = []
    swap_log: list[dict] = []
    agg_tp = agg_fp = agg_fn = 0

    student_macs = student.mac_count()
    oracle_macs = oracle.mac_count()
    train_macs = (student.train_overhead_mac_count()
                  + config.adapt_steps * student.train_step_mac_count())

    def dispatch_local(frame_id: int, frame, now: float):
        nonlocal in_flight, local_window, seq
        oracle_s = oracle_macs * cost.op_seconds
        train_s = train_macs * cost.op_seconds
        job = TrainJob(frame_id, "local", now, (now, now + oracle_s + train_s))
        local_window = job.compute_window
        in_flight = job
        heapq.heappush(events, (now + oracle_s + train_s, seq, _LOCAL_DONE, (job, frame)))
        seq += 1

    def dispatch_network(frame_id: int, frame, now: float):
        nonlocal in_flight, radio_accum_s, seq
        upload = frame_upload_from_tensor(frame_id, frame, config.precision)
        res = up.transmit(upload, now)
        ledger.charge("Transmit", res.serialize_s)
        radio_accum_s += res.serialize_s
        job = TrainJob(frame_id, "network", now)
        in_flight = job
        heapq.heappush(events, (res.delivery_time, seq, _EDGE_RECV,
                                (encode_message(upload), job)))
        seq += 1

    loss_scale = (sum(g * g * model_cfg.channels for g in model_cfg.grids)
                  if config.normalize_selector_loss else 1)

    def finish_job(loss: float | None):
        nonlocal in_flight, local_window
        if config.kfs_enabled:
            selector.complete(None if loss is None else loss / loss_scale)
        in_flight = None
        local_window = None

    while events:
        t, _, kind, payload = heapq.heappop(events)
        wall = max(wall, t)

        if kind == _FRAME:
            i = payload
            frame = stream.frame_at(i)
            truth = stream.truth_at(i)
            start = max(t, prev_done)

            decode_s = cost.decode_seconds(frame.size)
            ledger.charge("Decode", decode_s)

            # evaluation oracle run; never charged (the deep model's decoded
            # output is the metric ground truth)
            oracle_out = oracle.forward(frame, truth)
            gt_boxes = nms(decode_boxes(oracle_out, config.obj_threshold), config.nms_iou)

            if config.mode is Mode.DEEP_ONLY:
                serve_out = oracle_out
                infer_s = oracle_macs * cost.op_seconds
                infer_activity = "OracleLocal"
            else:
                serve_out = student.forward(frame)
                infer_s = student_macs * cost.op_seconds
                if local_window is not None and local_window[0] <= start < local_window[1]:
                    infer_s *= 1.0 + cost.train_contention
                infer_activity = "Inference"
            infer_s += pending_swap_s + cost.radio_contention * radio_accum_s
            pending_swap_s = 0.0
            radio_accum_s = 0.0
            ledger.charge(infer_activity, infer_s)

            candidates = decode_boxes(serve_out, config.obj_threshold)
            detections = nms(candidates, config.nms_iou)
            nms_s = cost.nms_seconds(len(candidates))
            ledger.charge("NMS", nms_s)

            m = compute_metrics(detections, gt_boxes)
            agg_tp += m.true_positives
            agg_fp += m.false_positives
            agg_fn += m.false_negatives
            f1_trace.append(m.f1)
            inference_trace.append(infer_s)
            candidate_trace.append(len(candidates))
            version_trace.append(serve_out.version)

            done = start + decode_s + infer_s + nms_s
            prev_done = done
            wall = max(wall, done)

            if config.trains:
                if config.kfs_enabled:
                    selected = selector.select_key_frame(frame)
                else:
                    selected = in_flight is None
                if selected:
                    if in_flight is not None:
                        raise RuntimeError("busy gate violated: overlapping jobs")
                    key_frames.append(i)
                    kind_choice = config.mode
                    if config.mode is Mode.HYBRID:
                        est_local = (oracle_macs + train_macs) * cost.op_seconds
                        edge_s = (oracle_macs + train_macs) \
                            * cost.op_seconds / config.edge_speed
                        bw = config.channel.bandwidth_bps
                        est_net = (2 * config.channel.base_latency_s + edge_s
                                   + (frame.size * 4 + 40) * 8.0 / bw)
                        kind_choice = Mode.NETWORK if est_net < est_local else Mode.LOCAL
                    if kind_choice is Mode.LOCAL:
                        dispatch_local(i, frame, done)
                    else:
                        dispatch_network(i, frame, done)

        elif kind == _LOCAL_DONE:
            job, frame = payload
            truth = stream.truth_at(job.frame_id)
            oracle_out = oracle.forward(frame, truth)
            oracle_s = oracle_macs * cost.op_seconds
            train_s = train_macs * cost.op_seconds
            ledger.charge("OracleLocal", oracle_s)
            ledger.charge("TrainLocal", train_s)
            try:
                pre_loss = distill_loss(student.forward(frame), oracle_out)
                weights, _ = adapt_decoder(student, frame, oracle_out,
                                           steps=config.adapt_steps, lr=config.adapt_lr)
            except ValueError:
                logger.warning("local training job failed on frame %d", job.frame_id)
                finish_job(None)
                continue
            new_student = swap_decoder(student, weights)
            if new_student is not student:
                student = new_student
                blob = encode_message(WeightUpdate(job.frame_id, weights, pre_loss))
                pending_swap_s += cost.swap_seconds(len(blob) - 21)
                swap_log.append({"frame_id": job.frame_id, "version": student.version,
                                 "checksum": student.adaptive_checksum()})
            training_times.append(t - job.dispatched_at)
            finish_job(pre_loss)

        elif kind == _EDGE_RECV:
            data, job = payload
            reply_bytes = edge.serve(data)
            reply = decode_message(reply_bytes)
            edge_s = (oracle_macs + train_macs) \
                * cost.op_seconds / config.edge_speed
            res = down.transmit(reply, t + edge_s)
            heapq.heappush(events, (res.delivery_time, seq, _USER_RECV,
                                    (reply_bytes, res.serialize_s, job)))
            seq += 1

        else:  # _USER_RECV
            data, serialize_s, job = payload
            ledger.charge("Receive", serialize_s)
            radio_accum_s += serialize_s
            m = decode_message(data)
            if isinstance(m, WeightUpdate):
                new_student = swap_decoder(student, m.weights)
                if new_student is student:
                    # stale version: drop and re-sync the clone next round trip
                    logger.warning("stale weight update v%d dropped", m.weights.version)
                    edge.sync_clone(student)
                else:
                    student = new_student
                    pending_swap_s += cost.swap_seconds(len(data) - 21)
                    swap_log.append({"frame_id": job.frame_id, "version": student.version,
                                     "checksum": student.adaptive_checksum()})
                training_times.append(t - job.dispatched_at)
                finish_job(m.loss)
            else:
                logger.warning("edge job failed for frame %d", job.frame_id)
                finish_job(None)

    idle_s = max(0.0, wall - ledger.total_active_seconds)
    ledger.charge("Idle", idle_s)

    aggregate = MetricsReport.from_counts(agg_tp, agg_fp, agg_fn)
    total_j = ledger.total_joules
    energy_per_frame = total_j / n_frames
    score = aggregate.f1 / energy_per_frame if energy_per_frame > 0 else 0.0
    aggregate.overall_score = score

    cfg_echo = {
        "mode": config.mode.value,
        "precision": config.precision.value,
        "kfs": config.kfs_enabled,
        "seed": config.seed,
        "adapt_steps": config.adapt_steps,
        "adapt_lr": config.adapt_lr,
        "stream": script.name,
        "stream_seed": script.seed,
        "channel": None if config.channel is None else {
            "bandwidth_bps": config.channel.bandwidth_bps,
            "base_latency_s": config.channel.base_latency_s,
            "jitter_median_s": None if config.channel.jitter is None
            else config.channel.jitter.median_s,
        },
    }
    return RunReport(
        schema_version=SCHEMA_VERSION,
        scenario=scenario_name or config.mode.value,
        config=cfg_echo,
        frame_count=n_frames,
        aggregate=aggregate,
        mean_inference_s=sum(inference_trace) / n_frames,
        mean_training_s=(sum(training_times) / len(training_times)
                         if training_times else 0.0),
        total_joules=total_j,
        energy_per_frame_j=energy_per_frame,
        overall_score=score,
        wall_time_s=wall,
        key_frame_indices=key_frames,
        f1_trace=f1_trace,
        inference_trace=inference_trace,
        candidate_trace=candidate_trace,
        version_trace=version_trace,
        energy_by_activity={a: {"seconds": ledger.seconds[a], "joules": ledger.joules[a]}
                            for a in ACTIVITIES},
        swap_log=swap_log,
    )


# ---------------------------------------------------------------------------
# Named scenarios and the comparison table

SCENARIO_NAMES = ("shallow", "deep", "lt", "nt-lan", "nt-wifi")


def scenario_config(name: str, seed: int = 0, precision: str = "full",
                    kfs: bool = True, **overrides) -> ScenarioConfig:
    """Build the config for one of the five named scenarios."""
    if name not in SCENARIO_NAMES:
        raise ConfigError(f"unknown scenario {name!r} (expected one of {SCENARIO_NAMES})")
    channel = None
    if name == "nt-lan":
        channel = lan_config(seed * 31 + 2)
    elif name == "nt-wifi":
        channel = wifi_config(seed * 31 + 2)
    mode = {
        "shallow": Mode.NO_TRAINING,
        "deep": Mode.DEEP_ONLY,
        "lt": Mode.LOCAL,
        "nt-lan": Mode.NETWORK,
        "nt-wifi": Mode.NETWORK,
    }[name]
    return ScenarioConfig(mode=mode, channel=channel, precision=precision,
                          kfs_enabled=kfs, seed=seed, **overrides)


def run_named_scenario(name: str, script: SceneScript, seed: int = 0,
                       precision: str = "full", kfs: bool = True,
                       cost: CostModel | None = None, **overrides) -> RunReport:
    cfg = scenario_config(name, seed=seed, precision=precision, kfs=kfs, **overrides)
    return run_scenario(cfg, script, cost=cost, scenario_name=name)


def compare(script: SceneScript | None = None, seed: int = 0,
            out_path: str | None = None, cost: CostModel | None = None) -> dict:
    """Run the five named scenarios (full precision, KFS on) and tabulate
    energy, inference time, F1 and overall score per scenario."""
    from .scenegen import fixed_cam_default
    script = script or fixed_cam_default()
    reports = {}
    for name in SCENARIO_NAMES:
        logger.info("running scenario %s", name)
        reports[name] = run_named_scenario(name, script, seed=seed)
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["scenario", "energy_per_frame_j", "mean_inference_s",
                             "f1", "overall_score"])
            for name in SCENARIO_NAMES:
                r = reports[name]
                writer.writerow([name, repr(r.energy_per_frame_j),
                                 repr(r.mean_inference_s), repr(r.aggregate.f1),
                                 repr(r.overall_score)])
    return reports


def resolve_stream(spec: str) -> SceneScript:
    """A preset name or a path to a scene-script JSON file."""
    if spec in PRESETS:
        return PRESETS[spec]()
    try:
        return SceneScript.load(spec)
    except FileNotFoundError as exc:
        raise ConfigError(f"stream {spec!r} is neither a preset nor a readable file") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid scene script {spec!r}: {exc}") from exc
