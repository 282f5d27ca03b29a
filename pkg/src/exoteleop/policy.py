"""Non-parametric policy runtime.

The desk-scale learner is a weighted k-nearest-neighbor lookup over
demonstration frames, executed with action chunking and exponential temporal
ensembling.  Two-stage dataset assembly mirrors the pretrain/finetune split:
in-the-wild demonstrations populate the database first, teleoperated
demonstrations are added with a domain weight multiplier on their neighbor
weights, standing in for fine-tuning emphasis.

Features are z-normalized joint positions plus gripper widths by default;
image featurizers can be registered as extensions.  Search is an exhaustive
scan: databases here are a few thousand entries, correctness beats indexing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .clock import VirtualClock
from .control_loop import LoopConfig, LoopStats, TickEvent, new_session_id, tick_times
from .errors import ConfigurationError, InvalidInputError, InvalidStateError, SchemaError
from .recorder import DOMAIN_TELEOP, DOMAIN_WILD, Demonstration, DemoRecorder, resample
from .simulator import Command

DEFAULT_CHUNK = 20
DEFAULT_ENSEMBLE_K = 0.01
DEFAULT_DOMAIN_WEIGHT = 3.0
WEIGHT_EPSILON = 1e-8
STD_FLOOR = 1e-8

DOMAIN_TAG_WILD = 0
DOMAIN_TAG_TELEOP = 1

FEATURIZERS: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {}


def register_featurizer(name: str, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> None:
    """Register a raw featurizer: (joint_pos_14, widths) -> feature vector."""
    FEATURIZERS[name] = fn


def _joint_gripper_featurizer(joint_pos: np.ndarray, widths: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(joint_pos, dtype=np.float64), np.asarray(widths)])


register_featurizer("joint_gripper", _joint_gripper_featurizer)


def featurize(joint_pos: np.ndarray, widths: np.ndarray, featurizer: str = "joint_gripper") -> np.ndarray:
    """Raw (un-normalized) feature vector for one frame or live state."""
    if featurizer not in FEATURIZERS:
        raise ConfigurationError(f"unknown featurizer {featurizer!r}")
    return FEATURIZERS[featurizer](joint_pos, widths)


@dataclass
class DatasetAssembly:
    """Two-stage dataset: in-the-wild pretrain set plus teleoperated finetune set."""

    pretrain: List[Demonstration] = field(default_factory=list)
    finetune: List[Demonstration] = field(default_factory=list)
    domain_weight: float = DEFAULT_DOMAIN_WEIGHT

    def __post_init__(self):
        for demo in self.pretrain:
            if demo.domain != DOMAIN_WILD:
                raise SchemaError(f"pretrain demo {demo.id} has domain {demo.domain!r}")
        for demo in self.finetune:
            if demo.domain != DOMAIN_TELEOP:
                raise SchemaError(f"finetune demo {demo.id} has domain {demo.domain!r}")


@dataclass
class NeighborDatabase:
    """Flat store of (feature, action chunk) entries from every demo frame."""

    features: np.ndarray  # (n, d) z-normalized
    chunks: np.ndarray  # (n, H, a)
    domains: np.ndarray  # (n,) DOMAIN_TAG_*
    demo_ids: List[str]
    frame_index: np.ndarray  # (n,)
    padded: np.ndarray  # (n,) bool: chunk tail repeats the final action
    mean: np.ndarray
    std: np.ndarray
    chunk_horizon: int
    target_hz: float
    featurizer: str = "joint_gripper"

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def action_dim(self) -> int:
        return self.chunks.shape[2]

    def __len__(self) -> int:
        return self.features.shape[0]

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=np.float64) - self.mean) / self.std


def build_database(
    assembly: DatasetAssembly,
    featurizer: str = "joint_gripper",
    target_hz: float = 5.0,
    chunk_horizon: int = DEFAULT_CHUNK,
) -> NeighborDatabase:
    """Resample every demonstration to the target rate and index every frame.

    Entry ``j`` of a demo pairs the frame-``j`` state feature with the next
    ``chunk_horizon`` actions (frames j+1 ...); tails are padded by repeating
    the final action with the pad flag set.  Pretrain entries come first so
    that exact-distance ties resolve toward the in-the-wild set.
    """
    demos = list(assembly.pretrain) + list(assembly.finetune)
    if not demos:
        raise ConfigurationError("dataset assembly is empty")
    if chunk_horizon < 1:
        raise InvalidInputError(f"chunk horizon must be >= 1, got {chunk_horizon}")
    feats: List[np.ndarray] = []
    chunks: List[np.ndarray] = []
    domains: List[int] = []
    demo_ids: List[str] = []
    frame_index: List[int] = []
    padded: List[bool] = []
    feature_dim = None
    for demo in demos:
        rs = resample(demo, target_hz)
        actions = rs.actions()
        widths = rs.gripper_widths()
        n = len(rs)
        tag = DOMAIN_TAG_WILD if demo.domain == DOMAIN_WILD else DOMAIN_TAG_TELEOP
        for j in range(n):
            raw = featurize(rs.joint_pos[j], widths[j], featurizer)
            if feature_dim is None:
                feature_dim = raw.shape[0]
            elif raw.shape[0] != feature_dim:
                raise SchemaError(
                    f"feature dim mismatch: {raw.shape[0]} != {feature_dim} (demo {demo.id})"
                )
            feats.append(raw)
            start = j + 1
            take = actions[start : start + chunk_horizon]
            pad = chunk_horizon - len(take)
            if pad > 0:
                tail = np.repeat(actions[-1][None, :], pad, axis=0)
                take = np.concatenate([take, tail]) if len(take) else tail
            chunks.append(take)
            domains.append(tag)
            demo_ids.append(demo.id)
            frame_index.append(j)
            padded.append(pad > 0)
    features = np.stack(feats)
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std < STD_FLOOR, STD_FLOOR, std)
    features = (features - mean) / std
    return NeighborDatabase(
        features=features,
        chunks=np.stack(chunks),
        domains=np.asarray(domains, dtype=np.uint8),
        demo_ids=demo_ids,
        frame_index=np.asarray(frame_index, dtype=np.int64),
        padded=np.asarray(padded, dtype=bool),
        mean=mean,
        std=std,
        chunk_horizon=chunk_horizon,
        target_hz=target_hz,
        featurizer=featurizer,
    )


def knn_weighted_chunk(
    features: np.ndarray,
    chunks: np.ndarray,
    domains: np.ndarray,
    query: np.ndarray,
    k: int,
    domain_weight: float = 1.0,
    eps: float = WEIGHT_EPSILON,
) -> np.ndarray:
    """Inverse-distance weighted average chunk of the k nearest entries.

    Neighbors are the k smallest Euclidean distances, ties broken by lowest
    entry index; weights are m / (d + eps) with m = domain_weight for
    teleoperated entries and 1 otherwise, normalized to sum one.
    """
    n = features.shape[0]
    if n == 0:
        raise InvalidStateError("empty neighbor database")
    if not 1 <= k <= n:
        raise InvalidInputError(f"k={k} outside [1, {n}]")
    dist = np.linalg.norm(features - query[None, :], axis=1)
    order = np.lexsort((np.arange(n), dist))[:k]
    # Sequential accumulation in neighbor order keeps the fusion reproducible
    # against a plain exhaustive-scan reference, bit for bit.
    weights = [
        (domain_weight if domains[i] == DOMAIN_TAG_TELEOP else 1.0) / (float(dist[i]) + eps)
        for i in order
    ]
    total = 0.0
    for w in weights:
        total += w
    fused = np.zeros_like(chunks[order[0]], dtype=np.float64)
    for w, i in zip(weights, order):
        fused += (w / total) * chunks[i]
    return fused


def knn_predict(
    db: NeighborDatabase,
    query_raw: np.ndarray,
    k: int,
    domain_weight: Optional[float] = None,
) -> np.ndarray:
    """Predict an action chunk for a raw (un-normalized) query feature."""
    dw = DEFAULT_DOMAIN_WEIGHT if domain_weight is None else domain_weight
    return knn_weighted_chunk(
        db.features, db.chunks, db.domains, db.normalize(query_raw), k, dw
    )


class EnsembleBuffer:
    """Exponential temporal ensembling over overlapping action chunks.

    Chunk age i (0 = newest) weighs exp(-k_ens * i); each buffered chunk
    contributes its element at index == age, i.e. its prediction for the
    current step.  Chunks are evicted once their age reaches the horizon.
    """

    def __init__(self, k_ens: float = DEFAULT_ENSEMBLE_K, horizon: int = DEFAULT_CHUNK):
        if horizon < 1:
            raise InvalidInputError(f"horizon must be >= 1, got {horizon}")
        self.k_ens = float(k_ens)
        self.horizon = int(horizon)
        self._chunks: List[Tuple[int, np.ndarray]] = []  # (age, chunk)

    @property
    def ages(self) -> List[int]:
        return [age for age, _ in self._chunks]

    def step(self, new_chunk: Optional[np.ndarray]) -> np.ndarray:
        """Fuse predictions for the current step, then advance ages."""
        if new_chunk is not None:
            chunk = np.asarray(new_chunk, dtype=np.float64)
            if chunk.shape[0] != self.horizon:
                raise SchemaError(f"chunk length {chunk.shape[0]} != horizon {self.horizon}")
            self._chunks.append((0, chunk))
        if not self._chunks:
            raise InvalidStateError("ensemble buffer is empty and no chunk was supplied")
        weights = np.array([math.exp(-self.k_ens * age) for age, _ in self._chunks])
        actions = np.stack([chunk[age] for age, chunk in self._chunks])
        fused = (weights[:, None] * actions).sum(axis=0) / weights.sum()
        self._chunks = [
            (age + 1, chunk) for age, chunk in self._chunks if age + 1 < self.horizon
        ]
        return fused


def ensemble_step(buf: EnsembleBuffer, new_chunk: Optional[np.ndarray]) -> np.ndarray:
    return buf.step(new_chunk)


@dataclass
class PolicyRunResult:
    episode: Optional[Demonstration]
    stats: LoopStats
    final_state: object
    policy_steps: int
    aborted: bool = False


def run_policy(
    db: NeighborDatabase,
    backend,
    cfg: LoopConfig,
    k: int,
    duration_s: float,
    model,
    domain_weight: Optional[float] = None,
    action_period: int = 1,
    k_ens: float = DEFAULT_ENSEMBLE_K,
    clock=None,
    record: bool = True,
    task_id: str = "",
    world: Optional[dict] = None,
) -> PolicyRunResult:
    """Closed-loop policy execution against a (reset) backend.

    Each control tick featurizes the live state; every ``action_period``-th
    tick queries the database for a fresh chunk, and the ensemble buffer
    fuses the overlapping predictions into the commanded action.  The episode
    record is a robot-domain demonstration tagged as policy-generated.
    """
    if len(db) == 0:
        raise InvalidStateError("refusing to run policy on an empty database")
    if action_period < 1:
        raise InvalidInputError(f"action_period must be >= 1, got {action_period}")
    clock = clock if clock is not None else VirtualClock()
    dw = DEFAULT_DOMAIN_WEIGHT if domain_weight is None else domain_weight
    # The database's action layout fixes how many grippers the policy drives.
    n_grippers = db.action_dim - 14
    rec = None
    if record:
        rec = DemoRecorder(
            model=model,
            domain=DOMAIN_TELEOP,
            task_id=task_id,
            calibration_ref="",
            world=world or {},
            n_grippers=n_grippers,
            metadata={"policy_generated": "true", "k": str(k), "domain_weight": str(dw)},
            demo_id=new_session_id("episode"),
        )
    buf = EnsembleBuffer(k_ens=k_ens, horizon=db.chunk_horizon)
    stats = LoopStats()
    start_ns = clock.now_ns()
    period_s = 1.0 / cfg.control_rate_hz
    state = backend.snapshot()
    policy_steps = 0
    aborted = False

    for tick, session_t in tick_times(cfg.control_rate_hz, duration_s):
        clock.sleep_until(start_ns + session_t)
        widths_obs = state.widths[:n_grippers] if n_grippers else np.zeros(0)
        query = featurize(state.q.reshape(14), widths_obs, db.featurizer)
        new_chunk = None
        if tick % action_period == 0:
            new_chunk = knn_predict(db, query, k, dw)
            policy_steps += 1
        action = buf.step(new_chunk)
        joints = action[:14].reshape(2, 7)
        widths = state.widths.copy()
        for g in range(n_grippers):
            widths[g] = action[14 + g]
        command = backend.clamp_command(Command(joints=joints, widths=widths))
        try:
            state = backend.step(command, period_s)
        except Exception as exc:
            stats.aborted = True
            stats.abort_reason = f"backend: {exc}"
            aborted = True
            break
        stats.ticks_executed += 1
        stats.commanded_ticks += 1
        if rec is not None:
            rec.on_tick(
                TickEvent(
                    index=tick,
                    session_t_ns=session_t,
                    frame=None,
                    fresh=True,
                    mapped=None,
                    command=command,
                    state=state,
                )
            )

    episode = None
    if rec is not None and len(rec._rows) >= 2:
        rec.metadata["aborted"] = str(aborted).lower()
        episode = rec.finish()
    return PolicyRunResult(
        episode=episode,
        stats=stats,
        final_state=state,
        policy_steps=policy_steps,
        aborted=aborted,
    )


# ---------------------------------------------------------------------------
# Database persistence (.npz)
# ---------------------------------------------------------------------------

def save_database(db: NeighborDatabase, path) -> None:
    np.savez_compressed(
        path,
        features=db.features,
        chunks=db.chunks,
        domains=db.domains,
        demo_ids=np.array(db.demo_ids),
        frame_index=db.frame_index,
        padded=db.padded,
        mean=db.mean,
        std=db.std,
        chunk_horizon=np.int64(db.chunk_horizon),
        target_hz=np.float64(db.target_hz),
        featurizer=np.array(db.featurizer),
    )


def load_database(path) -> NeighborDatabase:
    data = np.load(path, allow_pickle=False)
    return NeighborDatabase(
        features=data["features"],
        chunks=data["chunks"],
        domains=data["domains"],
        demo_ids=[str(s) for s in data["demo_ids"]],
        frame_index=data["frame_index"],
        padded=data["padded"],
        mean=data["mean"],
        std=data["std"],
        chunk_horizon=int(data["chunk_horizon"]),
        target_hz=float(data["target_hz"]),
        featurizer=str(data["featurizer"]),
    )
