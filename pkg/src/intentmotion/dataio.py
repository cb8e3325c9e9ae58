"""Handover samples: schema, synthetic generation, augmentation, splits and files.

Frames are ``(T, 27)`` float64 arrays: 9 upper-body joints x (x, y, z) in
meters, world frame with the robot base at the origin, ``z`` up, and the
human approaching along ``-x``.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, ParseError, SchemaError, SplitError

INPUT_LEN = 50
TARGET_LEN = 10
FRAME_RATE = 10.0
DATASET_SCHEMA = "intentmotion-dataset"
MOTION_SCHEMA = "intentmotion-motion"
SCHEMA_VERSION = 1

COLLABORATIVE = 0
NON_COLLABORATIVE = 1


@dataclass(frozen=True)
class JointLayout:
    names: tuple = (
        "torso", "neck", "head",
        "left_shoulder", "left_elbow", "left_hand",
        "right_shoulder", "right_elbow", "right_hand",
    )
    right_hand: int = 8

    def __post_init__(self):
        if len(self.names) != 9 or len(set(self.names)) != 9:
            raise SchemaError("joint layout must list 9 unique joints", field="names")
        if not 0 <= self.right_hand < 9:
            raise SchemaError("right-hand index out of range", field="right_hand")

    @property
    def num_joints(self):
        return len(self.names)

    @property
    def channels(self):
        return 3 * len(self.names)

    @property
    def right_hand_slice(self):
        return slice(3 * self.right_hand, 3 * self.right_hand + 3)


LAYOUT = JointLayout()


@dataclass
class MotionSequence:
    frames: np.ndarray
    frame_rate: float = FRAME_RATE
    layout: JointLayout = LAYOUT

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.layout.channels:
            raise SchemaError(f"frames must be (T, {self.layout.channels}), got {self.frames.shape}",
                              field="frames")
        if not np.all(np.isfinite(self.frames)):
            raise SchemaError("frames contain non-finite values", field="frames")
        if not self.frame_rate > 0:
            raise SchemaError("frame rate must be positive", field="frame_rate")

    def __len__(self):
        return self.frames.shape[0]


@dataclass(eq=False)
class HandoverSample:
    id: str
    subject: str
    intention: int
    input: np.ndarray
    target: np.ndarray
    ree: np.ndarray
    scenario: str = ""
    frame_rate: float = FRAME_RATE

    def __post_init__(self):
        self.input = np.asarray(self.input, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.float64)
        self.ree = np.asarray(self.ree, dtype=np.float64)
        self.validate()

    def validate(self):
        c = LAYOUT.channels
        if self.input.ndim != 2 or self.input.shape[0] != INPUT_LEN:
            raise SchemaError(f"input length: expected {INPUT_LEN} frames, got "
                              f"{self.input.shape[0] if self.input.ndim else 0}", field="input")
        if self.input.shape[1] != c:
            raise SchemaError(f"input width: expected {c} channels", field="input")
        if self.target.ndim != 2 or self.target.shape[0] != TARGET_LEN:
            raise SchemaError(f"target length: expected {TARGET_LEN} frames", field="target")
        if self.target.shape[1] != c:
            raise SchemaError(f"target width: expected {c} channels", field="target")
        if self.ree.shape != (TARGET_LEN, 3):
            raise SchemaError(f"ree: expected ({TARGET_LEN}, 3), got {self.ree.shape}", field="ree")
        if self.intention not in (0, 1):
            raise SchemaError(f"intention must be 0 or 1, got {self.intention!r}", field="intention")
        for name in ("input", "target", "ree"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise SchemaError(f"{name} contains non-finite values", field=name)
        if not self.frame_rate > 0:
            raise SchemaError("frame rate must be positive", field="frame_rate")

    @property
    def sequence(self):
        """Input and target stacked into the full 60-frame window."""
        return np.concatenate([self.input, self.target], axis=0)

    @property
    def ree_final(self):
        return self.ree[-1]

    def __eq__(self, other):
        if not isinstance(other, HandoverSample):
            return NotImplemented
        return (
            self.id == other.id and self.subject == other.subject
            and self.intention == other.intention and self.scenario == other.scenario
            and self.frame_rate == other.frame_rate
            and np.array_equal(self.input, other.input)
            and np.array_equal(self.target, other.target)
            and np.array_equal(self.ree, other.ree)
        )


# --------------------------------------------------------------------------- generator

OBSTACLE_TAGS = ("none", "one", "three")


@dataclass
class GeneratorConfig:
    subjects: int = 10
    samples_per_subject: int = 20
    collab_fraction: float = 0.75
    noise_std_m: float = 0.01
    seed: int = 0
    obstacle_tag: str = "mixed"
    # frame (within the 60-frame window) where the two behaviours part ways;
    # 50 makes the observed window uninformative about the label
    divergence_frame: int = 40
    ree: tuple = (0.45, 0.0, 1.05)
    start_distance_m: float = 6.0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if int(self.subjects) < 1:
            raise ConfigError("subjects must be >= 1", field="subjects")
        if int(self.samples_per_subject) < 1:
            raise ConfigError("samples_per_subject must be >= 1", field="samples_per_subject")
        if not 0.0 <= self.collab_fraction <= 1.0:
            raise ConfigError("collab_fraction must lie in [0, 1]", field="collab_fraction")
        if self.noise_std_m < 0:
            raise ConfigError("noise_std_m must be >= 0", field="noise_std_m")
        if self.obstacle_tag not in OBSTACLE_TAGS + ("mixed",):
            raise ConfigError(f"unknown obstacle_tag {self.obstacle_tag!r}", field="obstacle_tag")
        if not 1 <= self.divergence_frame <= INPUT_LEN + TARGET_LEN - 2:
            raise ConfigError("divergence_frame out of range", field="divergence_frame")
        if len(self.ree) != 3:
            raise ConfigError("ree must have 3 coordinates", field="ree")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}",
                              field="schema_version")
        self.ree = tuple(float(v) for v in self.ree)

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        for key in mapping:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}", field=key)
        return cls(**mapping)

    def to_mapping(self):
        out = asdict(self)
        out["ree"] = list(self.ree)
        return out


def load_config(path):
    """Read a YAML/JSON key-value document into a plain dict."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value document")
    return data


def _min_jerk(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _lateral(tag, s, amplitude):
    if tag == "one":
        return amplitude * np.sin(np.pi * s)
    if tag == "three":
        return 0.6 * amplitude * np.sin(2.0 * np.pi * s)
    return np.zeros_like(s)


def _sample_motion(cfg, intention, tag, height, rng):
    n = INPUT_LEN + TARGET_LEN
    t = np.arange(n, dtype=np.float64)
    ree = np.asarray(cfg.ree)
    fd = cfg.divergence_frame
    sw = 0.19 * height

    x_start = ree[0] + cfg.start_distance_m + rng.uniform(-0.1, 0.1)
    x_final = ree[0] + 0.5 * height
    prog = _min_jerk(t / (n - 1))
    x = x_start + (x_final - x_start) * prog
    if intention == NON_COLLABORATIVE:
        v = np.gradient(x)[fd]
        tau = 2.0
        dt = np.maximum(t - fd, 0.0)
        x = np.where(t < fd, x, x[fd] + v * tau * (1.0 - np.exp(-dt / tau)))

    s = (x_start - x) / (x_start - x_final)
    y0 = rng.uniform(-0.3, 0.3)
    y_final = ree[1] - 0.6 * sw
    y = _lateral(tag, s, rng.uniform(0.3, 0.8) * rng.choice([-1.0, 1.0]))
    y = y + (1.0 - s) * y0 + s * y_final

    dist = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
    phase = 2.0 * np.pi * dist / (1.4 * height) + rng.uniform(0, 2 * np.pi)
    speed = np.gradient(dist) * FRAME_RATE
    amp = 0.12 * height * np.clip(speed / 0.8, 0.0, 1.0)
    swing = amp * np.sin(phase)
    bob = 0.015 * height * np.cos(2.0 * phase) * np.clip(speed / 0.8, 0.0, 1.0)

    joints = np.zeros((n, 9, 3))

    def put(j, dx, dy, z):
        joints[:, j, 0] = x + dx
        joints[:, j, 1] = y + dy
        joints[:, j, 2] = z + bob

    put(0, 0.0, 0.0, 1.00 * height)
    put(1, 0.0, 0.0, 1.45 * height)
    put(2, -0.03 * height, 0.0, 1.62 * height)
    put(3, 0.0, -sw, 1.42 * height)
    put(4, 0.5 * swing, -sw - 0.02, 1.13 * height)
    put(5, swing, -sw - 0.03, 0.85 * height)
    put(6, 0.0, sw, 1.42 * height)
    put(7, -0.5 * swing, sw + 0.02, 1.13 * height)
    put(8, -swing, sw + 0.03, 0.85 * height)

    if intention == COLLABORATIVE:
        blend = _min_jerk((t - fd) / (n - 1 - fd))[:, None]
        shoulder = joints[:, 6, :]
        elbow_goal = 0.5 * (shoulder + ree) - np.array([0.0, 0.0, 0.12 * height])
        joints[:, 7, :] = (1.0 - blend) * joints[:, 7, :] + blend * elbow_goal
        joints[:, 8, :] = (1.0 - blend) * joints[:, 8, :] + blend * ree

    frames = joints.reshape(n, 27)
    if cfg.noise_std_m > 0:
        frames = frames + rng.normal(0.0, cfg.noise_std_m, size=frames.shape)
    return frames


def generate_synthetic(config=None, seed=None):
    """Emulate handover approaches from a 6 m start.

    Collaborative givers keep walking and raise the right hand to the robot's
    end-effector point at the last frame; non-collaborative givers halt from
    ``divergence_frame`` on with the hand low. Each sample's 60-frame window
    ends at the handover moment. Deterministic for a fixed ``(config, seed)``;
    ``seed`` overrides ``config.seed``.
    """
    cfg = config if config is not None else GeneratorConfig()
    if isinstance(cfg, dict):
        cfg = GeneratorConfig.from_mapping(cfg)
    seed = cfg.seed if seed is None else seed
    per = cfg.samples_per_subject
    n_collab = int(round(cfg.collab_fraction * per))
    samples = []
    for subj in range(cfg.subjects):
        srng = np.random.default_rng([seed, subj])
        height = srng.uniform(0.92, 1.08)
        labels = np.array([COLLABORATIVE] * n_collab + [NON_COLLABORATIVE] * (per - n_collab))
        srng.shuffle(labels)
        for k in range(per):
            rng = np.random.default_rng([seed, subj, k])
            tag = cfg.obstacle_tag
            if tag == "mixed":
                tag = OBSTACLE_TAGS[k % len(OBSTACLE_TAGS)]
            intention = int(labels[k])
            frames = _sample_motion(cfg, intention, tag, height, rng)
            samples.append(HandoverSample(
                id=f"s{subj:02d}-{k:03d}",
                subject=f"s{subj:02d}",
                intention=intention,
                input=frames[:INPUT_LEN],
                target=frames[INPUT_LEN:],
                ree=np.tile(np.asarray(cfg.ree), (TARGET_LEN, 1)),
                scenario=f"obstacles={tag}",
            ))
    return samples


# --------------------------------------------------------------------------- augmentation / splits

def augment_reverse(sample, seed, probability):
    """Time-reverse the 60-frame window with the given probability.

    ``seed`` may be an int or a ``numpy.random.Generator``. Label and ree are
    kept as-is.
    """
    if not 0.0 <= probability <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    if not rng.random() < probability:
        return sample
    seq = sample.sequence[::-1]
    return HandoverSample(
        id=sample.id, subject=sample.subject, intention=sample.intention,
        input=seq[:INPUT_LEN].copy(), target=seq[INPUT_LEN:].copy(), ree=sample.ree.copy(),
        scenario=sample.scenario, frame_rate=sample.frame_rate,
    )


def augment_shift(sample, seed, probability, shifts=(TARGET_LEN, 2 * TARGET_LEN)):
    """With the given probability, cut the window later in the sequence.

    The 60-frame sequence is extended by holding its final pose, and the
    window starts a random element of ``shifts`` frames later. This mirrors
    the windows seen when deployed windows are rolled forward past the
    handover moment.
    """
    if not 0.0 <= probability <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    if not rng.random() < probability:
        return sample
    k = int(shifts[rng.integers(len(shifts))])
    seq = sample.sequence
    if k > 0:
        seq = np.concatenate([seq[k:], np.repeat(seq[-1:], k, axis=0)])
    return HandoverSample(
        id=sample.id, subject=sample.subject, intention=sample.intention,
        input=seq[:INPUT_LEN].copy(), target=seq[INPUT_LEN:].copy(), ree=sample.ree.copy(),
        scenario=sample.scenario, frame_rate=sample.frame_rate,
    )


@dataclass
class Split:
    held_out: str
    train_ids: list = field(default_factory=list)
    test_ids: list = field(default_factory=list)


def leave_one_out(samples):
    subjects = sorted({s.subject for s in samples})
    if len(subjects) < 2:
        raise SplitError(f"leave-one-out needs at least 2 subjects, got {len(subjects)}")
    return [
        Split(
            held_out=subj,
            train_ids=[s.id for s in samples if s.subject != subj],
            test_ids=[s.id for s in samples if s.subject == subj],
        )
        for subj in subjects
    ]


def select(samples, ids):
    by_id = {s.id: s for s in samples}
    return [by_id[i] for i in ids]


# --------------------------------------------------------------------------- files

def _atomic_write(path, lines):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sample_record(s):
    return {
        "id": s.id, "subject": s.subject, "intention": int(s.intention),
        "scenario": s.scenario, "frame_rate": s.frame_rate,
        "input": s.input.tolist(), "target": s.target.tolist(), "ree": s.ree.tolist(),
    }


def write_dataset(samples, path, meta=None):
    header = {"schema": DATASET_SCHEMA, "version": SCHEMA_VERSION, "count": len(samples)}
    if meta:
        header["meta"] = meta
    lines = [json.dumps(header)] + [json.dumps(_sample_record(s)) for s in samples]
    _atomic_write(path, lines)


def _read_header(lines, schema):
    if not lines:
        raise ParseError("missing header", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header: {exc}", line=1) from exc
    if not isinstance(header, dict) or header.get("schema") != schema:
        raise SchemaError(f"schema: expected {schema!r}", field="schema")
    if header.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"version: unsupported {header.get('version')!r}", field="version")
    return header


_REQUIRED = ("id", "subject", "intention", "input", "target", "ree")


def read_dataset(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = _read_header(lines, DATASET_SCHEMA)
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"record {lineno - 1}: {exc}", line=lineno) from exc
        if not isinstance(rec, dict):
            raise ParseError(f"record {lineno - 1} is not an object", line=lineno)
        for key in _REQUIRED:
            if key not in rec:
                raise SchemaError(f"line {lineno}: missing field {key!r}", field=key)
        try:
            arrays = {k: np.array(rec[k], dtype=np.float64) for k in ("input", "target", "ree")}
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: ragged or non-numeric array ({exc})") from exc
        try:
            samples.append(HandoverSample(
                id=rec["id"], subject=rec["subject"], intention=rec["intention"],
                scenario=rec.get("scenario", ""), frame_rate=rec.get("frame_rate", FRAME_RATE),
                **arrays,
            ))
        except SchemaError as exc:
            raise SchemaError(f"line {lineno}: {exc}", field=exc.field) from exc
    if "count" in header and header["count"] != len(samples):
        raise ParseError(f"header count {header['count']} != {len(samples)} records")
    return samples


def write_motion(sequences, path, header=None):
    """Write predicted trajectories (any length) in the dataset's line format."""
    head = {"schema": MOTION_SCHEMA, "version": SCHEMA_VERSION, "count": len(sequences)}
    if header:
        head["meta"] = header
    recs = [json.dumps({"frame_rate": s.frame_rate, "frames": s.frames.tolist()}) for s in sequences]
    _atomic_write(path, [json.dumps(head)] + recs)


def read_motion(path):
    """Return ``(header, [MotionSequence, ...])``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = _read_header(lines, MOTION_SCHEMA)
    seqs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            seqs.append(MotionSequence(np.array(rec["frames"], dtype=np.float64),
                                       rec.get("frame_rate", FRAME_RATE)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"record {lineno - 1}: {exc}", line=lineno) from exc
    return header, seqs


def write_csv(seq, path):
    cols = ["frame"] + [f"{j}_{a}" for j in seq.layout.names for a in "xyz"]
    lines = [",".join(cols)]
    for i, row in enumerate(seq.frames):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in row]))
    _atomic_write(path, lines)
