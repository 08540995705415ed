"""Dual-view skeleton regression networks with hand-rolled gradients.

Three variants share one output contract (normalized coordinates of the
included joints):

  * ``dual_cnn``       - per view: TNet, then the N x 4 matrix as a
                         1-channel image through a conv/pool stack;
                         branches concatenated into an MLP head
  * ``dual_mlp``       - conv stack replaced by a shared per-row MLP with
                         a global max pool per view
  * ``single_pointnet``- one xyz cloud: TNet(3), shared row MLP, global
                         max pool, MLP head

All parameters live in a flat name -> float64 array dict, so the whole
model is one checkpointable, finite-difference-checkable object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, amax, concat, conv2d, maxpool2d, mse
from .pointcloud import FusedFrame, ViewPair, build_cloud, build_views
from .scene import DEFAULT_EXCLUDED_JOINTS, JOINT_INDEX, JOINT_NAMES, N_JOINTS

VARIANTS = ("dual_cnn", "dual_mlp", "single_pointnet")

MAX_OUTPUT_LABELS = 96  # 32 joints x 3 coordinates


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "dual_cnn"
    n_max: int = 64
    excluded_joints: tuple = DEFAULT_EXCLUDED_JOINTS
    conv_spec: tuple = ((16, 3, 2), (32, 3, 2))  # (channels, kernel, pool) per stage
    row_mlp_spec: tuple = (64, 128)
    pointnet_mlp_spec: tuple = (64, 64, 128, 1024)
    pointnet_head_spec: tuple = (512, 256)
    mlp_head_spec: tuple = (512, 128)
    tnet_row_spec: tuple = (32, 64)
    tnet_head_spec: tuple = (32,)
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        unknown = [j for j in self.excluded_joints if j not in JOINT_INDEX]
        if unknown:
            raise ValueError(f"unknown excluded joints: {unknown}")
        if not 1 <= self.n_joints_out <= N_JOINTS:
            raise ValueError("need between 1 and 32 included joints")
        if self.output_width > MAX_OUTPUT_LABELS:
            raise ValueError(f"output width {self.output_width} exceeds {MAX_OUTPUT_LABELS}")
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if self.variant == "dual_cnn":
            h, w = self.n_max, 4
            for channels, kernel, pool in self.conv_spec:
                if kernel % 2 == 0:
                    raise ValueError("conv kernels must be odd")
                h, w = h // pool, w // pool
                if h < 1 or w < 1:
                    raise ValueError("conv/pool stack shrinks the view below 1x1")

    @property
    def included_joints(self) -> tuple:
        return tuple(n for n in JOINT_NAMES if n not in self.excluded_joints)

    @property
    def n_joints_out(self) -> int:
        return N_JOINTS - len(set(self.excluded_joints))

    @property
    def output_width(self) -> int:
        return 3 * self.n_joints_out

    @property
    def tnet_dim(self) -> int:
        return 3 if self.variant == "single_pointnet" else 4

    @property
    def branches(self) -> tuple:
        return ("cloud",) if self.variant == "single_pointnet" else ("xy", "yz")


@dataclass
class ModelParams:
    """All learnable arrays plus the normalization constants baked in at
    training time (per-axis ground-truth min/max and the SNR affine)."""

    config: ModelConfig
    params: dict
    gt_min: np.ndarray | None = None
    gt_max: np.ndarray | None = None
    snr_bounds: tuple | None = None


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _dense_init(rng, fan_in, fan_out, out: dict, name: str):
    out[f"{name}.w"] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
    out[f"{name}.b"] = np.zeros(fan_out)


def _tnet_init(rng, cfg: ModelConfig, out: dict, prefix: str):
    dim = cfg.tnet_dim
    width = dim
    for i, w in enumerate(cfg.tnet_row_spec):
        _dense_init(rng, width, w, out, f"{prefix}.row{i}")
        width = w
    for i, w in enumerate(cfg.tnet_head_spec):
        _dense_init(rng, width, w, out, f"{prefix}.head{i}")
        width = w
    # final layer starts as the exact identity transform
    out[f"{prefix}.out.w"] = np.zeros((width, dim * dim))
    out[f"{prefix}.out.b"] = np.eye(dim).reshape(-1).copy()


def init_params(cfg: ModelConfig) -> ModelParams:
    """Fresh parameters; deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    p: dict = {}
    if cfg.variant == "dual_cnn":
        for br in cfg.branches:
            _tnet_init(rng, cfg, p, f"{br}.tnet")
            c_in = 1
            for i, (channels, kernel, _pool) in enumerate(cfg.conv_spec):
                fan_in = c_in * kernel * kernel
                p[f"{br}.conv{i}.w"] = rng.normal(
                    0.0, math.sqrt(2.0 / fan_in), size=(channels, c_in, kernel, kernel)
                )
                p[f"{br}.conv{i}.b"] = np.zeros(channels)
                c_in = channels
        feat = 2 * _conv_flat_size(cfg)
    elif cfg.variant == "dual_mlp":
        for br in cfg.branches:
            _tnet_init(rng, cfg, p, f"{br}.tnet")
            width = 4
            for i, w in enumerate(cfg.row_mlp_spec):
                _dense_init(rng, width, w, p, f"{br}.row{i}")
                width = w
        feat = 2 * cfg.row_mlp_spec[-1]
    else:
        _tnet_init(rng, cfg, p, "cloud.tnet")
        width = 3
        for i, w in enumerate(cfg.pointnet_mlp_spec):
            _dense_init(rng, width, w, p, f"cloud.mlp{i}")
            width = w
        feat = cfg.pointnet_mlp_spec[-1]

    head_spec = cfg.pointnet_head_spec if cfg.variant == "single_pointnet" else cfg.mlp_head_spec
    width = feat
    for i, w in enumerate(head_spec):
        _dense_init(rng, width, w, p, f"head.fc{i}")
        width = w
    _dense_init(rng, width, cfg.output_width, p, "head.out")
    return ModelParams(config=cfg, params=p)


def _conv_flat_size(cfg: ModelConfig) -> int:
    h, w = cfg.n_max, 4
    channels = 1
    for ch, _kernel, pool in cfg.conv_spec:
        channels = ch
        h, w = h // pool, w // pool
    return channels * h * w


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------

def _tnet_graph(view: Tensor, pt: dict, cfg: ModelConfig, prefix: str):
    """(B, N, D) -> (transformed (B, N, D), transform (B, D, D))."""
    dim = cfg.tnet_dim
    h = view
    for i in range(len(cfg.tnet_row_spec)):
        h = (h @ pt[f"{prefix}.row{i}.w"] + pt[f"{prefix}.row{i}.b"]).relu()
    pooled = amax(h, axis=1)
    for i in range(len(cfg.tnet_head_spec)):
        pooled = (pooled @ pt[f"{prefix}.head{i}.w"] + pt[f"{prefix}.head{i}.b"]).relu()
    tvals = pooled @ pt[f"{prefix}.out.w"] + pt[f"{prefix}.out.b"]
    transform = tvals.reshape((-1, dim, dim))
    return view @ transform, transform


def _branch_graph(view: Tensor, pt: dict, cfg: ModelConfig, br: str) -> Tensor:
    batch = view.shape[0]
    h, _ = _tnet_graph(view, pt, cfg, f"{br}.tnet")
    if cfg.variant == "dual_cnn":
        img = h.reshape((batch, 1, cfg.n_max, 4))
        for i, (_channels, _kernel, pool) in enumerate(cfg.conv_spec):
            img = conv2d(img, pt[f"{br}.conv{i}.w"], pt[f"{br}.conv{i}.b"]).relu()
            img = maxpool2d(img, pool)
        return img.reshape((batch, _conv_flat_size(cfg)))
    # dual_mlp: shared row MLP then order-invariant global max pool
    for i in range(len(cfg.row_mlp_spec)):
        h = (h @ pt[f"{br}.row{i}.w"] + pt[f"{br}.row{i}.b"]).relu()
    return amax(h, axis=1)


def _forward_graph(cfg: ModelConfig, pt: dict, inputs: dict) -> Tensor:
    if cfg.variant == "single_pointnet":
        h, _ = _tnet_graph(inputs["cloud"], pt, cfg, "cloud.tnet")
        for i in range(len(cfg.pointnet_mlp_spec)):
            h = (h @ pt[f"cloud.mlp{i}.w"] + pt[f"cloud.mlp{i}.b"]).relu()
        h = amax(h, axis=1)
        head_spec = cfg.pointnet_head_spec
    else:
        h = concat([_branch_graph(inputs[br], pt, cfg, br) for br in cfg.branches], axis=1)
        head_spec = cfg.mlp_head_spec
    for i in range(len(head_spec)):
        h = (h @ pt[f"head.fc{i}.w"] + pt[f"head.fc{i}.b"]).relu()
    return h @ pt["head.out.w"] + pt["head.out.b"]


def _wrap_params(params: dict) -> dict:
    return {k: Tensor(v, requires_grad=True) for k, v in params.items()}


def _prepare_inputs(cfg: ModelConfig, inputs) -> tuple[dict, bool]:
    """Normalize the accepted input forms into batched arrays."""
    if cfg.variant == "single_pointnet":
        cloud = np.asarray(inputs, dtype=float)
        single = cloud.ndim == 2
        if single:
            cloud = cloud[None]
        if cloud.shape[1:] != (cfg.n_max, 3):
            raise ValueError(f"single_pointnet expects (B, {cfg.n_max}, 3) clouds, got {cloud.shape}")
        return {"cloud": Tensor(cloud)}, single
    if isinstance(inputs, ViewPair):
        inputs = (inputs.view_xy, inputs.view_yz)
    vxy, vyz = (np.asarray(v, dtype=float) for v in inputs)
    single = vxy.ndim == 2
    if single:
        vxy, vyz = vxy[None], vyz[None]
    for name, v in (("view_xy", vxy), ("view_yz", vyz)):
        if v.shape[1:] != (cfg.n_max, 4):
            raise ValueError(f"{name} must be (B, {cfg.n_max}, 4), got {v.shape}")
    return {"xy": Tensor(vxy), "yz": Tensor(vyz)}, single


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def tnet_forward(view: np.ndarray, params: ModelParams, branch: str | None = None):
    """Apply one branch's learned affine transform to a view.

    Returns (transformed view, transform matrix); accepts a single (N, D)
    view or a (B, N, D) batch.
    """
    cfg = params.config
    if branch is None:
        branch = cfg.branches[0]
    view = np.asarray(view, dtype=float)
    single = view.ndim == 2
    batched = view[None] if single else view
    if batched.shape[2] != cfg.tnet_dim:
        raise ValueError(f"view feature width {batched.shape[2]} != tnet dim {cfg.tnet_dim}")
    out, transform = _tnet_graph(Tensor(batched), _wrap_params(params.params), cfg, f"{branch}.tnet")
    if single:
        return out.data[0], transform.data[0]
    return out.data, transform.data


def forward(cfg: ModelConfig, params: ModelParams, inputs) -> np.ndarray:
    """Predict normalized joint coordinates; (B, 3J) or (3J,) for one frame."""
    tensors, single = _prepare_inputs(cfg, inputs)
    out = _forward_graph(cfg, _wrap_params(params.params), tensors)
    return out.data[0] if single else out.data


def mse_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean squared error over all outputs; 0 iff pred == gt."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return float(np.mean((pred - gt) ** 2))


def backward(cfg: ModelConfig, params: ModelParams, inputs, gt: np.ndarray):
    """Loss and exact gradients of the MSE w.r.t. every parameter.

    ``gt`` lives in the normalized output space, shaped like the output.
    """
    tensors, single = _prepare_inputs(cfg, inputs)
    gt = np.asarray(gt, dtype=float)
    if single:
        gt = gt[None]
    pt = _wrap_params(params.params)
    loss = mse(_forward_graph(cfg, pt, tensors), gt)
    loss.backward()
    grads = {k: t.grad for k, t in pt.items()}
    return float(loss.data), grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class Hyper:
    lr: float = 1e-3
    batch: int = 32
    epochs: int = 30
    seed: int = 0
    val_fraction: float = 0.2
    stop_loss: float | None = None  # stop early once train loss drops below
    lr_decay: float = 1.0  # per-epoch multiplicative decay


@dataclass
class ExampleSet:
    """Model-ready arrays for a list of fused frames (SNR already scaled)."""

    view_xy: np.ndarray  # (F, n_max, 4)
    view_yz: np.ndarray  # (F, n_max, 4)
    cloud: np.ndarray  # (F, n_max, 3)
    gt: np.ndarray  # (F, 32, 3) world metres
    actions: list
    swing_states: list
    frame_ids: list

    def __len__(self):
        return len(self.gt)

    def inputs_for(self, cfg: ModelConfig, idx=None):
        sel = slice(None) if idx is None else idx
        if cfg.variant == "single_pointnet":
            return self.cloud[sel]
        return (self.view_xy[sel], self.view_yz[sel])


def examples_from_frames(frames: list[FusedFrame], n_max: int) -> ExampleSet:
    """Pack fused frames (normalized SNR) into stacked model inputs."""
    vxy, vyz, clouds, gts = [], [], [], []
    actions, states, ids = [], [], []
    for i, fr in enumerate(frames):
        vp = build_views(fr, n_max)
        vxy.append(vp.view_xy)
        vyz.append(vp.view_yz)
        clouds.append(build_cloud(fr, n_max))
        gts.append(np.asarray(fr.gt.joints if hasattr(fr.gt, "joints") else fr.gt, dtype=float))
        actions.append(fr.action)
        states.append(fr.swing_state)
        ids.append(getattr(fr, "frame_id", i))
    return ExampleSet(
        view_xy=np.stack(vxy) if vxy else np.zeros((0, n_max, 4)),
        view_yz=np.stack(vyz) if vyz else np.zeros((0, n_max, 4)),
        cloud=np.stack(clouds) if clouds else np.zeros((0, n_max, 3)),
        gt=np.stack(gts) if gts else np.zeros((0, N_JOINTS, 3)),
        actions=actions,
        swing_states=states,
        frame_ids=ids,
    )


def _included_idx(cfg: ModelConfig) -> np.ndarray:
    return np.array([JOINT_INDEX[n] for n in cfg.included_joints])


def normalize_targets(cfg: ModelConfig, gt: np.ndarray, gt_min: np.ndarray, gt_max: np.ndarray) -> np.ndarray:
    """World-frame (F, 32, 3) joints -> flattened (F, 3J) training targets."""
    sel = gt[:, _included_idx(cfg), :]
    span = gt_max - gt_min
    return ((sel - gt_min) / span).reshape(len(gt), -1)


def target_bounds(cfg: ModelConfig, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis min/max of the included training joints; span kept positive."""
    sel = gt[:, _included_idx(cfg), :]
    lo = sel.min(axis=(0, 1))
    hi = sel.max(axis=(0, 1))
    degenerate = hi - lo < 1e-9
    hi = np.where(degenerate, lo + 1.0, hi)
    return lo, hi


def _adam_step(params: dict, grads: dict, state: dict, lr: float, t: int,
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    for k, p in params.items():
        g = grads[k]
        m, v = state[k]
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state[k] = (m, v)
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        params[k] = p - lr * mhat / (np.sqrt(vhat) + eps)


def split_indices(n: int, seed: int, val_fraction: float):
    """(train_idx, val_idx): the exact split :func:`train` uses.

    The split is the first permutation drawn from ``default_rng(seed)``, so
    external code (e.g. split digests) can reproduce it without training.
    """
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(round(n * val_fraction))
    return order[n_val:], order[:n_val]


def train(cfg: ModelConfig, examples: ExampleSet, hyper: Hyper):
    """Adam training loop with a deterministic shuffle stream.

    Splits ``examples`` into train/validation (``hyper.val_fraction``),
    derives the ground-truth normalization from the training part only, and
    returns (params, history) where history holds one
    {epoch, train_loss, val_loss} entry per epoch.
    """
    n = len(examples)
    if n == 0:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(hyper.seed)
    order = rng.permutation(n)  # keep in sync with split_indices()
    n_val = int(round(n * hyper.val_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise ValueError("val_fraction leaves no training frames")

    gt_min, gt_max = target_bounds(cfg, examples.gt[train_idx])
    targets = normalize_targets(cfg, examples.gt, gt_min, gt_max)

    mp = init_params(cfg)
    mp.gt_min, mp.gt_max = gt_min, gt_max
    state = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in mp.params.items()}

    history = []
    step = 0
    for epoch in range(hyper.epochs):
        lr = hyper.lr * hyper.lr_decay**epoch
        shuffled = train_idx[rng.permutation(len(train_idx))]
        total, count = 0.0, 0
        for start in range(0, len(shuffled), hyper.batch):
            idx = shuffled[start : start + hyper.batch]
            loss, grads = backward(cfg, mp, examples.inputs_for(cfg, idx), targets[idx])
            step += 1
            _adam_step(mp.params, grads, state, lr, step)
            total += loss * len(idx)
            count += len(idx)
        train_loss = total / count
        if len(val_idx):
            val_pred = forward(cfg, mp, examples.inputs_for(cfg, val_idx))
            val_loss = mse_loss(val_pred, targets[val_idx])
        else:
            val_loss = math.nan
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if hyper.stop_loss is not None and train_loss < hyper.stop_loss:
            break
    return mp, history


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

@dataclass
class SkeletonEstimate:
    """Predicted world-frame joints; excluded joints are NaN and listed."""

    joints: np.ndarray  # (32, 3), NaN where absent
    included: tuple
    absent: tuple


def _denormalize(cfg: ModelConfig, out: np.ndarray, gt_min: np.ndarray, gt_max: np.ndarray) -> np.ndarray:
    coords = out.reshape(len(out), cfg.n_joints_out, 3)
    world = coords * (gt_max - gt_min) + gt_min
    full = np.full((len(out), N_JOINTS, 3), np.nan)
    full[:, _included_idx(cfg), :] = world
    return full


def predict_batch(params: ModelParams, examples: ExampleSet) -> np.ndarray:
    """(F, 32, 3) world-frame predictions with NaN rows for absent joints."""
    cfg = params.config
    if params.gt_min is None or params.gt_max is None:
        raise ValueError("params carry no normalization constants; train first")
    out = forward(cfg, params, examples.inputs_for(cfg))
    return _denormalize(cfg, out, params.gt_min, params.gt_max)


def predict(params: ModelParams, frame) -> SkeletonEstimate:
    """Predict one preprocessed frame (FusedFrame, ViewPair, or cloud)."""
    cfg = params.config
    if params.gt_min is None or params.gt_max is None:
        raise ValueError("params carry no normalization constants; train first")
    if isinstance(frame, FusedFrame):
        inputs = build_cloud(frame, cfg.n_max) if cfg.variant == "single_pointnet" else build_views(frame, cfg.n_max)
    else:
        inputs = frame
    out = forward(cfg, params, inputs)
    joints = _denormalize(cfg, out[None], params.gt_min, params.gt_max)[0]
    return SkeletonEstimate(
        joints=joints,
        included=cfg.included_joints,
        absent=tuple(n for n in JOINT_NAMES if n not in cfg.included_joints),
    )


# ---------------------------------------------------------------------------
# checkpoint container (versioned JSON; layout documented in the README)
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "radarpose-checkpoint"
CHECKPOINT_VERSION = 1

_TUPLE_FIELDS = (
    "excluded_joints", "conv_spec", "row_mlp_spec", "pointnet_mlp_spec",
    "pointnet_head_spec", "mlp_head_spec", "tnet_row_spec", "tnet_head_spec",
)


def _config_to_dict(cfg: ModelConfig) -> dict:
    return {
        "variant": cfg.variant,
        "n_max": cfg.n_max,
        "excluded_joints": list(cfg.excluded_joints),
        "conv_spec": [list(s) for s in cfg.conv_spec],
        "row_mlp_spec": list(cfg.row_mlp_spec),
        "pointnet_mlp_spec": list(cfg.pointnet_mlp_spec),
        "pointnet_head_spec": list(cfg.pointnet_head_spec),
        "mlp_head_spec": list(cfg.mlp_head_spec),
        "tnet_row_spec": list(cfg.tnet_row_spec),
        "tnet_head_spec": list(cfg.tnet_head_spec),
        "seed": cfg.seed,
    }


def _config_from_dict(d: dict) -> ModelConfig:
    kwargs = dict(d)
    for key in _TUPLE_FIELDS:
        val = kwargs[key]
        kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in val)
    return ModelConfig(**kwargs)


def save_checkpoint(params: ModelParams, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": _config_to_dict(params.config),
        "norm": {
            "gt_min": None if params.gt_min is None else params.gt_min.tolist(),
            "gt_max": None if params.gt_max is None else params.gt_max.tolist(),
            "snr_bounds": None if params.snr_bounds is None else list(params.snr_bounds),
        },
        "params": {
            k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
            for k, v in params.params.items()
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> ModelParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    cfg = _config_from_dict(doc["config"])
    params = {
        k: np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
        for k, spec in doc["params"].items()
    }
    norm = doc["norm"]
    return ModelParams(
        config=cfg,
        params=params,
        gt_min=None if norm["gt_min"] is None else np.asarray(norm["gt_min"], dtype=float),
        gt_max=None if norm["gt_max"] is None else np.asarray(norm["gt_max"], dtype=float),
        snr_bounds=None if norm["snr_bounds"] is None else tuple(norm["snr_bounds"]),
    )
