"""Local proposal model: a small dilated temporal conv net that turns a
windowed (features, scribble channels, energy) block into a boundary
posterior, left/right side-label posteriors, and a confidence score,
plus its interval-marginalized training objective and synthetic-scribble
example generator.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from scribeloop.errors import FormatError, NumericError, TrainingError, TruncationError
from scribeloop.features import FeatureSequence, boundary_energy
from scribeloop.intervals import FrameInterval
from scribeloop.labels import Segmentation
from scribeloop.scribble import CH_LEFT, CH_RIGHT, GestureKind, ScribbleEncoding, make_window

HIDDEN = 64
KERNEL = 9
LOG_FLOOR = 1e-12
LOSS_WEIGHTS = (1.0, 1.0, 0.3)  # boundary, side, consistency
CONFIDENCE_AUX_WEIGHT = 0.1

MPK_MAGIC = b"MPK1"


@dataclass(frozen=True)
class ProposalInput:
    """Per-window input block: features |W| x D, scribble 3 x |W|,
    normalized boundary energy |W|."""

    window: FrameInterval
    features: np.ndarray
    channels: np.ndarray
    energy: np.ndarray

    def __post_init__(self):
        n = len(self.window)
        if n == 0:
            raise ValueError("empty window")
        feats = np.asarray(self.features, dtype=np.float64)
        ch = np.asarray(self.channels, dtype=np.float64)
        en = np.asarray(self.energy, dtype=np.float64)
        if feats.shape[0] != n or ch.shape != (3, n) or en.shape != (n,):
            raise ValueError(
                f"window length {n} vs features {feats.shape}, channels {ch.shape}, energy {en.shape}"
            )
        for arr in (feats, ch, en):
            if not np.isfinite(arr).all():
                raise ValueError("non-finite value in proposal input")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "energy", en)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ProposalOutput:
    """Boundary posterior over the window, side-label posteriors over the
    vocabulary, and a raw confidence in [0, 1]."""

    window: FrameInterval
    p_b: np.ndarray
    p_left: np.ndarray
    p_right: np.ndarray
    confidence: float

    def __post_init__(self):
        for name in ("p_b", "p_left", "p_right"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.min() < 0 or abs(v.sum() - 1.0) > 1e-6:
                raise ValueError(f"{name} is not a probability vector (sum={v.sum()})")
            object.__setattr__(self, name, v)
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")

    @property
    def cut(self) -> int:
        """Global frame index of the boundary-posterior argmax."""
        return self.window.start + int(np.argmax(self.p_b))


@dataclass(frozen=True)
class AnchorOverlapPenalty:
    """Boundary mass falling inside protected spans of accepted anchors."""

    spans: tuple  # FrameInterval, global frame coordinates


@dataclass(frozen=True)
class SideDisagreementPenalty:
    """Penalizes swapping the confirmed side labels of a neighboring
    correction: p_L mass on its right label plus p_R mass on its left."""

    y_left: int
    y_right: int


@dataclass(frozen=True)
class TrainExample:
    input: ProposalInput
    target_interval: FrameInterval
    y_left: int
    y_right: int
    penalties: tuple = ()


class _ProposalNet(nn.Module):
    """Two dilated 1-D conv layers plus boundary/side/confidence heads."""

    def __init__(self, dim: int, num_labels: int):
        super().__init__()
        in_ch = dim + 4  # features | 3 scribble channels | energy
        self.conv1 = nn.Conv1d(in_ch, HIDDEN, KERNEL, padding=4, dilation=1)
        self.conv2 = nn.Conv1d(HIDDEN, HIDDEN, KERNEL, padding=8, dilation=2)
        self.boundary = nn.Conv1d(HIDDEN, 1, 1)
        self.left = nn.Linear(HIDDEN, num_labels)
        self.right = nn.Linear(HIDDEN, num_labels)
        self.conf = nn.Linear(HIDDEN, 1)
        self.double()

    def forward(self, x: torch.Tensor, channels: torch.Tensor):
        """x: (C, W) input block; channels: (3, W) scribble supports."""
        h = F.relu(self.conv1(x.unsqueeze(0)))
        h = F.relu(self.conv2(h)).squeeze(0)  # (HIDDEN, W)
        logits_b = self.boundary(h.unsqueeze(0)).squeeze(0).squeeze(0)  # (W,)
        p_b = F.softmax(logits_b, dim=0)

        split = int(torch.argmax(p_b).item())
        pooled_l = _side_pool(h, channels[CH_LEFT], split, left=True)
        pooled_r = _side_pool(h, channels[CH_RIGHT], split, left=False)
        p_l = F.softmax(self.left(pooled_l), dim=0)
        p_r = F.softmax(self.right(pooled_r), dim=0)
        c = torch.sigmoid(self.conf(h.mean(dim=1))).squeeze(0)
        return p_b, p_l, p_r, c


def _side_pool(h: torch.Tensor, weights: torch.Tensor, split: int, left: bool) -> torch.Tensor:
    """Weighted mean over time with the scribble channel; an all-zero
    channel falls back to the half of the window on that side of the
    boundary argmax."""
    total = weights.sum()
    if total.item() > 0:
        return (h * weights.unsqueeze(0)).sum(dim=1) / total
    n = h.shape[1]
    if left:
        hi = max(1, split)
        return h[:, :hi].mean(dim=1)
    lo = min(split, n - 1)
    return h[:, lo:].mean(dim=1)


@dataclass(frozen=True)
class ModelParams:
    """Immutable snapshot of the proposal net's weights."""

    version: int
    num_labels: int
    dim: int
    state: dict = field(repr=False)

    def to_module(self) -> _ProposalNet:
        net = _ProposalNet(self.dim, self.num_labels)
        net.load_state_dict(
            {k: torch.from_numpy(np.asarray(v, dtype=np.float64)) for k, v in self.state.items()}
        )
        return net

    @staticmethod
    def from_module(net: _ProposalNet, version: int, num_labels: int, dim: int) -> "ModelParams":
        state = {k: v.detach().numpy().copy() for k, v in net.state_dict().items()}
        return ModelParams(version=version, num_labels=num_labels, dim=dim, state=state)


def init_params(dim: int, num_labels: int, seed: int = 0, zero: bool = False) -> ModelParams:
    gen = torch.Generator().manual_seed(seed)
    net = _ProposalNet(dim, num_labels)
    with torch.no_grad():
        for p in net.parameters():
            if zero:
                p.zero_()
            else:
                p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * 0.05)
    return ModelParams.from_module(net, version=1, num_labels=num_labels, dim=dim)


def assemble_input(f: FeatureSequence, enc: ScribbleEncoding) -> ProposalInput:
    """Slice the feature block and boundary energy for the encoding's
    window and bundle them with the scribble channels."""
    w = enc.window
    if w.start < 0 or w.end > f.num_frames:
        raise ValueError(f"window {w} out of feature range T={f.num_frames}")
    energy = boundary_energy(f, w).values
    return ProposalInput(
        window=w,
        features=f.values[w.start : w.end].astype(np.float64),
        channels=enc.channels,
        energy=energy,
    )


def _input_tensor(x: ProposalInput) -> tuple:
    block = np.concatenate(
        [x.features, x.channels.T, x.energy[:, None]], axis=1
    )  # (W, D+4)
    return (
        torch.from_numpy(block.T.copy()),  # (D+4, W)
        torch.from_numpy(x.channels.copy()),
    )


def forward(m: ModelParams, x: ProposalInput) -> ProposalOutput:
    """Deterministic inference over the window only."""
    if x.dim != m.dim:
        raise ValueError(f"model expects D={m.dim}, input has D={x.dim}")
    net = m.to_module()
    block, channels = _input_tensor(x)
    with torch.no_grad():
        p_b, p_l, p_r, c = net(block, channels)
    arrays = [p_b.numpy(), p_l.numpy(), p_r.numpy(), np.asarray(c.item())]
    for arr in arrays:
        if not np.isfinite(arr).all():
            raise NumericError("non-finite activation in proposal forward")
    return ProposalOutput(
        window=x.window,
        p_b=arrays[0],
        p_left=arrays[1],
        p_right=arrays[2],
        confidence=float(arrays[3]),
    )


# --- losses (public numpy forms; torch twins below feed training) ---


def boundary_loss(out: ProposalOutput, iplus: FrameInterval) -> float:
    """Negative log of the boundary mass marginalized over the uncertain
    interval."""
    if iplus.empty or not out.window.contains_interval(iplus):
        raise ValueError(f"uncertain interval {iplus} not inside window {out.window}")
    lo, hi = iplus.start - out.window.start, iplus.end - out.window.start
    mass = float(out.p_b[lo:hi].sum())
    return -float(np.log(max(mass, LOG_FLOOR)))


def side_loss(out: ProposalOutput, y_left: int, y_right: int) -> float:
    """Cross-entropy on both side-label posteriors (natural log)."""
    return -float(
        np.log(max(out.p_left[y_left], LOG_FLOOR))
        + np.log(max(out.p_right[y_right], LOG_FLOOR))
    )


def _penalty_value(out_pb, out_pl, out_pr, window: FrameInterval, pen):
    if isinstance(pen, AnchorOverlapPenalty):
        total = out_pb.sum() * 0.0
        for span in pen.spans:
            s = span.intersect(window)
            if not s.empty:
                total = total + out_pb[s.start - window.start : s.end - window.start].sum()
        return total
    if isinstance(pen, SideDisagreementPenalty):
        return out_pl[pen.y_right] + out_pr[pen.y_left]
    raise TypeError(f"unknown penalty {pen!r}")


def consistency_loss(out: ProposalOutput, penalties) -> float:
    """Mean of the activated consistency penalties; empty set -> 0."""
    pens = tuple(penalties)
    if not pens:
        return 0.0
    vals = [
        float(_penalty_value(out.p_b, out.p_left, out.p_right, out.window, p)) for p in pens
    ]
    return float(np.mean(vals))


def total_loss(example: TrainExample, out: ProposalOutput) -> float:
    wb, ws, wc = LOSS_WEIGHTS
    return (
        wb * boundary_loss(out, example.target_interval)
        + ws * side_loss(out, example.y_left, example.y_right)
        + wc * consistency_loss(out, example.penalties)
    )


def _example_loss_t(net: _ProposalNet, ex: TrainExample, with_conf_aux: bool = False):
    """Differentiable total loss of one example."""
    block, channels = _input_tensor(ex.input)
    p_b, p_l, p_r, c = net(block, channels)
    w = ex.input.window
    lo, hi = ex.target_interval.start - w.start, ex.target_interval.end - w.start
    floor = torch.tensor(LOG_FLOOR, dtype=torch.float64)
    l_boundary = -torch.log(torch.clamp(p_b[lo:hi].sum(), min=LOG_FLOOR))
    l_side = -(
        torch.log(torch.clamp(p_l[ex.y_left], min=LOG_FLOOR))
        + torch.log(torch.clamp(p_r[ex.y_right], min=LOG_FLOOR))
    )
    if ex.penalties:
        vals = [_penalty_value(p_b, p_l, p_r, w, pen) for pen in ex.penalties]
        l_cons = torch.stack([v if torch.is_tensor(v) else floor * 0 + v for v in vals]).mean()
    else:
        l_cons = torch.zeros((), dtype=torch.float64)
    wb, ws, wc = LOSS_WEIGHTS
    loss = wb * l_boundary + ws * l_side + wc * l_cons
    if with_conf_aux:
        # auxiliary confidence target: 1 iff the boundary argmax lies in I+
        hit = 1.0 if lo <= int(torch.argmax(p_b).item()) < hi else 0.0
        target = torch.tensor(hit, dtype=torch.float64)
        loss = loss + CONFIDENCE_AUX_WEIGHT * F.binary_cross_entropy(
            torch.clamp(c, 1e-7, 1 - 1e-7), target
        )
    return loss


def _batch_loss_t(net: _ProposalNet, batch, with_conf_aux: bool = False):
    """Mean _example_loss_t over a batch, computed in one padded forward.

    Windows are right-padded to the longest in the batch; hidden
    activations are zeroed over the padding after each conv so every
    window sees exactly the zero context it would see alone."""
    B = len(batch)
    lengths = [len(ex.input.window) for ex in batch]
    W = max(lengths)
    in_ch = batch[0].input.dim + 4
    x = torch.zeros((B, in_ch, W), dtype=torch.float64)
    channels = torch.zeros((B, 3, W), dtype=torch.float64)
    mask = torch.zeros((B, W), dtype=torch.float64)
    for i, ex in enumerate(batch):
        block, ch = _input_tensor(ex.input)
        x[i, :, : lengths[i]] = block
        channels[i, :, : lengths[i]] = ch
        mask[i, : lengths[i]] = 1.0

    h = F.relu(net.conv1(x)) * mask.unsqueeze(1)
    h = F.relu(net.conv2(h)) * mask.unsqueeze(1)  # (B, HIDDEN, W)
    logits_b = net.boundary(h).squeeze(1)  # (B, W)
    logits_b = logits_b.masked_fill(mask == 0, float("-inf"))
    p_b = F.softmax(logits_b, dim=1)

    split = torch.argmax(p_b, dim=1)  # (B,)
    n = torch.tensor(lengths, dtype=torch.int64)
    pos = torch.arange(W).unsqueeze(0)
    left_fb = (pos < torch.clamp(split, min=1).unsqueeze(1)).double() * mask
    right_fb = (pos >= torch.minimum(split, n - 1).unsqueeze(1)).double() * mask

    def pooled(weights, fallback):
        w = torch.where(weights.sum(dim=1, keepdim=True) > 0, weights, fallback)
        return (h * w.unsqueeze(1)).sum(dim=2) / w.sum(dim=1, keepdim=True)

    p_l = F.softmax(net.left(pooled(channels[:, CH_LEFT], left_fb)), dim=1)
    p_r = F.softmax(net.right(pooled(channels[:, CH_RIGHT], right_fb)), dim=1)
    c = torch.sigmoid(net.conf((h * mask.unsqueeze(1)).sum(dim=2) / n.unsqueeze(1))).squeeze(1)

    lo = torch.tensor(
        [ex.target_interval.start - ex.input.window.start for ex in batch], dtype=torch.int64
    )
    hi = torch.tensor(
        [ex.target_interval.end - ex.input.window.start for ex in batch], dtype=torch.int64
    )
    in_target = (pos >= lo.unsqueeze(1)) & (pos < hi.unsqueeze(1))
    mass = (p_b * in_target.double()).sum(dim=1)
    l_boundary = -torch.log(torch.clamp(mass, min=LOG_FLOOR))
    y_l = torch.tensor([ex.y_left for ex in batch], dtype=torch.int64)
    y_r = torch.tensor([ex.y_right for ex in batch], dtype=torch.int64)
    l_side = -(
        torch.log(torch.clamp(p_l.gather(1, y_l.unsqueeze(1)).squeeze(1), min=LOG_FLOOR))
        + torch.log(torch.clamp(p_r.gather(1, y_r.unsqueeze(1)).squeeze(1), min=LOG_FLOOR))
    )
    wb, ws, wc = LOSS_WEIGHTS
    loss = wb * l_boundary + ws * l_side
    for i, ex in enumerate(batch):
        if ex.penalties:
            vals = [
                _penalty_value(p_b[i, : lengths[i]], p_l[i], p_r[i], ex.input.window, pen)
                for pen in ex.penalties
            ]
            loss = loss + wc * F.one_hot(torch.tensor(i), B).double() * torch.stack(
                [v if torch.is_tensor(v) else torch.tensor(float(v)) for v in vals]
            ).mean()
    if with_conf_aux:
        hit = ((split >= lo) & (split < hi)).double()
        loss = loss + CONFIDENCE_AUX_WEIGHT * F.binary_cross_entropy(
            torch.clamp(c, 1e-7, 1 - 1e-7), hit, reduction="none"
        )
    return loss.mean()


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 16
    steps: int = 500
    seed: int = 0


def train(model: ModelParams, examples, config: TrainConfig = TrainConfig()) -> ModelParams:
    """Momentum-SGD over shuffled minibatches; returns a new snapshot
    with a bumped version. Divergence raises TrainingError carrying the
    last finite snapshot."""
    examples = list(examples)
    if not examples:
        raise ValueError("need at least one training example")
    net = model.to_module()
    opt = torch.optim.SGD(net.parameters(), lr=config.learning_rate, momentum=config.momentum)
    rng = np.random.default_rng(config.seed)
    last_good = ModelParams.from_module(net, model.version + 1, model.num_labels, model.dim)
    for step in range(config.steps):
        idx = rng.choice(len(examples), size=min(config.batch_size, len(examples)), replace=False)
        opt.zero_grad()
        loss = _batch_loss_t(net, [examples[i] for i in idx], with_conf_aux=True)
        if not torch.isfinite(loss):
            raise TrainingError(f"loss diverged at step {step}", last_good=last_good)
        loss.backward()
        opt.step()
        if all(torch.isfinite(p).all() for p in net.parameters()):
            last_good = ModelParams.from_module(net, model.version + 1, model.num_labels, model.dim)
        else:
            raise TrainingError(f"parameters diverged at step {step}", last_good=last_good)
    return last_good


def synthesize_scribble(
    gt: Segmentation, features: FeatureSequence, rng: np.random.Generator
) -> TrainExample:
    """Sample a training scribble from a ground-truth segmentation.

    A boundary is perturbed by a uniform offset in [-8, 8] and widened
    to a uniform width in [4, 24]; optional left/right support strokes
    land inside the flanking segments with probability 0.5 each.
    """
    boundaries = gt.boundaries().times
    if not boundaries:
        raise ValueError("single-segment ground truth has no boundary to scribble on")
    T = gt.num_frames
    bi = int(rng.integers(len(boundaries)))
    b = boundaries[bi]
    offset = int(rng.integers(-8, 9))
    width = int(rng.integers(4, 25))
    center = b + offset
    iplus = FrameInterval(center - width // 2, center + (width + 1) // 2).clip(0, T)
    if iplus.empty:
        t0 = min(max(center, 0), T - 1)
        iplus = FrameInterval(t0, t0 + 1)

    left_seg = next(seg for seg in gt.segments if seg[1] == b)
    right_seg = next(seg for seg in gt.segments if seg[0] == b)
    supports = [iplus]
    sides = []
    for seg, is_left in ((left_seg, True), (right_seg, False)):
        if rng.random() >= 0.5:
            continue
        lo, hi = (seg[0], min(seg[1], iplus.start)) if is_left else (max(seg[0], iplus.end), seg[1])
        if hi - lo < 2:
            continue
        w = int(rng.integers(2, min(hi - lo, 12) + 1))
        start = int(rng.integers(lo, hi - w + 1))
        sides.append((FrameInterval(start, start + w), is_left))
        supports.append(FrameInterval(start, start + w))

    hull = FrameInterval(min(s.start for s in supports), max(s.end for s in supports))
    window = make_window(hull, T)
    channels = np.zeros((3, len(window)), dtype=np.float64)
    channels[0, iplus.start - window.start : iplus.end - window.start] = 1.0
    for sup, is_left in sides:
        ch = CH_LEFT if is_left else CH_RIGHT
        channels[ch, sup.start - window.start : sup.end - window.start] = 1.0
        channels[ch, iplus.start - window.start : iplus.end - window.start] = 0.0

    enc = ScribbleEncoding(
        window=window,
        channels=channels,
        uncertain_interval=iplus,
        gesture=GestureKind.UNCERTAIN_BOUNDARY,
    )
    return TrainExample(
        input=assemble_input(features, enc),
        target_interval=iplus,
        y_left=left_seg[2],
        y_right=right_seg[2],
    )


# --- checkpoint I/O ---


def save_checkpoint(path, m: ModelParams) -> None:
    """MPK1 layout: magic, u32 version, u32 L, u32 D, u32 manifest byte
    length, UTF-8 JSON manifest of (name, shape) pairs, then the arrays
    as little-endian float32 in manifest order."""
    manifest = [[name, list(arr.shape)] for name, arr in m.state.items()]
    mbytes = json.dumps(manifest).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MPK_MAGIC)
    buf.write(struct.pack("<III", m.version, m.num_labels, m.dim))
    buf.write(struct.pack("<I", len(mbytes)))
    buf.write(mbytes)
    for name, _ in manifest:
        buf.write(np.ascontiguousarray(m.state[name], dtype="<f4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:4] != MPK_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    version, L, D, mlen = struct.unpack_from("<IIII", raw, 4)
    off = 20
    manifest = json.loads(raw[off : off + mlen].decode("utf-8"))
    off += mlen
    state = {}
    for name, shape in manifest:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if off + nbytes > len(raw):
            raise TruncationError(f"{path}: checkpoint payload truncated at {name}")
        state[name] = (
            np.frombuffer(raw, dtype="<f4", count=count, offset=off)
            .reshape(shape)
            .astype(np.float64)
        )
        off += nbytes
    if off != len(raw):
        raise TruncationError(f"{path}: {len(raw) - off} trailing bytes")
    return ModelParams(version=version, num_labels=L, dim=D, state=state)
