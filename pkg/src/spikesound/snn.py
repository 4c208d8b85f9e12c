"""Spiking classifier: four bias-free linear layers with LIF neurons.

The network integrates signed input currents frame by frame, accumulates
output-layer spike counts as class scores, and trains with backpropagation
through time using a fast-sigmoid surrogate derivative at every spike
nonlinearity (including the reset path).  Everything is plain numpy so a
fixed seed fully determines training.

The same forward/backward code also runs in a "smooth" mode where the hard
spike is replaced by the surrogate's primitive; in that mode the computed
gradients are exact, which is what the finite-difference checks verify.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError

MODEL_MAGIC = b"SPKN1"


@dataclass(frozen=True)
class SnnConfig:
    input_size: int = 128
    hidden_sizes: tuple[int, ...] = (128, 128, 128)
    output_size: int = 2
    beta: float = 0.9
    theta: float = 1.0
    surrogate_slope: float = 25.0
    lr: float = 0.01
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if min((self.input_size, self.output_size, *self.hidden_sizes)) < 1:
            raise ValueError("layer sizes must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if self.theta <= 0.0:
            raise ValueError("theta must be > 0")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_size, *self.hidden_sizes, self.output_size)


@dataclass
class LifState:
    """Membrane state of one LIF population (any array shape)."""

    membrane: np.ndarray
    beta: float
    theta: float


def fast_sigmoid(v: np.ndarray, slope: float) -> np.ndarray:
    """Smooth stand-in for the spike function: v / (1 + slope |v|)."""
    return v / (1.0 + slope * np.abs(v))


def surrogate_grad(v: np.ndarray, slope: float) -> np.ndarray:
    """Derivative of fast_sigmoid: 1 / (1 + slope |v|)^2."""
    return 1.0 / (1.0 + slope * np.abs(v)) ** 2


def _lif_update(membrane, current, beta, theta, smooth=False, slope=25.0):
    u = beta * membrane + current
    if smooth:
        s = fast_sigmoid(u - theta, slope)
    else:
        s = (u >= theta).astype(np.float64)
    return s, u, u - s * theta


def lif_step(state: LifState, input_current: np.ndarray) -> tuple[np.ndarray, LifState]:
    """One leaky integrate-and-fire step with reset by subtraction.

    U' = beta U + I; spikes where U' >= theta; new membrane U' - spike*theta.
    """
    current = np.asarray(input_current, dtype=np.float64)
    if current.shape != state.membrane.shape:
        raise ValueError(
            f"input shape {current.shape} != membrane shape {state.membrane.shape}"
        )
    if not np.all(np.isfinite(current)):
        raise ValueError("non-finite input current")
    s, _, new_mem = _lif_update(state.membrane, current, state.beta, state.theta)
    return s, LifState(membrane=new_mem, beta=state.beta, theta=state.theta)


@dataclass
class SpikingNet:
    weights: list[np.ndarray]  # each (n_in, n_out), bias-free
    config: SnnConfig

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def init_net(cfg: SnnConfig, rng: np.random.Generator | None = None) -> SpikingNet:
    """Uniform +/- sqrt(1/fan_in) initialization from the config seed."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    sizes = cfg.layer_sizes
    weights = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(1.0 / n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
    return SpikingNet(weights=weights, config=cfg)


@dataclass
class _ForwardCache:
    inputs: np.ndarray                # (batch, channels, frames)
    pre_reset: list[np.ndarray]       # per layer: (frames, batch, n)
    spikes: list[np.ndarray]          # per layer: (frames, batch, n)
    counts: np.ndarray                # (batch, n_classes)


def _forward_batch(net: SpikingNet, x: np.ndarray, smooth: bool = False,
                   keep_cache: bool = True) -> _ForwardCache:
    cfg = net.config
    batch, channels, frames = x.shape
    if channels != cfg.input_size:
        raise ValueError(f"expected {cfg.input_size} input channels, got {channels}")
    mems = [np.zeros((batch, w.shape[1])) for w in net.weights]
    pre = [np.empty((frames, batch, w.shape[1])) for w in net.weights] if keep_cache else None
    spk = [np.empty((frames, batch, w.shape[1])) for w in net.weights] if keep_cache else None
    counts = np.zeros((batch, net.weights[-1].shape[1]))
    for t in range(frames):
        cur = x[:, :, t]
        for l, w in enumerate(net.weights):
            s, u, mems[l] = _lif_update(
                mems[l], cur @ w, cfg.beta, cfg.theta, smooth, cfg.surrogate_slope
            )
            if keep_cache:
                pre[l][t] = u
                spk[l][t] = s
            cur = s
        counts += cur
    return _ForwardCache(inputs=x, pre_reset=pre, spikes=spk, counts=counts)


def forward(net: SpikingNet, spike_input: np.ndarray,
            smooth: bool = False) -> tuple[np.ndarray, list[np.ndarray]]:
    """Run one clip through the network.

    spike_input is (channels, frames) with signed values fed directly as
    input currents.  Returns (output spike counts per class, per-layer spike
    records of shape (frames, n_neurons)).
    """
    spike_input = np.asarray(spike_input, dtype=np.float64)
    if not np.all(np.isfinite(spike_input)):
        raise ValueError("non-finite spike input")
    cache = _forward_batch(net, spike_input[None], smooth=smooth)
    return cache.counts[0], [s[:, 0, :] for s in cache.spikes]


def _backward_batch(net: SpikingNet, cache: _ForwardCache,
                    d_counts: np.ndarray) -> list[np.ndarray]:
    """Gradients of the loss w.r.t. every weight matrix.

    Applies the surrogate derivative at each spike nonlinearity and through
    the subtraction reset; for a smooth-mode forward these gradients are
    exact.
    """
    cfg = net.config
    frames = cache.inputs.shape[2]
    n_layers = net.n_layers
    grads = [np.zeros_like(w) for w in net.weights]
    carry = [np.zeros_like(cache.pre_reset[l][0]) for l in range(n_layers)]
    d_pre = [None] * n_layers
    for t in range(frames - 1, -1, -1):
        for l in range(n_layers - 1, -1, -1):
            if l == n_layers - 1:
                d_spike = d_counts
            else:
                d_spike = d_pre[l + 1] @ net.weights[l + 1].T
            g = surrogate_grad(cache.pre_reset[l][t] - cfg.theta, cfg.surrogate_slope)
            d_pre[l] = d_spike * g + carry[l] * (1.0 - cfg.theta * g)
            prev = cache.spikes[l - 1][t] if l > 0 else cache.inputs[:, :, t]
            grads[l] += prev.T @ d_pre[l]
            carry[l] = cfg.beta * d_pre[l]
    return grads


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(counts: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy on spike counts as logits, and its gradient."""
    p = _softmax(counts)
    n = counts.shape[0]
    loss = float(-np.mean(np.log(p[np.arange(n), labels] + 1e-300)))
    d = p.copy()
    d[np.arange(n), labels] -= 1.0
    return loss, d / n


def smooth_loss_and_grads(net: SpikingNet, x: np.ndarray,
                          labels: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Loss and analytic gradients of the smooth-mode network.

    Used by the finite-difference consistency checks: with the spike
    replaced by the surrogate's primitive, the backward pass is exact.
    """
    cache = _forward_batch(net, x, smooth=True)
    loss, d_counts = cross_entropy(cache.counts, labels)
    return loss, _backward_batch(net, cache, d_counts)


@dataclass
class _AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0


def _adam_update(net: SpikingNet, grads: list[np.ndarray], state: _AdamState,
                 lr: float, b1: float = 0.9, b2: float = 0.999,
                 eps: float = 1e-8) -> None:
    state.step += 1
    for w, g, m, v in zip(net.weights, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**state.step)
        v_hat = v / (1 - b2**state.step)
        w -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class ClipDataset:
    """Fixed-shape clips ready for the network."""

    inputs: np.ndarray  # (n_clips, channels, frames)
    labels: np.ndarray  # (n_clips,) int class indices
    class_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class TrainHistory:
    rows: list[tuple[int, str, float, float]] = field(default_factory=list)

    def add(self, epoch: int, split: str, loss: float, macro_acc: float) -> None:
        self.rows.append((epoch, split, loss, macro_acc))


def train(net: SpikingNet, train_set: ClipDataset,
          cfg: SnnConfig | None = None) -> tuple[SpikingNet, TrainHistory]:
    """Adam + BPTT training on cross-entropy over output spike counts.

    Deterministic given cfg.seed (shuffling and init both derive from it).
    Raises NumericError if the loss goes non-finite and DataError if some
    class has no training samples.
    """
    cfg = cfg or net.config
    labels = np.asarray(train_set.labels)
    if len(labels) == 0:
        raise DataError("empty training set")
    present = np.unique(labels)
    if len(present) < len(train_set.class_names):
        missing = set(range(len(train_set.class_names))) - set(present.tolist())
        names = [train_set.class_names[i] for i in sorted(missing)]
        raise DataError(f"classes with no training samples: {names}")
    rng = np.random.default_rng([cfg.seed, 1])
    opt = _AdamState(m=[np.zeros_like(w) for w in net.weights],
                     v=[np.zeros_like(w) for w in net.weights])
    history = TrainHistory()
    n = len(train_set)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total_loss = 0.0
        preds = np.empty(n, dtype=np.int64)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x = train_set.inputs[idx]
            y = labels[idx]
            cache = _forward_batch(net, x)
            loss, d_counts = cross_entropy(cache.counts, y)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}"
                )
            grads = _backward_batch(net, cache, d_counts)
            _adam_update(net, grads, opt, cfg.lr)
            if not all(np.all(np.isfinite(w)) for w in net.weights):
                raise NumericError(
                    f"non-finite weights at epoch {epoch}, batch starting {start}"
                )
            total_loss += loss * len(idx)
            preds[idx] = np.argmax(cache.counts, axis=1)
        acc = _macro_from_predictions(labels, preds, len(train_set.class_names))
        history.add(epoch, "train", total_loss / n, acc)
    return net, history


def _macro_from_predictions(labels: np.ndarray, preds: np.ndarray,
                            n_classes: int) -> float:
    recalls = []
    for c in range(n_classes):
        mask = labels == c
        if mask.any():
            recalls.append(float(np.mean(preds[mask] == c)))
    return float(np.mean(recalls)) if recalls else 0.0


def evaluate_macro(net: SpikingNet,
                   test_set: ClipDataset) -> tuple[float, dict[str, float]]:
    """Macro accuracy (mean per-class recall) and the per-class recalls.

    Prediction is the argmax of output spike counts; ties resolve to the
    lowest class index.
    """
    if len(test_set) == 0:
        raise DataError("empty test set")
    labels = np.asarray(test_set.labels)
    preds = np.empty(len(labels), dtype=np.int64)
    bs = max(net.config.batch_size, 1)
    for start in range(0, len(labels), bs):
        cache = _forward_batch(net, test_set.inputs[start : start + bs],
                               keep_cache=False)
        preds[start : start + len(cache.counts)] = np.argmax(cache.counts, axis=1)
    recalls = {}
    for c, name in enumerate(test_set.class_names):
        mask = labels == c
        if not mask.any():
            raise DataError(f"test class {name!r} is empty")
        recalls[name] = float(np.mean(preds[mask] == c))
    macro = float(np.mean(list(recalls.values())))
    return macro, recalls


# ---------------------------------------------------------------------------
# Evaluation protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolSample:
    inputs: np.ndarray  # (channels, frames)
    label: str
    fold: int | None = None
    split: str = "train"


@dataclass
class FoldResult:
    fold: int | None
    macro_acc: float
    per_class_recall: dict[str, float]


@dataclass
class ProtocolResult:
    per_fold: list[FoldResult]
    mean_macro_acc: float
    histories: list[TrainHistory]


def _to_dataset(samples: list[ProtocolSample],
                class_names: tuple[str, ...]) -> ClipDataset:
    index = {name: i for i, name in enumerate(class_names)}
    inputs = np.stack([s.inputs for s in samples])
    labels = np.array([index[s.label] for s in samples], dtype=np.int64)
    return ClipDataset(inputs=inputs, labels=labels, class_names=class_names)


def run_protocol(samples: list[ProtocolSample], cfg: SnnConfig) -> ProtocolResult:
    """Cross-validation when folds are present, otherwise train/test holdout.

    For k folds: train on k-1, test on the held-out fold, average the macro
    accuracies.  A fresh net is initialized per fold from (cfg.seed, fold).
    """
    if not samples:
        raise DataError("no samples provided")
    class_names = tuple(sorted({s.label for s in samples}))
    cfg = SnnConfig(**{**asdict(cfg), "output_size": len(class_names),
                       "input_size": samples[0].inputs.shape[0]})
    folds = sorted({s.fold for s in samples if s.fold is not None})
    results: list[FoldResult] = []
    histories: list[TrainHistory] = []
    if folds:
        if any(s.fold is None for s in samples):
            raise DataError("mixed fold/no-fold samples: manifest does not match protocol")
        for i, held_out in enumerate(folds):
            train_part = [s for s in samples if s.fold != held_out]
            test_part = [s for s in samples if s.fold == held_out]
            net = init_net(cfg, np.random.default_rng([cfg.seed, i]))
            net, hist = train(net, _to_dataset(train_part, class_names), cfg)
            acc, recalls = evaluate_macro(net, _to_dataset(test_part, class_names))
            results.append(FoldResult(fold=held_out, macro_acc=acc,
                                      per_class_recall=recalls))
            histories.append(hist)
    else:
        train_part = [s for s in samples if s.split == "train"]
        test_part = [s for s in samples if s.split == "test"]
        if not train_part or not test_part:
            raise DataError("holdout protocol needs both train and test samples")
        net = init_net(cfg, np.random.default_rng([cfg.seed, 0]))
        net, hist = train(net, _to_dataset(train_part, class_names), cfg)
        acc, recalls = evaluate_macro(net, _to_dataset(test_part, class_names))
        results.append(FoldResult(fold=None, macro_acc=acc, per_class_recall=recalls))
        histories.append(hist)
    mean_acc = float(np.mean([r.macro_acc for r in results]))
    return ProtocolResult(per_fold=results, mean_macro_acc=mean_acc,
                          histories=histories)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(net: SpikingNet, path: str | Path) -> None:
    """SPKN1 container: magic, u32 JSON length, config JSON, then row-major
    float32 weight matrices in layer order."""
    blob = json.dumps(
        {"config": asdict(net.config)}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for w in net.weights:
            fh.write(w.astype("<f4").tobytes(order="C"))


def load_checkpoint(path: str | Path) -> SpikingNet:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MODEL_MAGIC:
            raise DataError(f"bad checkpoint magic in {path}: {magic!r}")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(blob_len).decode("utf-8"))
        raw = meta["config"]
        raw["hidden_sizes"] = tuple(raw["hidden_sizes"])
        cfg = SnnConfig(**raw)
        weights = []
        sizes = cfg.layer_sizes
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            buf = fh.read(n_in * n_out * 4)
            weights.append(
                np.frombuffer(buf, dtype="<f4").reshape(n_in, n_out).astype(np.float64)
            )
    return SpikingNet(weights=weights, config=cfg)
