"""Attention-based path-context classifier (code2vec layout) in plain numpy.

Per context ``i`` with embeddings ``x_i = [tok(start); path(p); tok(end)]``::

    c_i    = tanh(W x_i)               W: d x 3d
    alpha  = softmax_i(a . c_i)        a: d
    v      = sum_i alpha_i c_i
    output = softmax(U v)              U: C x d

Row ``T`` of the token table and row ``P`` of the path table are the
out-of-vocabulary embeddings.
"""

import json
import logging
import struct
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from codeauthor.errors import ConfigurationError, DivergenceError, FormatError
from codeauthor.representation import DEFAULT_MAX_CONTEXTS, ContextBag, subsample_contexts

log = logging.getLogger(__name__)

PARAM_ORDER = ("token_embeddings", "path_embeddings", "W", "a", "U")
_MAGIC = b"CANNV1\x00\x00"


@dataclass(frozen=True)
class NnConfig:
    embedding_dim: int = 128
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 32
    max_contexts: int = DEFAULT_MAX_CONTEXTS
    seed: int = 0
    dropout_keep: float = 0.75

    def __post_init__(self):
        if self.embedding_dim < 1:
            raise ConfigurationError("embedding_dim must be >= 1")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.max_contexts < 1:
            raise ConfigurationError("max_contexts must be >= 1")
        if not 0 < self.dropout_keep <= 1:
            raise ConfigurationError("dropout_keep must be in (0, 1]")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")


@dataclass
class TrainReport:
    losses: List[float] = field(default_factory=list)
    heldout_accuracy: List[Optional[float]] = field(default_factory=list)
    final_epoch: int = -1


class NnModel:
    def __init__(self, params: Dict[str, np.ndarray], config: NnConfig, vocab_digest: str = ""):
        self.params = params
        self.config = config
        self.vocab_digest = vocab_digest

    @classmethod
    def initialize(cls, n_tokens: int, n_paths: int, n_classes: int, config: NnConfig,
                   vocab_digest: str = "") -> "NnModel":
        """Fresh model for ``n_tokens``/``n_paths`` known ids (UNK rows added here)."""
        d = config.embedding_dim
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x6e6e]))
        glorot = lambda fan_out, fan_in: rng.uniform(  # noqa: E731
            -np.sqrt(6.0 / (fan_in + fan_out)), np.sqrt(6.0 / (fan_in + fan_out)), size=(fan_out, fan_in))
        params = {
            "token_embeddings": rng.normal(0.0, 1.0, size=(n_tokens + 1, d)),
            "path_embeddings": rng.normal(0.0, 1.0, size=(n_paths + 1, d)),
            "W": glorot(d, 3 * d),
            "a": rng.normal(0.0, 1.0 / np.sqrt(d), size=d),
            "U": glorot(n_classes, d),
        }
        return cls(params, config, vocab_digest)

    @property
    def n_classes(self) -> int:
        return self.params["U"].shape[0]

    @property
    def embedding_dim(self) -> int:
        return self.params["W"].shape[0]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "NnModel":
        return NnModel({k: v.copy() for k, v in self.params.items()}, self.config, self.vocab_digest)

    # -- inference -----------------------------------------------------

    def forward(self, bag: ContextBag) -> Tuple[np.ndarray, np.ndarray]:
        """(author distribution, attention weights) for one non-empty bag."""
        if len(bag) == 0:
            raise ValueError("empty bag: use predict_proba, which falls back to a uniform distribution")
        probs, cache = _forward_batch(self.params, [bag.contexts], keep_mask=None)
        n = len(bag)
        return probs[0], cache["alpha"][0, :n]

    def predict_proba(self, bags: Sequence[ContextBag], batch_size: int = 256) -> np.ndarray:
        out = np.full((len(bags), self.n_classes), 1.0 / self.n_classes)
        nonempty = [i for i, b in enumerate(bags) if len(b) > 0]
        if len(nonempty) < len(bags):
            warnings.warn(f"{len(bags) - len(nonempty)} empty bag(s) given a uniform distribution",
                          stacklevel=2)
        for lo in range(0, len(nonempty), batch_size):
            chunk = nonempty[lo:lo + batch_size]
            probs, _ = _forward_batch(self.params, [bags[i].contexts for i in chunk], keep_mask=None)
            out[chunk] = probs
        return out

    def predict(self, bags: Sequence[ContextBag]) -> np.ndarray:
        return np.argmax(self.predict_proba(bags), axis=1)

    # -- serialization ---------------------------------------------------

    def save(self, path) -> None:
        header = {
            "config": asdict(self.config),
            "vocab_digest": self.vocab_digest,
            "shapes": {k: list(self.params[k].shape) for k in PARAM_ORDER},
            "dtype": "<f8",
            "order": list(PARAM_ORDER),
        }
        blob = json.dumps(header).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for k in PARAM_ORDER:
                fh.write(np.ascontiguousarray(self.params[k], dtype="<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path, vocab_digest: Optional[str] = None) -> "NnModel":
        with open(path, "rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise FormatError(f"{path}: not a network model file")
            (length,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(length).decode("utf-8"))
            params = {}
            for k in header["order"]:
                shape = tuple(header["shapes"][k])
                count = int(np.prod(shape))
                raw = fh.read(8 * count)
                if len(raw) != 8 * count:
                    raise FormatError(f"{path}: truncated parameter block {k}")
                params[k] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
        if vocab_digest is not None and header["vocab_digest"] != vocab_digest:
            raise FormatError(f"{path}: vocabulary hash mismatch")
        return cls(params, NnConfig(**header["config"]), header["vocab_digest"])


def expected_parameter_count(n_tokens: int, n_paths: int, n_classes: int, d: int) -> int:
    """(T'+P')d + 3d^2 + d + Cd with T' = T+1, P' = P+1."""
    return (n_tokens + 1 + n_paths + 1) * d + 3 * d * d + d + n_classes * d


def _pad(contexts: Sequence[np.ndarray]):
    B = len(contexts)
    L = max(len(c) for c in contexts)
    ids = np.zeros((B, L, 3), dtype=np.int64)
    mask = np.zeros((B, L), dtype=bool)
    for b, c in enumerate(contexts):
        ids[b, :len(c)] = c
        mask[b, :len(c)] = True
    return ids, mask


def _softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _forward_batch(params, contexts, keep_mask):
    ids, mask = _pad(contexts)
    te, pe = params["token_embeddings"], params["path_embeddings"]
    X = np.concatenate([te[ids[..., 0]], pe[ids[..., 1]], te[ids[..., 2]]], axis=-1)  # B L 3d
    if keep_mask is not None:
        X = X * keep_mask
    Cc = np.tanh(X @ params["W"].T)  # B L d
    scores = np.where(mask, Cc @ params["a"], -np.inf)
    alpha = _softmax(scores, axis=1)  # B L
    v = np.einsum("bl,bld->bd", alpha, Cc)
    probs = _softmax(v @ params["U"].T, axis=1)
    return probs, {"ids": ids, "mask": mask, "X": X, "C": Cc, "alpha": alpha, "v": v}


def _loss_and_grads(params, contexts, labels, keep_mask=None):
    """Mean cross-entropy over the batch and its gradient w.r.t. every parameter."""
    probs, cache = _forward_batch(params, contexts, keep_mask)
    B = len(contexts)
    labels = np.asarray(labels)
    picked = probs[np.arange(B), labels]
    loss = float(-np.mean(np.log(picked)))

    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    v, Cc, alpha, X = cache["v"], cache["C"], cache["alpha"], cache["X"]
    dU = dlogits.T @ v
    dv = dlogits @ params["U"]  # B d
    dalpha = np.einsum("bld,bd->bl", Cc, dv)
    dC = alpha[..., None] * dv[:, None, :]
    dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
    da = np.einsum("bl,bld->d", dscores, Cc)
    dC += dscores[..., None] * params["a"]
    dZ = dC * (1.0 - Cc * Cc)
    d = params["W"].shape[0]
    dW = dZ.reshape(-1, d).T @ X.reshape(-1, 3 * d)
    dX = dZ @ params["W"]
    if keep_mask is not None:
        dX = dX * keep_mask
    ids, mask = cache["ids"], cache["mask"]
    dX = dX[mask]
    sel = ids[mask]
    dte = np.zeros_like(params["token_embeddings"])
    dpe = np.zeros_like(params["path_embeddings"])
    np.add.at(dte, sel[:, 0], dX[:, :d])
    np.add.at(dpe, sel[:, 1], dX[:, d:2 * d])
    np.add.at(dte, sel[:, 2], dX[:, 2 * d:])
    grads = {"token_embeddings": dte, "path_embeddings": dpe, "W": dW, "a": da, "U": dU}
    return loss, grads


def forward(model: NnModel, bag: ContextBag):
    return model.forward(bag)


def train_nn(bags: Sequence[ContextBag], config: NnConfig, n_tokens: int, n_paths: int,
             n_classes: Optional[int] = None, heldout: Sequence[ContextBag] = (),
             vocab_digest: str = "", model: Optional[NnModel] = None) -> Tuple[NnModel, TrainReport]:
    """Mini-batch gradient descent on mean cross-entropy.

    ``n_tokens``/``n_paths`` are the vocabulary sizes T and P; ids equal to
    them denote out-of-vocabulary items.
    """
    usable = [b for b in bags if len(b) > 0]
    if len(usable) < len(bags):
        warnings.warn(f"skipping {len(bags) - len(usable)} empty training bag(s)", stacklevel=2)
    labels = np.array([b.label for b in usable], dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise ValueError("training needs at least two classes")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    if model is None:
        model = NnModel.initialize(n_tokens, n_paths, n_classes, config, vocab_digest)
    params = model.params
    d = config.embedding_dim
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7472]))
    report = TrainReport()
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(usable))
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            contexts = [
                subsample_contexts(usable[i], config.max_contexts, int(rng.integers(2**31))).contexts
                for i in batch
            ]
            keep = None
            if config.dropout_keep < 1.0:
                L = max(len(c) for c in contexts)
                keep = (rng.random((len(batch), L, 3 * d)) < config.dropout_keep) / config.dropout_keep
            loss, grads = _loss_and_grads(params, contexts, labels[batch], keep)
            if not np.isfinite(loss):
                raise DivergenceError(step, loss)
            if config.learning_rate:
                for k in PARAM_ORDER:
                    params[k] -= config.learning_rate * grads[k]
            epoch_loss += loss * len(batch)
            step += 1
        report.losses.append(epoch_loss / len(usable))
        if heldout:
            pred = model.predict(heldout)
            truth = np.array([b.label for b in heldout])
            report.heldout_accuracy.append(float(np.mean(pred == truth)))
        else:
            report.heldout_accuracy.append(None)
        report.final_epoch = epoch
        log.debug("epoch %d loss %.5f", epoch, report.losses[-1])
    return model, report


def gradient_check(model: NnModel, bag: ContextBag, label: int, step: float = 1e-5,
                   floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error is ``|g - g_fd| / max(|g|, |g_fd|, floor)``; the floor keeps
    entries whose true gradient is ~0 from dividing round-off by round-off.
    """
    params = {k: v.astype(np.float64).copy() for k, v in model.params.items()}
    _, grads = _loss_and_grads(params, [bag.contexts], [label])
    worst = 0.0
    for k in PARAM_ORDER:
        p = params[k]
        flat = p.reshape(-1)
        g = grads[k].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = _loss_and_grads(params, [bag.contexts], [label])
            flat[i] = orig - step
            down, _ = _loss_and_grads(params, [bag.contexts], [label])
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            err = abs(g[i] - numeric) / max(abs(g[i]), abs(numeric), floor)
            worst = max(worst, err)
    return worst
