"""Linear-chain conditional random field: features, training, exact inference.

All inference is in log-space. Weights are laid out as one flat vector:
emission weights for (observation feature, label) pairs first, then a dense
(label, label) transition block. The feature index exposes every weight under
a printable feature string, so serialized models are self-describing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .annotation import AnnotatedSentence

MODEL_MAGIC = "crfmodel 1"
_SEP = "\t"  # never appears inside observation feature strings


class CrfError(ValueError):
    pass


class InvalidLabelError(CrfError):
    pass


class TrainingDataError(CrfError):
    pass


class ModelFormatError(CrfError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 2
    use_lemma: bool = True
    use_pos: bool = True
    use_dep: bool = True
    extra_channels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.window < 0:
            raise CrfError("window must be >= 0")
        object.__setattr__(self, "extra_channels", tuple(self.extra_channels))

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "use_lemma": self.use_lemma,
            "use_pos": self.use_pos,
            "use_dep": self.use_dep,
            "extra_channels": list(self.extra_channels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            window=d["window"],
            use_lemma=d["use_lemma"],
            use_pos=d["use_pos"],
            use_dep=d["use_dep"],
            extra_channels=tuple(d["extra_channels"]),
        )


@dataclass(frozen=True)
class TrainingExample:
    sentence: AnnotatedSentence
    gold: tuple[str, ...] | None = None
    aux: dict[str, tuple[str, ...]] | None = None

    def __post_init__(self):
        if self.gold is not None:
            object.__setattr__(self, "gold", tuple(self.gold))
            if len(self.gold) != len(self.sentence):
                raise TrainingDataError(
                    f"gold length {len(self.gold)} != sentence length {len(self.sentence)}"
                )
        if self.aux is not None:
            for name, values in self.aux.items():
                if len(values) != len(self.sentence):
                    raise TrainingDataError(f"aux channel {name!r} has wrong length")


@dataclass(frozen=True)
class TrainHyper:
    l2: float = 0.1
    max_iters: int = 300
    step0: float = 1.0
    seed: int = 0
    tolerance: float = 1e-6


def extract_features(
    sentence: AnnotatedSentence,
    position: int,
    aux: dict[str, tuple[str, ...]] | None,
    config: FeatureConfig,
) -> list[str]:
    """Observation features at one position, sorted for determinism."""
    tokens = sentence.tokens
    if not 0 <= position < len(tokens):
        raise CrfError(f"position {position} out of range")
    feats = set()

    def emit(offset: int) -> None:
        tag = f"{offset:+d}" if offset else "0"
        j = position + offset
        if 0 <= j < len(tokens):
            tok = tokens[j]
            feats.add(f"w{tag}={tok.text.lower()}")
            if config.use_lemma:
                feats.add(f"lemma{tag}={tok.lemma}")
            if config.use_pos:
                feats.add(f"pos{tag}={tok.pos}")
            if config.use_dep:
                feats.add(f"dep{tag}={tok.dep}")
        else:
            sentinel = "<BOS>" if j < 0 else "<EOS>"
            feats.add(f"w{tag}={sentinel}")
            if config.use_lemma:
                feats.add(f"lemma{tag}={sentinel}")
            if config.use_pos:
                feats.add(f"pos{tag}={sentinel}")
            if config.use_dep:
                feats.add(f"dep{tag}={sentinel}")

    emit(0)
    for d in range(1, config.window + 1):
        emit(-d)
        emit(d)
    for name in config.extra_channels:
        value = (aux or {}).get(name, ("<NONE>",) * len(tokens))[position]
        feats.add(f"{name}0={value}")
    return sorted(feats)


@dataclass
class CrfModel:
    labels: tuple[str, ...]
    obs_features: tuple[str, ...]
    weights: np.ndarray
    config: FeatureConfig
    _obs_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if len(set(self.labels)) != len(self.labels) or not self.labels:
            raise CrfError("label alphabet must be non-empty and duplicate-free")
        expected = len(self.obs_features) * len(self.labels) + len(self.labels) ** 2
        if self.weights.shape != (expected,):
            raise CrfError(f"weight vector has length {self.weights.shape}, expected {expected}")
        self._obs_index = {f: i for i, f in enumerate(self.obs_features)}

    @property
    def num_features(self) -> int:
        return len(self.weights)

    @property
    def feature_index(self) -> dict[str, int]:
        """Full feature-string -> weight-index map (emissions then transitions)."""
        y = len(self.labels)
        index = {}
        for fi, f in enumerate(self.obs_features):
            for yi, label in enumerate(self.labels):
                index[f"{f}{_SEP}y={label}"] = fi * y + yi
        base = len(self.obs_features) * y
        for a, la in enumerate(self.labels):
            for b, lb in enumerate(self.labels):
                index[f"trans{_SEP}{la}{_SEP}{lb}"] = base + a * y + b
        return index

    def _emission_matrix(self) -> np.ndarray:
        y = len(self.labels)
        return self.weights[: len(self.obs_features) * y].reshape(len(self.obs_features), y)

    def _transition_matrix(self) -> np.ndarray:
        y = len(self.labels)
        return self.weights[len(self.obs_features) * y :].reshape(y, y)

    def feature_rows(self, example: TrainingExample) -> list[np.ndarray]:
        """Per-position indices into obs_features; unseen features are dropped."""
        rows = []
        for i in range(len(example.sentence)):
            feats = extract_features(example.sentence, i, example.aux, self.config)
            rows.append(
                np.array([self._obs_index[f] for f in feats if f in self._obs_index], dtype=np.intp)
            )
        return rows

    def potentials(self, example: TrainingExample) -> tuple[np.ndarray, np.ndarray]:
        """(node potentials M x Y, transition potentials Y x Y)."""
        emit = self._emission_matrix()
        rows = self.feature_rows(example)
        node = np.zeros((len(rows), len(self.labels)))
        for i, r in enumerate(rows):
            if r.size:
                node[i] = emit[r].sum(axis=0)
        return node, self._transition_matrix()

    def label_ids(self, labels: tuple[str, ...] | list[str]) -> np.ndarray:
        try:
            return np.array([self.labels.index(l) for l in labels], dtype=np.intp)
        except ValueError as exc:
            raise InvalidLabelError(str(exc)) from exc


def _forward(node: np.ndarray, trans: np.ndarray) -> np.ndarray:
    alpha = np.empty_like(node)
    alpha[0] = node[0]
    for t in range(1, len(node)):
        alpha[t] = node[t] + logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    return alpha


def _backward(node: np.ndarray, trans: np.ndarray) -> np.ndarray:
    beta = np.zeros_like(node)
    for t in range(len(node) - 2, -1, -1):
        beta[t] = logsumexp(trans + node[t + 1] + beta[t + 1], axis=1)
    return beta


def log_partition(model: CrfModel, example: TrainingExample) -> tuple[float, np.ndarray, np.ndarray]:
    """log Z plus the forward (alpha) and backward (beta) tables."""
    node, trans = model.potentials(example)
    alpha = _forward(node, trans)
    beta = _backward(node, trans)
    return float(logsumexp(alpha[-1])), alpha, beta


def sequence_log_probability(
    model: CrfModel, example: TrainingExample, labels: tuple[str, ...] | list[str]
) -> float:
    if len(labels) != len(example.sentence):
        raise CrfError("label sequence length mismatch")
    ids = model.label_ids(labels)
    node, trans = model.potentials(example)
    score = node[np.arange(len(ids)), ids].sum() + trans[ids[:-1], ids[1:]].sum()
    log_z = float(logsumexp(_forward(node, trans)[-1]))
    return float(score - log_z)


def viterbi(model: CrfModel, example: TrainingExample) -> tuple[tuple[str, ...], float]:
    """Best label sequence and its log-probability; ties go to the lowest label index."""
    node, trans = model.potentials(example)
    m, y = node.shape
    delta = np.empty((m, y))
    back = np.zeros((m, y), dtype=np.intp)
    delta[0] = node[0]
    for t in range(1, m):
        cand = delta[t - 1][:, None] + trans
        back[t] = cand.argmax(axis=0)
        delta[t] = node[t] + cand[back[t], np.arange(y)]
    best = int(delta[-1].argmax())
    path = [best]
    for t in range(m - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    log_z = float(logsumexp(_forward(node, trans)[-1]))
    labels = tuple(model.labels[i] for i in path)
    return labels, float(delta[-1, best] - log_z)


def marginal_confidence(
    model: CrfModel, example: TrainingExample, labels: tuple[str, ...] | list[str]
) -> float:
    return float(min(1.0, np.exp(sequence_log_probability(model, example, labels))))


def _example_terms(
    model: CrfModel,
    rows: list[np.ndarray],
    gold_ids: np.ndarray,
    want_grad: bool,
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Per-example log-likelihood and (optionally) emission/transition gradients."""
    y = len(model.labels)
    emit = model._emission_matrix()
    trans = model._transition_matrix()
    node = np.zeros((len(rows), y))
    for i, r in enumerate(rows):
        if r.size:
            node[i] = emit[r].sum(axis=0)
    alpha = _forward(node, trans)
    log_z = float(logsumexp(alpha[-1]))
    idx = np.arange(len(rows))
    score = node[idx, gold_ids].sum() + trans[gold_ids[:-1], gold_ids[1:]].sum()
    ll = float(score - log_z)
    if not want_grad:
        return ll, None, None

    beta = _backward(node, trans)
    mu = np.exp(alpha + beta - log_z)
    g_emit = np.zeros_like(emit)
    for i, r in enumerate(rows):
        if r.size:
            np.add.at(g_emit, (r, gold_ids[i]), 1.0)
            np.add.at(g_emit, r, -mu[i])
    g_trans = np.zeros_like(trans)
    np.add.at(g_trans, (gold_ids[:-1], gold_ids[1:]), 1.0)
    for t in range(1, len(rows)):
        g_trans -= np.exp(alpha[t - 1][:, None] + trans + node[t] + beta[t] - log_z)
    return ll, g_emit, g_trans


def log_likelihood_and_gradient(
    model: CrfModel, corpus: list[TrainingExample], l2: float = 0.0
) -> tuple[float, np.ndarray]:
    """L2-penalized log-likelihood and its gradient in model-weight layout."""
    if not corpus:
        raise TrainingDataError("corpus is empty")
    prepared = []
    for ex in corpus:
        if ex.gold is None:
            raise TrainingDataError("training example has no gold labels")
        prepared.append((model.feature_rows(ex), model.label_ids(ex.gold)))
    return _objective(model, prepared, l2, want_grad=True)


def _objective(
    model: CrfModel,
    prepared: list[tuple[list[np.ndarray], np.ndarray]],
    l2: float,
    want_grad: bool,
) -> tuple[float, np.ndarray]:
    total = 0.0
    y = len(model.labels)
    g_emit = np.zeros((len(model.obs_features), y))
    g_trans = np.zeros((y, y))
    for rows, gold_ids in prepared:
        ll, ge, gt = _example_terms(model, rows, gold_ids, want_grad)
        total += ll
        if want_grad:
            g_emit += ge
            g_trans += gt
    total -= 0.5 * l2 * float(model.weights @ model.weights)
    if not want_grad:
        return total, np.empty(0)
    grad = np.concatenate([g_emit.ravel(), g_trans.ravel()]) - l2 * model.weights
    return total, grad


def train(
    corpus: list[TrainingExample],
    labels: tuple[str, ...] | list[str],
    config: FeatureConfig,
    hyper: TrainHyper = TrainHyper(),
) -> CrfModel:
    """Batch gradient ascent with backtracking line search; deterministic."""
    if not corpus:
        raise TrainingDataError("corpus is empty")
    labels = tuple(labels)
    for j, ex in enumerate(corpus):
        if ex.gold is None:
            raise TrainingDataError(f"example {j} has no gold labels")
        bad = set(ex.gold) - set(labels)
        if bad:
            raise TrainingDataError(f"example {j} uses labels outside the alphabet: {sorted(bad)}")

    obs = set()
    for ex in corpus:
        for i in range(len(ex.sentence)):
            obs.update(extract_features(ex.sentence, i, ex.aux, config))
    obs_features = tuple(sorted(obs))

    model = CrfModel(
        labels=labels,
        obs_features=obs_features,
        weights=np.zeros(len(obs_features) * len(labels) + len(labels) ** 2),
        config=config,
    )
    prepared = [(model.feature_rows(ex), model.label_ids(ex.gold)) for ex in corpus]

    step = hyper.step0
    obj, _ = _objective(model, prepared, hyper.l2, want_grad=False)
    for _ in range(hyper.max_iters):
        obj, grad = _objective(model, prepared, hyper.l2, want_grad=True)
        gnorm2 = float(grad @ grad)
        if gnorm2 < 1e-18:
            break
        base = model.weights
        t = min(step * 2.0, hyper.step0 * 4.0)
        accepted = False
        for _ in range(40):
            model.weights = base + t * grad
            new_obj, _ = _objective(model, prepared, hyper.l2, want_grad=False)
            if new_obj >= obj + 1e-4 * t * gnorm2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            model.weights = base
            break
        step = t
        if new_obj - obj < hyper.tolerance:
            obj = new_obj
            break
        obj = new_obj
    return model


def save_model(model: CrfModel, path: str | Path) -> None:
    """Versioned header + JSON metadata + little-endian float64 weights."""
    meta = {
        "labels": list(model.labels),
        "config": model.config.to_dict(),
        "num_weights": int(model.num_features),
        "features": [[f, k] for f, k in model.feature_index.items()],
    }
    with open(path, "wb") as fh:
        fh.write((MODEL_MAGIC + "\n").encode())
        fh.write((json.dumps(meta, sort_keys=True) + "\n").encode())
        fh.write(model.weights.astype("<f8").tobytes())


def load_model(path: str | Path) -> CrfModel:
    with open(path, "rb") as fh:
        header = fh.readline().decode().rstrip("\n")
        if header != MODEL_MAGIC:
            raise ModelFormatError(f"unrecognized model header {header!r}")
        meta = json.loads(fh.readline().decode())
        raw = fh.read()
    weights = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if len(weights) != meta["num_weights"]:
        raise ModelFormatError("weight block length does not match header")
    labels = tuple(meta["labels"])
    y = len(labels)
    obs_count = (meta["num_weights"] - y * y) // y
    obs_features: list[str | None] = [None] * obs_count
    for entry, k in meta["features"]:
        if k < obs_count * y and entry.endswith(f"{_SEP}y={labels[k % y]}"):
            obs_features[k // y] = entry[: -len(f"{_SEP}y={labels[k % y]}")]
    if any(f is None for f in obs_features):
        raise ModelFormatError("feature index does not cover the emission block")
    return CrfModel(
        labels=labels,
        obs_features=tuple(obs_features),  # type: ignore[arg-type]
        weights=weights,
        config=FeatureConfig.from_dict(meta["config"]),
    )
