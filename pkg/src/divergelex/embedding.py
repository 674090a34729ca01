"""Skip-gram negative-sampling embedding spaces.

Trains dense word vectors from token corpora and answers cosine-similarity
and nearest-neighbor queries over them. Training is float64 throughout and
bit-reproducible for a fixed seed in single-threaded mode.
"""

from __future__ import annotations

import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

log = logging.getLogger(__name__)

from .corpus import Vocabulary, build_vocabulary
from .errors import (
    EmptyVocabularyError,
    MalformedFileError,
    NonFiniteLossError,
    UnknownWordError,
    ZeroVectorError,
)

# Pairs per vectorized SGD update. Gradients within one batch are computed
# against the matrices as of the batch start, so the batch is capped near the
# vocabulary size to keep per-row accumulation (and the effective step) small.
UPDATE_BATCH_PAIRS = 1024


def _batch_size(vocab_size: int) -> int:
    return min(UPDATE_BATCH_PAIRS, max(4, vocab_size))

# The learning rate decays linearly to this fraction of its initial value.
FINAL_LR_FRACTION = 1e-4

SIDECAR_MAGIC = b"DVLX"
SIDECAR_VERSION = 1
SIDECAR_SUFFIX = ".dvlx"


@dataclass(frozen=True)
class TrainingConfig:
    dimension: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    initial_learning_rate: float = 0.025
    min_count: int = 5
    subsample_threshold: float = 1e-4
    unigram_power: float = 0.75
    seed: int = 1

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        for name in ("window", "negatives", "epochs", "min_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.initial_learning_rate <= 0:
            raise ValueError("initial_learning_rate must be > 0")
        if self.subsample_threshold < 0:
            raise ValueError("subsample_threshold must be >= 0")
        if self.unigram_power < 0:
            raise ValueError("unigram_power must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Neighbor:
    token: str
    similarity: float


@dataclass
class EmbeddingSpace:
    """A vocabulary plus trained input/output vector matrices."""

    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    space_tag: str = "space"
    config: TrainingConfig | None = None
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        self._token_array = None
        self._input_norms = None

    @property
    def dimension(self) -> int:
        return self.input_vectors.shape[1]

    def vector(self, word: str) -> np.ndarray:
        if word not in self.vocab:
            raise UnknownWordError(f"{word!r} not in space {self.space_tag!r}")
        return self.input_vectors[self.vocab.index(word)]

    def validate(self) -> None:
        vsize = len(self.vocab)
        if self.input_vectors.shape != (vsize, self.dimension):
            raise ValueError("input matrix shape does not match vocabulary")
        if self.output_vectors.shape != self.input_vectors.shape:
            raise ValueError("output matrix shape does not match input matrix")
        if not np.isfinite(self.input_vectors).all():
            raise ValueError("non-finite input vector entries")
        if not np.isfinite(self.output_vectors).all():
            raise ValueError("non-finite output vector entries")
        norms = np.linalg.norm(self.input_vectors, axis=1)
        if vsize and norms.min() == 0.0:
            raise ValueError("all-zero input vector row")

    def _tokens(self) -> np.ndarray:
        if self._token_array is None:
            self._token_array = np.array(self.vocab.tokens)
        return self._token_array

    def _norms(self) -> np.ndarray:
        if self._input_norms is None:
            self._input_norms = np.linalg.norm(self.input_vectors, axis=1)
        return self._input_norms


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|), clamped to [-1, 1] against floating-point drift."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity undefined for a zero vector")
    sim = float(np.dot(u, v) / (nu * nv))
    return min(1.0, max(-1.0, sim))


def nearest_neighbors(space: EmbeddingSpace, word: str, n: int) -> list[Neighbor]:
    """Top-n tokens by cosine similarity to `word`, query itself excluded.

    Sorted by descending similarity, ties broken lexicographically. Input
    vectors are used on both sides of the similarity.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if word not in space.vocab:
        raise UnknownWordError(f"{word!r} not in space {space.space_tag!r}")
    qidx = space.vocab.index(word)
    q = space.input_vectors[qidx]
    qnorm = np.linalg.norm(q)
    if qnorm == 0.0:
        raise ZeroVectorError(f"{word!r} has a zero vector")
    norms = space._norms()
    # einsum keeps the reduction order fixed regardless of BLAS threading
    sims = np.einsum("vd,d->v", space.input_vectors, q)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = sims / (norms * qnorm)
    sims[norms == 0.0] = -np.inf
    np.clip(sims, -1.0, 1.0, out=sims)
    sims[qidx] = -np.inf
    order = np.lexsort((space._tokens(), -sims))
    out = []
    for idx in order[: min(n, len(space.vocab) - 1)]:
        if sims[idx] == -np.inf:
            break
        # report the winner's similarity through the scalar path so the
        # value is identical to a per-pair cosine_similarity call
        token = space.vocab.token(int(idx))
        out.append(Neighbor(token, cosine_similarity(q, space.input_vectors[idx])))
    out.sort(key=lambda nb: (-nb.similarity, nb.token))
    return out


def negative_distribution(vocab: Vocabulary, power: float) -> np.ndarray:
    """Unigram distribution raised to `power`, normalized, in index order."""
    if power < 0:
        raise ValueError("power must be >= 0")
    counts = np.array([vocab.count(t) for t in vocab.tokens], dtype=np.float64)
    weights = counts**power
    return weights / weights.sum()


def sgns_gradient(
    center_vec: np.ndarray,
    context_vec: np.ndarray,
    negative_vecs: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss and analytic gradients for one positive pair plus its negatives.

    Loss is the negative log-likelihood
        -log s(u_o.v_c) - sum_k log s(-u_k.v_c)
    and the returned gradients are of that loss with respect to the center,
    context, and each negative vector.
    """
    v = np.asarray(center_vec, dtype=np.float64)
    u = np.asarray(context_vec, dtype=np.float64)
    negs = np.atleast_2d(np.asarray(negative_vecs, dtype=np.float64))
    s_pos = float(np.dot(u, v))
    s_neg = negs @ v
    loss = float(np.logaddexp(0.0, -s_pos) + np.logaddexp(0.0, s_neg).sum())
    coef_pos = expit(s_pos) - 1.0
    coef_neg = expit(s_neg)
    grad_context = coef_pos * v
    grad_negatives = coef_neg[:, None] * v[None, :]
    grad_center = coef_pos * u + coef_neg @ negs
    return loss, grad_center, grad_context, grad_negatives


def _encode_corpus(
    corpus: Sequence[Sequence[str]], vocab: Vocabulary
) -> tuple[np.ndarray, np.ndarray]:
    """Map tokens to indices, dropping OOV tokens and docs left with < 2."""
    t2i = vocab.token_to_index
    flat: list[int] = []
    lengths: list[int] = []
    for tokens in corpus:
        enc = [t2i[t] for t in tokens if t in t2i]
        if len(enc) >= 2:
            flat.extend(enc)
            lengths.append(len(enc))
    return np.asarray(flat, dtype=np.int64), np.asarray(lengths, dtype=np.int64)


def _epoch_pairs(
    flat: np.ndarray,
    doc_of_token: np.ndarray,
    keep_prob: np.ndarray | None,
    window: int,
    num_docs: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate this epoch's (center, context) pairs for the whole corpus.

    Returns (center ids, context ids, original flat position of each pair's
    center). Subsampling and the per-center window size are redrawn each
    epoch from `rng`.
    """
    n = flat.size
    if keep_prob is not None:
        kept_pos = np.nonzero(rng.random(n) < keep_prob[flat])[0]
    else:
        kept_pos = np.arange(n)
    m = kept_pos.size
    if m == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty
    kdoc = doc_of_token[kept_pos]
    klen = np.bincount(kdoc, minlength=num_docs)
    kstart = np.concatenate(([0], np.cumsum(klen)[:-1]))
    in_doc_pos = np.arange(m) - kstart[kdoc]
    b = rng.integers(1, window + 1, size=m)
    left = np.minimum(b, in_doc_pos)
    right = np.minimum(b, klen[kdoc] - 1 - in_doc_pos)
    counts = left + right
    total = int(counts.sum())
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty
    center_row = np.repeat(np.arange(m), counts)
    first_pair = np.repeat(np.cumsum(counts) - counts, counts)
    within = np.arange(total) - first_pair
    left_rep = np.repeat(left, counts)
    offsets = np.where(within < left_rep, within - left_rep, within - left_rep + 1)
    context_row = center_row + offsets
    kept_ids = flat[kept_pos]
    return kept_ids[center_row], kept_ids[context_row], kept_pos[center_row]


def _batch_update(
    input_vectors: np.ndarray,
    output_vectors: np.ndarray,
    centers: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
    lr: float,
) -> float:
    """One mini-batch SGD step; returns the summed batch loss."""
    vc = input_vectors[centers]
    uo = output_vectors[contexts]
    un = output_vectors[negatives]
    s_pos = np.einsum("bd,bd->b", vc, uo)
    s_neg = np.einsum("bkd,bd->bk", un, vc)
    # a negative that collides with the positive context is skipped outright
    collision = negatives == contexts[:, None]
    coef_pos = expit(s_pos) - 1.0
    coef_neg = expit(s_neg)
    coef_neg[collision] = 0.0
    neg_loss = np.logaddexp(0.0, s_neg)
    neg_loss[collision] = 0.0
    loss = float(np.logaddexp(0.0, -s_pos).sum() + neg_loss.sum())
    grad_center = coef_pos[:, None] * uo + np.einsum("bk,bkd->bd", coef_neg, un)
    np.add.at(output_vectors, contexts, (-lr * coef_pos)[:, None] * vc)
    dim = input_vectors.shape[1]
    grad_neg = coef_neg[:, :, None] * vc[:, None, :]
    np.add.at(output_vectors, negatives.ravel(), -lr * grad_neg.reshape(-1, dim))
    np.add.at(input_vectors, centers, -lr * grad_center)
    return loss


def train(
    corpus: Sequence[Sequence[str]],
    config: TrainingConfig,
    space_tag: str = "space",
    threads: int = 1,
) -> EmbeddingSpace:
    """Train an SGNS embedding space over a token corpus.

    The vocabulary is built with config.min_count; input vectors start
    uniform in [-0.5/dim, 0.5/dim] and output vectors at zero; the learning
    rate decays linearly over scanned tokens. With threads == 1 the result
    is identical across runs for a fixed seed. threads > 1 runs lock-free
    parallel updates and gives up bit-reproducibility.
    """
    docs = list(corpus)
    if not docs:
        raise EmptyVocabularyError("cannot train on an empty corpus")
    vocab = build_vocabulary(docs, config.min_count)
    flat, lengths = _encode_corpus(docs, vocab)
    if flat.size == 0:
        raise EmptyVocabularyError(
            "no document keeps >= 2 in-vocabulary tokens after filtering"
        )
    dim = config.dimension
    vsize = len(vocab)
    rng = np.random.default_rng(config.seed)
    input_vectors = (rng.random((vsize, dim)) - 0.5) / dim
    output_vectors = np.zeros((vsize, dim))

    probs = negative_distribution(vocab, config.unigram_power)
    cumulative = np.cumsum(probs)
    cumulative[-1] = 1.0

    keep_prob = None
    if config.subsample_threshold > 0:
        freq = np.array(
            [vocab.count(t) for t in vocab.tokens], dtype=np.float64
        ) / vocab.total_tokens
        keep_prob = np.minimum(1.0, np.sqrt(config.subsample_threshold / freq))

    doc_of_token = np.repeat(np.arange(lengths.size), lengths)
    tokens_per_epoch = flat.size
    total_planned = config.epochs * tokens_per_epoch
    lr0 = config.initial_learning_rate
    lr_min = FINAL_LR_FRACTION * lr0

    batch_pairs = _batch_size(vsize)

    def run_range(centers, contexts, negatives, center_pos, scanned_base, loss_out):
        loss = 0.0
        for start in range(0, centers.size, batch_pairs):
            end = min(start + batch_pairs, centers.size)
            scanned = scanned_base + int(center_pos[end - 1]) + 1
            lr = max(lr_min, lr0 + (lr_min - lr0) * (scanned / total_planned))
            loss += _batch_update(
                input_vectors,
                output_vectors,
                centers[start:end],
                contexts[start:end],
                negatives[start:end],
                lr,
            )
        loss_out.append(loss)

    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        centers, contexts, center_pos = _epoch_pairs(
            flat, doc_of_token, keep_prob, config.window, lengths.size, rng
        )
        npairs = centers.size
        if npairs == 0:
            epoch_losses.append(float("nan"))
            continue
        draws = rng.random((npairs, config.negatives))
        negatives = np.searchsorted(cumulative, draws)
        scanned_base = epoch * tokens_per_epoch
        losses: list[float] = []
        if threads <= 1:
            run_range(centers, contexts, negatives, center_pos, scanned_base, losses)
        else:
            bounds = np.linspace(0, npairs, threads + 1, dtype=np.int64)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(
                        run_range,
                        centers[lo:hi],
                        contexts[lo:hi],
                        negatives[lo:hi],
                        center_pos[lo:hi],
                        scanned_base,
                        losses,
                    )
                    for lo, hi in zip(bounds[:-1], bounds[1:])
                    if hi > lo
                ]
                for fut in futures:
                    fut.result()
        epoch_loss = sum(losses) / npairs
        if not np.isfinite(epoch_loss):
            raise NonFiniteLossError(
                f"loss became non-finite in epoch {epoch + 1}"
            )
        epoch_losses.append(epoch_loss)
        log.debug(
            "%s: epoch %d/%d, %d pairs, loss %.6f",
            space_tag, epoch + 1, config.epochs, npairs, epoch_loss,
        )

    return EmbeddingSpace(
        vocab, input_vectors, output_vectors, space_tag, config, epoch_losses
    )


def save_space(space: EmbeddingSpace, path) -> None:
    """Write the text vector file plus the exact binary sidecar.

    Text format: "vocab_size dimension" header, then one "token v1 .. vd"
    line per word at 9 significant digits. The sidecar at path + ".dvlx"
    holds counts and both matrices bit-exactly (layout in the README).
    """
    path = Path(path)
    vsize = len(space.vocab)
    dim = space.dimension
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{vsize} {dim}\n")
        for i, tok in enumerate(space.vocab.tokens):
            values = " ".join(f"{x:.9g}" for x in space.input_vectors[i])
            fh.write(f"{tok} {values}\n")

    header = {
        "space_tag": space.space_tag,
        "vocab_size": vsize,
        "dimension": dim,
        "config": space.config.to_dict() if space.config else None,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    counts = np.array(
        [space.vocab.count(t) for t in space.vocab.tokens], dtype="<u8"
    )
    with open(path.with_name(path.name + SIDECAR_SUFFIX), "wb") as fh:
        fh.write(SIDECAR_MAGIC)
        fh.write(struct.pack("<B", SIDECAR_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(counts.tobytes())
        fh.write(np.ascontiguousarray(space.input_vectors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(space.output_vectors, dtype="<f8").tobytes())


def _parse_text_vectors(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise MalformedFileError("expected 'vocab_size dimension' header", 1)
        try:
            vsize, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedFileError("non-integer header fields", 1) from None
        if vsize < 1 or dim < 1:
            raise MalformedFileError("vocab_size and dimension must be >= 1", 1)
        tokens: list[str] = []
        matrix = np.empty((vsize, dim))
        for lineno, line in enumerate(fh, start=2):
            row = lineno - 2
            if row >= vsize:
                if line.strip():
                    raise MalformedFileError("more rows than declared", lineno)
                continue
            fields = line.rstrip("\n").split(" ")
            if len(fields) != dim + 1:
                raise MalformedFileError(
                    f"expected token plus {dim} values, got {len(fields)} fields",
                    lineno,
                )
            tokens.append(fields[0])
            try:
                matrix[row] = [float(x) for x in fields[1:]]
            except ValueError:
                raise MalformedFileError("unparseable vector value", lineno) from None
    if len(tokens) != vsize:
        raise MalformedFileError(
            f"declared {vsize} rows, found {len(tokens)}", len(tokens) + 2
        )
    return tokens, matrix


def _read_sidecar(path: Path, tokens: list[str]):
    data = path.read_bytes()
    if data[:4] != SIDECAR_MAGIC:
        raise MalformedFileError(f"{path.name}: bad magic bytes")
    version = data[4]
    if version != SIDECAR_VERSION:
        raise MalformedFileError(f"{path.name}: unsupported version {version}")
    (header_len,) = struct.unpack_from("<I", data, 5)
    off = 9
    try:
        header = json.loads(data[off : off + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFileError(f"{path.name}: bad header ({exc})") from None
    off += header_len
    vsize = header["vocab_size"]
    dim = header["dimension"]
    if vsize != len(tokens):
        raise MalformedFileError(
            f"{path.name}: sidecar vocab_size {vsize} != text file {len(tokens)}"
        )
    expected = off + 8 * vsize + 8 * vsize * dim * 2
    if len(data) != expected:
        raise MalformedFileError(
            f"{path.name}: expected {expected} bytes, found {len(data)}"
        )
    counts = np.frombuffer(data, dtype="<u8", count=vsize, offset=off)
    off += 8 * vsize
    input_vectors = np.frombuffer(
        data, dtype="<f8", count=vsize * dim, offset=off
    ).reshape(vsize, dim).copy()
    off += 8 * vsize * dim
    output_vectors = np.frombuffer(
        data, dtype="<f8", count=vsize * dim, offset=off
    ).reshape(vsize, dim).copy()
    config = None
    if header.get("config"):
        config = TrainingConfig(**header["config"])
    return header["space_tag"], counts, input_vectors, output_vectors, config


def load_space(path) -> EmbeddingSpace:
    """Load a space saved by save_space.

    When the binary sidecar is present the matrices, counts, tag, and
    config are restored exactly. Without it the input vectors come from the
    text file (9 significant digits), output vectors are zero, and counts
    default to 1.
    """
    path = Path(path)
    tokens, text_matrix = _parse_text_vectors(path)
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    token_to_index = {tok: i for i, tok in enumerate(tokens)}
    if len(token_to_index) != len(tokens):
        raise MalformedFileError("duplicate token in vector file")
    if sidecar.exists():
        tag, counts, input_vectors, output_vectors, config = _read_sidecar(
            sidecar, tokens
        )
        vocab = Vocabulary(token_to_index, dict(zip(tokens, (int(c) for c in counts))))
        return EmbeddingSpace(vocab, input_vectors, output_vectors, tag, config)
    vocab = Vocabulary(token_to_index, {tok: 1 for tok in tokens})
    return EmbeddingSpace(
        vocab, text_matrix, np.zeros_like(text_matrix), path.stem, None
    )
