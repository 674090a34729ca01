import math

import numpy as np
import pytest

from divergelex.corpus import Vocabulary, build_vocabulary
from divergelex.embedding import (
    EmbeddingSpace,
    Neighbor,
    TrainingConfig,
    cosine_similarity,
    load_space,
    nearest_neighbors,
    negative_distribution,
    save_space,
    sgns_gradient,
    train,
)
from divergelex.errors import (
    EmptyVocabularyError,
    MalformedFileError,
    UnknownWordError,
    ZeroVectorError,
)
from divergelex.synth import SynthSpec, generate


def make_space(tokens, matrix, tag="test", counts=None):
    vocab = Vocabulary(
        {t: i for i, t in enumerate(tokens)},
        counts or {t: 1 for t in tokens},
    )
    matrix = np.asarray(matrix, dtype=np.float64)
    return EmbeddingSpace(vocab, matrix, np.zeros_like(matrix), tag)


class TestTrainingConfig:
    def test_defaults_valid(self):
        cfg = TrainingConfig()
        assert cfg.dimension == 100
        assert cfg.window == 5
        assert cfg.negatives == 5
        assert cfg.epochs == 5
        assert cfg.initial_learning_rate == 0.025
        assert cfg.min_count == 5
        assert cfg.subsample_threshold == 1e-4
        assert cfg.unigram_power == 0.75

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dimension": 1},
            {"window": 0},
            {"negatives": 0},
            {"epochs": 0},
            {"initial_learning_rate": 0.0},
            {"min_count": 0},
            {"subsample_threshold": -1e-5},
            {"unigram_power": -0.1},
            {"seed": -1},
            {"seed": 2**64},
        ],
    )
    def test_invalid_fields_rejected(self, kwargs):
        with pytest.raises(ValueError):
            TrainingConfig(**kwargs)


class TestCosineSimilarity:
    def test_identical_vector(self):
        v = np.array([0.3, -1.2, 4.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_opposite(self):
        v = np.array([2.0, -1.0, 0.5])
        assert cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_vector_raises(self):
        with pytest.raises(ZeroVectorError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(ZeroVectorError):
            cosine_similarity([1.0, 0.0], [0.0, 0.0])

    def test_clamped_to_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            u = rng.normal(size=6) * 10.0 ** rng.integers(-8, 8)
            v = rng.normal(size=6) * 10.0 ** rng.integers(-8, 8)
            assert -1.0 <= cosine_similarity(u, v) <= 1.0


class TestNegativeDistribution:
    def test_power_law_value(self):
        vocab = Vocabulary({"a": 0, "b": 1}, {"a": 4, "b": 1})
        probs = negative_distribution(vocab, 0.75)
        # 4^0.75 / (4^0.75 + 1) computed independently
        assert probs[0] == pytest.approx(0.7387961250362586, abs=1e-15)
        assert probs[1] == pytest.approx(1.0 - 0.7387961250362586, abs=1e-15)

    def test_zero_power_is_uniform(self):
        vocab = Vocabulary({"a": 0, "b": 1, "c": 2}, {"a": 100, "b": 7, "c": 1})
        probs = negative_distribution(vocab, 0.0)
        assert np.allclose(probs, 1.0 / 3.0, atol=1e-15)

    def test_single_word(self):
        vocab = Vocabulary({"solo": 0}, {"solo": 9})
        assert negative_distribution(vocab, 0.75)[0] == 1.0

    def test_sums_to_one_and_monotone(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(1, 60))
            counts = {f"w{i}": int(rng.integers(1, 10_000)) for i in range(n)}
            vocab = build_vocabulary([list_of(counts)], min_count=1)
            probs = negative_distribution(vocab, 0.75)
            assert abs(probs.sum() - 1.0) <= 1e-12
            by_count = sorted(
                ((vocab.count(t), probs[vocab.index(t)]) for t in vocab.tokens)
            )
            for (c1, p1), (c2, p2) in zip(by_count, by_count[1:]):
                if c1 < c2:
                    assert p1 < p2
                else:
                    assert p1 == pytest.approx(p2, rel=1e-12)


def list_of(counts: dict) -> list:
    out = []
    for tok, c in counts.items():
        out.extend([tok] * c)
    return out


class TestSgnsGradient:
    def test_zero_vectors_loss(self):
        d = 6
        zero = np.zeros(d)
        loss, gc, go, gn = sgns_gradient(zero, zero, np.zeros((1, d)))
        assert loss == pytest.approx(2.0 * math.log(2.0), abs=1e-15)
        for g in (gc, go, gn):
            assert np.isfinite(g).all()

    def test_negative_gradient_at_zero_score(self):
        # context orthogonal to center, one negative orthogonal too:
        # sigma(0) = 0.5 exactly, so the negative's gradient is 0.5 * center
        center = np.array([0.0, 2.0, 0.0])
        context = np.array([1.0, 0.0, 0.0])
        negative = np.array([[0.0, 0.0, 3.0]])
        _, _, _, gn = sgns_gradient(center, context, negative)
        assert np.array_equal(gn[0], 0.5 * center)
        assert np.linalg.norm(gn[0]) == pytest.approx(
            0.5 * np.linalg.norm(center), abs=1e-15
        )

    def test_matches_central_finite_differences(self):
        # independent oracle: numerically differentiate the returned loss
        rng = np.random.default_rng(42)
        dim, negs, step = 10, 5, 1e-5
        worst = 0.0
        for _ in range(100):
            center = rng.normal(size=dim)
            context = rng.normal(size=dim)
            negatives = rng.normal(size=(negs, dim))
            _, gc, go, gn = sgns_gradient(center, context, negatives)

            def loss_at(c=center, o=context, n=negatives):
                return sgns_gradient(c, o, n)[0]

            worst = max(worst, _fd_worst(loss_at, center, gc, step, "c"))
            worst = max(worst, _fd_worst(loss_at, context, go, step, "o"))
            for j in range(negs):
                worst = max(
                    worst, _fd_worst(loss_at, negatives, gn, step, "n", j)
                )
        assert worst < 1e-4


def _fd_worst(loss_at, arr, grad, step, which, row=None):
    """Max relative error between `grad` and central differences on `arr`."""
    worst = 0.0
    flat_grad = grad if row is None else grad[row]
    for i in range(arr.shape[-1]):
        plus = arr.copy()
        minus = arr.copy()
        if row is None:
            plus[i] += step
            minus[i] -= step
            kwargs_p = {which: plus}
            kwargs_m = {which: minus}
        else:
            plus[row, i] += step
            minus[row, i] -= step
            kwargs_p = {which: plus}
            kwargs_m = {which: minus}
        numeric = (loss_at(**kwargs_p) - loss_at(**kwargs_m)) / (2 * step)
        analytic = flat_grad[i]
        denom = max(abs(analytic), abs(numeric), 1e-3)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


class TestNearestNeighbors:
    def test_small_exhaustive_case(self):
        space = make_space(
            ["w", "a", "b"],
            [[1.0, 0.0], [0.9, math.sqrt(1 - 0.81)], [0.1, math.sqrt(1 - 0.01)]],
        )
        out = nearest_neighbors(space, "w", 2)
        assert [nb.token for nb in out] == ["a", "b"]
        assert out[0].similarity == pytest.approx(0.9, abs=1e-12)
        assert out[1].similarity == pytest.approx(0.1, abs=1e-12)

    def test_n_larger_than_vocab(self):
        space = make_space(["w", "a", "b"], np.eye(3) + 0.1)
        assert len(nearest_neighbors(space, "w", 50)) == 2

    def test_query_never_included(self):
        space = make_space(["w", "a"], [[1.0, 0.0], [1.0, 0.0]])
        out = nearest_neighbors(space, "w", 5)
        assert [nb.token for nb in out] == ["a"]

    def test_unknown_word(self):
        space = make_space(["a", "b"], np.eye(2))
        with pytest.raises(UnknownWordError):
            nearest_neighbors(space, "zzz", 3)

    def test_exact_tie_breaks_lexicographically(self):
        # mirror-image candidates give bit-identical similarities to q
        space = make_space(
            ["q", "zed", "ant"],
            [[1.0, 0.0], [0.5, 0.5], [0.5, -0.5]],
        )
        out = nearest_neighbors(space, "q", 2)
        assert out[0].similarity == out[1].similarity
        assert [nb.token for nb in out] == ["ant", "zed"]

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        tokens = [f"w{i:04d}" for i in range(1000)]
        matrix = rng.normal(size=(1000, 50))
        space = make_space(tokens, matrix)
        for word in rng.choice(tokens, size=25, replace=False):
            fast = nearest_neighbors(space, word, 10)
            slow = brute_force_neighbors(space, word, 10)
            assert [(nb.token, nb.similarity) for nb in fast] == slow


def brute_force_neighbors(space, word, n):
    """Oracle: full scan with per-pair cosine calls, plain Python sort."""
    query = space.vector(word)
    scored = []
    for tok in space.vocab.tokens:
        if tok == word:
            continue
        scored.append((tok, cosine_similarity(query, space.vector(tok))))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:n]


class TestTrain:
    def test_same_seed_same_space(self):
        docs = [["red", "blue", "red", "green"] * 4 for _ in range(30)]
        cfg = TrainingConfig(
            dimension=12, epochs=2, min_count=1, subsample_threshold=0.0, seed=99
        )
        s1 = train(docs, cfg)
        s2 = train(docs, cfg)
        assert np.array_equal(s1.input_vectors, s2.input_vectors)
        assert np.array_equal(s1.output_vectors, s2.output_vectors)

    def test_different_seed_differs(self):
        docs = [["red", "blue", "red", "green"] * 4 for _ in range(30)]
        s1 = train(docs, TrainingConfig(dimension=12, epochs=1, min_count=1, seed=1))
        s2 = train(docs, TrainingConfig(dimension=12, epochs=1, min_count=1, seed=2))
        assert not np.array_equal(s1.input_vectors, s2.input_vectors)

    def test_empty_corpus_raises(self):
        with pytest.raises(EmptyVocabularyError):
            train([], TrainingConfig(dimension=4, min_count=1))

    def test_min_count_filters_vocabulary(self):
        docs = [["a", "b"] * 10, ["a", "b", "rare"] * 2]
        cfg = TrainingConfig(dimension=4, epochs=1, min_count=5, seed=0)
        space = train(docs, cfg)
        assert "rare" not in space.vocab
        assert "a" in space.vocab

    def test_space_is_valid_and_finite(self):
        docs = [["x", "y", "z", "x", "y"] * 6 for _ in range(20)]
        cfg = TrainingConfig(
            dimension=6, epochs=3, min_count=1, subsample_threshold=0.0, seed=4
        )
        space = train(docs, cfg)
        space.validate()
        assert space.epoch_losses and all(np.isfinite(space.epoch_losses))

    def test_alternating_pair_becomes_similar(self):
        # one 10k-token document of two strictly alternating words; the
        # subsample draw breaks the alternation so both words end up with
        # near-identical context distributions
        docs = [["a", "b"] * 5000]
        cfg = TrainingConfig(
            dimension=8,
            window=12,
            negatives=5,
            epochs=60,
            min_count=1,
            subsample_threshold=0.005,
            seed=3,
        )
        space = train(docs, cfg)
        assert cosine_similarity(space.vector("a"), space.vector("b")) > 0.8

    def test_two_topic_corpus_separates(self):
        spec = SynthSpec(
            vocab_size=120,
            num_topics=2,
            planted_words=0,
            control_words=0,
            docs_per_group=1500,
            doc_length=12,
            seed=21,
        )
        corpus_1, _, _ = generate(spec)
        cfg = TrainingConfig(
            dimension=50, epochs=5, min_count=5, subsample_threshold=1e-3, seed=5
        )
        space = train([list(d.tokens) for d in corpus_1], cfg)
        topic_a = [t for t in space.vocab.tokens if t.startswith("t0w")][:30]
        topic_b = [t for t in space.vocab.tokens if t.startswith("t1w")][:30]
        va = space.input_vectors[[space.vocab.index(t) for t in topic_a]]
        vb = space.input_vectors[[space.vocab.index(t) for t in topic_b]]
        va = va / np.linalg.norm(va, axis=1, keepdims=True)
        vb = vb / np.linalg.norm(vb, axis=1, keepdims=True)
        intra = va @ va.T
        inter = va @ vb.T
        # triples (x, y) same topic vs (x, z) across topics, exhaustively
        wins = ties = total = 0
        n = len(topic_a)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                wins += int((intra[i, j] > inter[i]).sum())
                total += inter.shape[1]
        assert wins / total >= 0.95

    def test_epoch_loss_non_increasing(self):
        spec = SynthSpec(
            vocab_size=150,
            num_topics=3,
            planted_words=0,
            control_words=0,
            docs_per_group=1200,
            doc_length=12,
            seed=8,
        )
        corpus_1, _, _ = generate(spec)
        cfg = TrainingConfig(
            dimension=24, epochs=5, min_count=5, subsample_threshold=1e-3, seed=3
        )
        space = train([list(d.tokens) for d in corpus_1], cfg)
        losses = space.epoch_losses
        for earlier, later in zip(losses, losses[1:]):
            assert later <= earlier * 1.01

    def test_parallel_mode_trains_a_usable_space(self):
        docs = [["p", "q", "r", "p", "q"] * 5 for _ in range(40)]
        cfg = TrainingConfig(
            dimension=6, epochs=2, min_count=1, subsample_threshold=0.0, seed=4
        )
        space = train(docs, cfg, threads=2)
        space.validate()


class TestSaveLoad:
    def _trained(self):
        docs = [["u", "v", "w", "u", "v"] * 5 for _ in range(25)]
        cfg = TrainingConfig(
            dimension=7, epochs=2, min_count=1, subsample_threshold=0.0, seed=17
        )
        return train(docs, cfg, space_tag="roundtrip")

    def test_bit_exact_round_trip_with_sidecar(self, tmp_path):
        space = self._trained()
        path = tmp_path / "space.vec"
        save_space(space, path)
        loaded = load_space(path)
        assert np.array_equal(loaded.input_vectors, space.input_vectors)
        assert np.array_equal(loaded.output_vectors, space.output_vectors)
        assert loaded.vocab.token_to_index == space.vocab.token_to_index
        assert loaded.vocab.counts == space.vocab.counts
        assert loaded.space_tag == "roundtrip"
        assert loaded.config == space.config

    def test_text_only_round_trip_within_print_precision(self, tmp_path):
        space = self._trained()
        path = tmp_path / "space.vec"
        save_space(space, path)
        (tmp_path / "space.vec.dvlx").unlink()
        loaded = load_space(path)
        assert loaded.vocab.token_to_index == space.vocab.token_to_index
        # 9 significant digits of parsed values
        rel = np.abs(loaded.input_vectors - space.input_vectors) / np.maximum(
            np.abs(space.input_vectors), 1e-300
        )
        assert rel.max() < 1e-8
        assert not loaded.output_vectors.any()

    def test_text_format_shape(self, tmp_path):
        space = self._trained()
        path = tmp_path / "space.vec"
        save_space(space, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        vsize, dim = map(int, lines[0].split())
        assert vsize == len(space.vocab) and dim == 7
        assert len(lines) == vsize + 1
        for line in lines[1:]:
            fields = line.split(" ")
            assert len(fields) == dim + 1
            for x in fields[1:]:
                float(x)

    @pytest.mark.parametrize(
        "content,line",
        [
            ("bogus\n", 1),
            ("2 3\na 1.0 2.0 3.0\n", 3),
            ("1 3\na 1.0 2.0\n", 2),
            ("1 3\na 1.0 2.0 zz\n", 2),
            ("1 2\na 1.0 2.0\nb 1.0 2.0\n", 3),
        ],
    )
    def test_malformed_text_reports_line(self, tmp_path, content, line):
        path = tmp_path / "bad.vec"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(MalformedFileError) as err:
            load_space(path)
        assert f"line {line}" in str(err.value)

    def test_corrupt_sidecar_rejected(self, tmp_path):
        space = self._trained()
        path = tmp_path / "space.vec"
        save_space(space, path)
        sidecar = tmp_path / "space.vec.dvlx"
        data = bytearray(sidecar.read_bytes())
        data[:4] = b"NOPE"
        sidecar.write_bytes(bytes(data))
        with pytest.raises(MalformedFileError):
            load_space(path)

    def test_truncated_sidecar_rejected(self, tmp_path):
        space = self._trained()
        path = tmp_path / "space.vec"
        save_space(space, path)
        sidecar = tmp_path / "space.vec.dvlx"
        sidecar.write_bytes(sidecar.read_bytes()[:-9])
        with pytest.raises(MalformedFileError):
            load_space(path)

    def test_hand_built_space_without_config(self, tmp_path):
        space = make_space(
            ["x", "y"], [[0.5, 1.0, -0.25], [2.0, -1.5, 0.125]], tag="bare"
        )
        path = tmp_path / "bare.vec"
        save_space(space, path)
        loaded = load_space(path)
        assert loaded.config is None
        assert loaded.space_tag == "bare"
        assert np.array_equal(loaded.input_vectors, space.input_vectors)
