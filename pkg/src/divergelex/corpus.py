"""Ingestion and cleaning of group-labeled text corpora.

The cleaning pipeline lowercases text, removes hashtag/mention/URL tokens,
strips boundary punctuation, drops retweets and short documents, and filters
rare words through a frequency-thresholded vocabulary.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import (
    EmptyVocabularyError,
    GroupCountError,
    MalformedRecordError,
)

# Documents with fewer tokens than this after cleaning are discarded.
MIN_DOCUMENT_TOKENS = 10

URL_PREFIXES = ("http://", "https://", "www.")

# Non-alphanumeric runs at token boundaries (underscore counts as junk too).
_BOUNDARY_RE = re.compile(r"^[\W_]+|[\W_]+$", re.UNICODE)


@dataclass(frozen=True)
class LabeledDocument:
    """One raw text record carrying its group tag."""

    group_tag: str
    text: str
    is_retweet: bool = False


@dataclass(frozen=True)
class TokenizedDocument:
    """A cleaned document: lowercase tokens plus the group tag."""

    group_tag: str
    tokens: tuple[str, ...]


@dataclass
class GroupedCorpus:
    """Cleaned documents partitioned into exactly two groups."""

    tags: tuple[str, str]
    per_group: dict[str, list[TokenizedDocument]]

    @property
    def combined(self) -> list[TokenizedDocument]:
        """Concatenation of both groups, first-seen tag order."""
        return self.per_group[self.tags[0]] + self.per_group[self.tags[1]]


def looks_like_retweet(text: str) -> bool:
    """True if the first whitespace token of the raw text is 'rt'."""
    head = text.split(maxsplit=1)
    return bool(head) and head[0].lower() == "rt"


def _clean_token(token: str, dropped: Counter | None) -> str | None:
    # Iterate to a fixpoint so that e.g. "(http://x)" is stripped and then
    # recognized as a URL; guarantees tokenize is idempotent on its output.
    while True:
        if token.startswith("#"):
            if dropped is not None:
                dropped["hashtag_tokens"] += 1
            return None
        if token.startswith("@"):
            if dropped is not None:
                dropped["mention_tokens"] += 1
            return None
        if token.startswith(URL_PREFIXES):
            if dropped is not None:
                dropped["url_tokens"] += 1
            return None
        stripped = _BOUNDARY_RE.sub("", token)
        if stripped == token:
            return token
        if not stripped:
            if dropped is not None:
                dropped["punctuation_only_tokens"] += 1
            return None
        token = stripped


def tokenize(text: str, dropped: Counter | None = None) -> list[str]:
    """Split text into cleaned lowercase tokens.

    Tokens starting with '#' or '@' and URL tokens are removed entirely;
    other tokens lose leading/trailing non-alphanumeric characters while
    interior apostrophes and hyphens survive. `dropped`, if given, counts
    removals per rule.
    """
    out = []
    for raw in text.lower().split():
        tok = _clean_token(raw, dropped)
        if tok:
            out.append(tok)
    return out


def clean_document(
    doc: LabeledDocument, dropped: Counter | None = None
) -> TokenizedDocument | None:
    """Tokenize one document; None if it is a retweet or too short."""
    if doc.is_retweet:
        if dropped is not None:
            dropped["retweet_documents"] += 1
        return None
    tokens = tokenize(doc.text, dropped)
    if len(tokens) < MIN_DOCUMENT_TOKENS:
        if dropped is not None:
            dropped["short_documents"] += 1
        return None
    return TokenizedDocument(doc.group_tag, tuple(tokens))


def _iter_token_seqs(docs: Iterable) -> Iterator[Sequence[str]]:
    for doc in docs:
        yield doc.tokens if isinstance(doc, TokenizedDocument) else doc


@dataclass
class Vocabulary:
    """Token-to-index map with occurrence counts.

    Indices are contiguous from 0, assigned in descending count order with
    lexicographic tie-break.
    """

    token_to_index: dict[str, int]
    counts: dict[str, int]
    total_tokens: int = field(default=0)

    def __post_init__(self):
        if self.total_tokens == 0:
            self.total_tokens = sum(self.counts.values())
        self._index_to_token = [None] * len(self.token_to_index)
        for tok, idx in self.token_to_index.items():
            self._index_to_token[idx] = tok

    def __len__(self) -> int:
        return len(self.token_to_index)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def __iter__(self) -> Iterator[str]:
        return iter(self._index_to_token)

    def index(self, token: str) -> int:
        return self.token_to_index[token]

    def token(self, index: int) -> str:
        return self._index_to_token[index]

    def count(self, token: str) -> int:
        return self.counts[token]

    @property
    def tokens(self) -> list[str]:
        """All tokens in index order."""
        return list(self._index_to_token)

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self._index_to_token:
                fh.write(f"{tok}\t{self.counts[tok]}\n")

    @classmethod
    def load_tsv(cls, path) -> "Vocabulary":
        token_to_index: dict[str, int] = {}
        counts: dict[str, int] = {}
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                tok, _, cnt = line.rstrip("\n").partition("\t")
                token_to_index[tok] = i
                counts[tok] = int(cnt)
        return cls(token_to_index, counts)


def build_vocabulary(docs: Iterable, min_count: int = 1) -> Vocabulary:
    """Count tokens over documents and keep those occurring >= min_count.

    Accepts TokenizedDocuments or plain token sequences. Raises
    EmptyVocabularyError if nothing survives the threshold.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counter: Counter = Counter()
    for tokens in _iter_token_seqs(docs):
        counter.update(tokens)
    kept = [(tok, cnt) for tok, cnt in counter.items() if cnt >= min_count]
    if not kept:
        raise EmptyVocabularyError(
            f"no token reaches min_count={min_count} "
            f"({len(counter)} distinct tokens seen)"
        )
    kept.sort(key=lambda item: (-item[1], item[0]))
    token_to_index = {tok: i for i, (tok, _) in enumerate(kept)}
    counts = dict(kept)
    return Vocabulary(token_to_index, counts)


def apply_vocabulary(
    docs: Iterable[TokenizedDocument], vocab: Vocabulary
) -> list[TokenizedDocument]:
    """Delete out-of-vocabulary tokens; drop documents left with < 2 tokens."""
    out = []
    for doc in docs:
        kept = tuple(t for t in doc.tokens if t in vocab)
        if len(kept) >= 2:
            out.append(TokenizedDocument(doc.group_tag, kept))
    return out


def split_by_group(docs: Iterable[TokenizedDocument]) -> GroupedCorpus:
    """Partition documents by group tag; requires exactly two distinct tags.

    Tag order is first appearance; document order within a group is preserved.
    """
    per_group: dict[str, list[TokenizedDocument]] = {}
    for doc in docs:
        per_group.setdefault(doc.group_tag, []).append(doc)
    if len(per_group) != 2:
        raise GroupCountError(
            f"expected exactly 2 group tags, found {len(per_group)}: "
            f"{sorted(per_group)}"
        )
    tags = tuple(per_group)
    return GroupedCorpus(tags, per_group)


def token_lists(docs: Iterable[TokenizedDocument]) -> list[list[str]]:
    """Plain token sequences for handing a corpus to the trainer."""
    return [list(doc.tokens) for doc in docs]


def parse_record(obj: dict) -> LabeledDocument:
    """Build a LabeledDocument from a decoded JSON record.

    Expects "group" and "text" string fields; optional boolean "retweet".
    When "retweet" is absent the flag is inferred from a leading 'rt' token.
    """
    if not isinstance(obj, dict):
        raise MalformedRecordError("record is not a JSON object")
    group = obj.get("group")
    text = obj.get("text")
    if not isinstance(group, str) or not group:
        raise MalformedRecordError("missing or empty 'group' field")
    if not isinstance(text, str):
        raise MalformedRecordError("missing 'text' field")
    retweet = obj.get("retweet")
    if retweet is None:
        retweet = looks_like_retweet(text)
    elif not isinstance(retweet, bool):
        raise MalformedRecordError("'retweet' field must be boolean")
    return LabeledDocument(group, text, retweet)


def iter_jsonl(path) -> Iterator[tuple[int, LabeledDocument | None, str | None]]:
    """Yield (line_number, document, error) triples from a JSONL file.

    Malformed lines yield (lineno, None, message) so callers can count and
    report them without aborting the stream.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield lineno, parse_record(obj), None
            except (json.JSONDecodeError, MalformedRecordError) as exc:
                yield lineno, None, str(exc)


def iter_text_lines(path, group_tag: str) -> Iterator[LabeledDocument]:
    """One document per line; the whole file shares one group tag."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.strip():
                yield LabeledDocument(group_tag, line, looks_like_retweet(line))
