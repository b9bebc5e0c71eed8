"""Turn node contents into integer token sequences for the encoder.

Two content kinds are supported: binary categorical attributes, where a
node's sequence is the (1-based) list of its active attribute columns, and
free text, which goes through lowercase tokenization, stop-word removal
and a small suffix-stripping stemmer before vocabulary lookup.  Index 0 is
reserved for padding.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_MAX_LEN = 512


@dataclass(frozen=True, eq=False)
class NodeAttributes:
    """Dense ``n x m`` attribute matrix; row ``i`` belongs to node ``i``."""

    values: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"attribute matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("attribute matrix has non-finite entries")
        object.__setattr__(self, "values", v)
        names = tuple(self.names) or tuple(str(j) for j in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise ValueError(f"{len(names)} attribute names for {v.shape[1]} columns")
        object.__setattr__(self, "names", names)

    def __eq__(self, other):
        if not isinstance(other, NodeAttributes):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.values, other.values)

    __hash__ = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @classmethod
    def empty(cls, n: int) -> "NodeAttributes":
        return cls(np.zeros((n, 0)))


@dataclass(frozen=True)
class ContentSequence:
    node: int
    tokens: tuple = ()

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token table; ``tokens[i - 1]`` has index ``i``."""

    tokens: tuple = ()
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = {t: i for i, t in enumerate(self.tokens, start=1)}
        if len(idx) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        object.__setattr__(self, "index", idx)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def lookup(self, token) -> int:
        return self.index[token]

    def token(self, i: int):
        if not 1 <= i <= len(self.tokens):
            raise IndexError(f"token index {i} outside [1, {len(self.tokens)}]")
        return self.tokens[i - 1]

    @classmethod
    def from_attributes(cls, attrs: NodeAttributes) -> "Vocabulary":
        return cls(tuple(attrs.names))


def attrs_to_sequence(attrs: NodeAttributes, node: int, max_len: int = DEFAULT_MAX_LEN) -> ContentSequence:
    """Sequence of 1-based column indices where the node's attribute is 1."""
    row = attrs.values[node]
    active = np.flatnonzero(row == 1) + 1
    return ContentSequence(node, tuple(int(j) for j in active[:max_len]))


def attribute_sequences(attrs: NodeAttributes, max_len: int = DEFAULT_MAX_LEN) -> list:
    return [attrs_to_sequence(attrs, i, max_len) for i in range(attrs.n)]


@lru_cache(maxsize=None)
def _bundled_stopwords() -> frozenset:
    text = resources.files("cone").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_stopwords(path=None) -> frozenset:
    """Stop words, one per line; the bundled English list unless ``path``."""
    if path is None:
        return _bundled_stopwords()
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


_VOWEL = re.compile(r"[aeiouy]")


def _undouble(stem: str) -> str:
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "aeioulsz":
        return stem[:-1]
    return stem


def stem(word: str) -> str:
    """Strip plural, ``-ing`` and ``-ed`` suffixes.

    >>> [stem(w) for w in ("cats", "running", "studies", "jumped", "glass")]
    ['cat', 'run', 'study', 'jump', 'glass']
    """
    if len(word) > 4 and word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith("sses"):
        return word[:-2]
    for suffix in ("ing", "ed"):
        if word.endswith(suffix):
            base = word[: -len(suffix)]
            if len(base) >= 3 and _VOWEL.search(base):
                return _undouble(base)
            return word
    if len(word) > 3 and word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


_WORD = re.compile(r"[^\W_]+")


class Tokenizer:
    """Lowercase, split on non-alphanumerics, drop stop words, stem."""

    def __init__(self, stopwords: Iterable[str] | None = None, stemmer: Callable[[str], str] = stem):
        self.stopwords = load_stopwords() if stopwords is None else frozenset(stopwords)
        self.stemmer = stemmer

    def __call__(self, text: str) -> list:
        words = _WORD.findall(text.lower())
        return [self.stemmer(w) for w in words if w not in self.stopwords]


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times.

    Order is by descending frequency, ties broken lexicographically.
    ``corpus`` is an iterable of already-tokenized documents.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for doc in corpus:
        counts.update(doc)
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(tuple(kept))


def text_to_sequence(
    texts: Sequence[str],
    vocab: Vocabulary,
    node: int,
    max_len: int = DEFAULT_MAX_LEN,
    tokenizer: Callable[[str], list] | None = None,
) -> ContentSequence:
    """Concatenate a node's documents in order and map tokens to indices.

    Out-of-vocabulary tokens are dropped.
    """
    tok = tokenizer or Tokenizer()
    out = []
    for doc in texts:
        for t in tok(doc):
            i = vocab.index.get(t)
            if i is not None:
                out.append(i)
                if len(out) == max_len:
                    return ContentSequence(node, tuple(out))
    return ContentSequence(node, tuple(out))


def read_attribute_file(path, index, n: int | None = None) -> NodeAttributes:
    """Read sparse ``node_id attr_index ...`` lines (0-based columns).

    An optional ``# attributes: m`` header fixes the column count;
    otherwise it is one past the largest index seen.  Node IDs missing
    from ``index`` raise ``ValueError`` listing the offenders.
    """
    n = len(index) if n is None else n
    rows, unknown, m = [], [], None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                if key.strip() == "attributes":
                    m = int(val)
                continue
            parts = line.split()
            if parts[0] not in index:
                unknown.append(f"{parts[0]} (line {lineno})")
                continue
            try:
                cols = [int(c) for c in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: attribute indices must be integers") from None
            if any(c < 0 for c in cols):
                raise ValueError(f"{path}: line {lineno}: negative attribute index")
            rows.append((index[parts[0]], cols))
    if unknown:
        raise ValueError(f"{path}: unknown node IDs: {', '.join(unknown[:20])}")
    width = max((max(c) + 1 for _, c in rows if c), default=0)
    if m is None:
        m = width
    elif width > m:
        raise ValueError(f"{path}: attribute index {width - 1} exceeds declared width {m}")
    values = np.zeros((n, m))
    for i, cols in rows:
        values[i, cols] = 1.0
    return NodeAttributes(values)


def write_attribute_file(attrs: NodeAttributes, path, ids) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# attributes: {attrs.m}\n")
        for i in range(attrs.n):
            cols = np.flatnonzero(attrs.values[i])
            if len(cols):
                fh.write(" ".join([str(ids[i])] + [str(c) for c in cols]) + "\n")
