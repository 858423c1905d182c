"""Bag-of-words corpora: vocabulary, sparse counts n(d,w), UCI docword I/O.

The UCI layout is three header lines (D, W, NNZ) followed by NNZ lines of
``docID wordID count`` with 1-based ids.  The vocabulary file holds W lines,
line i naming term id i (0-based internally).
"""

from __future__ import annotations

import io
from typing import BinaryIO, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (
    CountError,
    EmptyDocumentError,
    HeaderError,
    IndexRangeError,
    NNZMismatchError,
    ParseError,
    ValidationError,
    VocabSizeError,
)

Source = Union[bytes, str, BinaryIO]


class Vocabulary:
    """Ordered list of distinct terms with a term -> id index."""

    def __init__(self, terms: Sequence[str]):
        terms = tuple(terms)
        if not terms:
            raise ValidationError("vocabulary must hold at least one term")
        index = {}
        for i, t in enumerate(terms):
            if t in index:
                raise ValidationError(f"duplicate term {t!r} at ids {index[t]} and {i}")
            index[t] = i
        self.terms = terms
        self.index = index

    def __len__(self):
        return len(self.terms)

    def __getitem__(self, i):
        return self.terms[i]

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.terms == other.terms

    def __repr__(self):
        return f"Vocabulary(V={len(self)})"

    @classmethod
    def placeholder(cls, V: int) -> "Vocabulary":
        """Synthetic vocabulary ``w0 .. w{V-1}``."""
        return cls([f"w{i}" for i in range(V)])


class Corpus:
    """Sparse document-term count matrix.

    Entries are stored as three parallel arrays sorted by (doc, term):
    ``doc_ids``, ``term_ids`` and ``counts``.  Each (d, w) pair occurs once
    and every document has at least one token.  Arrays are read-only.
    """

    def __init__(self, n_docs, n_terms, doc_ids, term_ids, counts, doc_labels=None):
        self.n_docs = int(n_docs)
        self.n_terms = int(n_terms)
        self.doc_ids = np.asarray(doc_ids, dtype=np.int64)
        self.term_ids = np.asarray(term_ids, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.doc_labels = None if doc_labels is None else tuple(doc_labels)
        self._validate()
        self.doc_totals = np.bincount(
            self.doc_ids, weights=self.counts, minlength=self.n_docs
        ).astype(np.int64)
        if np.any(self.doc_totals < 1):
            d = int(np.flatnonzero(self.doc_totals < 1)[0])
            raise ValidationError(f"document {d} has no tokens")
        for a in (self.doc_ids, self.term_ids, self.counts, self.doc_totals):
            a.setflags(write=False)

    def _validate(self):
        if self.n_docs < 1 or self.n_terms < 1:
            raise ValidationError(f"corpus needs D >= 1 and V >= 1, got D={self.n_docs}, V={self.n_terms}")
        d, w, c = self.doc_ids, self.term_ids, self.counts
        if not (d.ndim == w.ndim == c.ndim == 1 and len(d) == len(w) == len(c)):
            raise ValidationError("entry arrays must be 1-D and of equal length")
        if len(d) and (d.min() < 0 or d.max() >= self.n_docs):
            raise ValidationError("document id out of range")
        if len(w) and (w.min() < 0 or w.max() >= self.n_terms):
            raise ValidationError("term id out of range")
        if len(c) and c.min() < 1:
            raise ValidationError("entry counts must be >= 1")
        key = d * self.n_terms + w
        if len(key) > 1 and np.any(np.diff(key) <= 0):
            raise ValidationError("entries must be sorted by (doc, term) without duplicates")
        if self.doc_labels is not None and len(self.doc_labels) != self.n_docs:
            raise ValidationError("doc_labels length must equal D")

    @classmethod
    def from_entries(cls, n_docs, n_terms, entries: Iterable[tuple], doc_labels=None) -> "Corpus":
        """Build a corpus from (d, w, count) triples, summing repeated pairs."""
        arr = np.asarray(list(entries), dtype=np.int64).reshape(-1, 3)
        return cls.from_arrays(n_docs, n_terms, arr[:, 0], arr[:, 1], arr[:, 2], doc_labels)

    @classmethod
    def from_arrays(cls, n_docs, n_terms, doc_ids, term_ids, counts, doc_labels=None) -> "Corpus":
        d = np.asarray(doc_ids, dtype=np.int64)
        w = np.asarray(term_ids, dtype=np.int64)
        c = np.asarray(counts, dtype=np.int64)
        if len(d) and (d.min() < 0 or d.max() >= n_docs or w.min() < 0 or w.max() >= n_terms):
            raise ValidationError("entry ids out of range")
        key = d * int(n_terms) + w
        uniq, inverse = np.unique(key, return_inverse=True)
        summed = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(summed, inverse, c)
        return cls(n_docs, n_terms, uniq // n_terms, uniq % n_terms, summed, doc_labels)

    @classmethod
    def from_dense(cls, counts) -> "Corpus":
        counts = np.asarray(counts)
        d, w = np.nonzero(counts)
        return cls.from_arrays(counts.shape[0], counts.shape[1], d, w, counts[d, w])

    @property
    def D(self):
        return self.n_docs

    @property
    def V(self):
        return self.n_terms

    @property
    def nnz(self):
        return len(self.counts)

    @property
    def total_tokens(self) -> int:
        return corpus_total_tokens(self)

    @property
    def entries(self) -> list:
        return list(zip(self.doc_ids.tolist(), self.term_ids.tolist(), self.counts.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_docs, self.n_terms), dtype=np.int64)
        out[self.doc_ids, self.term_ids] = self.counts
        return out

    def scaled(self, factor: int) -> "Corpus":
        """Copy with every count multiplied by a positive integer."""
        if int(factor) != factor or factor < 1:
            raise ValidationError("scale factor must be a positive integer")
        return Corpus(self.n_docs, self.n_terms, self.doc_ids, self.term_ids,
                      self.counts * int(factor), self.doc_labels)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.n_docs == other.n_docs
            and self.n_terms == other.n_terms
            and np.array_equal(self.doc_ids, other.doc_ids)
            and np.array_equal(self.term_ids, other.term_ids)
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self):
        return f"Corpus(D={self.n_docs}, V={self.n_terms}, nnz={self.nnz}, tokens={self.total_tokens})"


def corpus_total_tokens(corpus: Corpus) -> int:
    """Total number of tokens, the sum of N_d over documents."""
    return int(corpus.doc_totals.sum())


def _read_text(src: Source) -> str:
    if isinstance(src, bytes):
        data = src
    elif isinstance(src, str):
        return src
    else:
        data = src.read()
        if isinstance(data, str):
            return data
    return data.decode("utf-8")


def _parse_int(token, line, what, exc=HeaderError):
    try:
        return int(token)
    except ValueError:
        raise exc(f"{what} is not an integer: {token!r}", line) from None


def parse_vocab(vocab_text: Source, expected: Optional[int] = None) -> Vocabulary:
    text = _read_text(vocab_text)
    terms = text.split("\n")
    if terms and terms[-1] == "":
        terms.pop()
    terms = [t.rstrip("\r") for t in terms]
    if expected is not None and len(terms) != expected:
        raise VocabSizeError(
            f"vocabulary has {len(terms)} lines but the docword header declares W={expected}",
            min(len(terms), expected) + 1,
        )
    seen = {}
    for i, t in enumerate(terms):
        if t in seen:
            raise ParseError(f"duplicate term {t!r} (first seen on line {seen[t] + 1})", i + 1)
        seen[t] = i
    return Vocabulary(terms)


def parse_docword(docword_text: Source) -> Corpus:
    """Parse a UCI docword stream into a Corpus."""
    lines = _read_text(docword_text).split("\n")
    if len(lines) < 3:
        raise HeaderError("missing header: expected D, W and NNZ lines", len(lines) + 1)
    header = []
    for i, what in enumerate(("D", "W", "NNZ")):
        tok = lines[i].strip()
        if not tok or len(tok.split()) != 1:
            raise HeaderError(f"expected a single integer {what}, got {lines[i]!r}", i + 1)
        header.append(_parse_int(tok, i + 1, what))
    D, W, nnz = header
    if D < 1 or W < 1 or nnz < 0:
        raise HeaderError(f"invalid header values D={D}, W={W}, NNZ={nnz}", 1)

    d_ids, w_ids, counts = [], [], []
    for lineno, raw in enumerate(lines[3:], start=4):
        parts = raw.split()
        if not parts:
            continue
        if len(d_ids) == nnz:
            raise NNZMismatchError(f"more entry lines than NNZ={nnz}", lineno)
        if len(parts) != 3:
            raise ParseError(f"expected 'docID wordID count', got {raw.strip()!r}", lineno)
        d = _parse_int(parts[0], lineno, "docID", ParseError)
        w = _parse_int(parts[1], lineno, "wordID", ParseError)
        try:
            c = int(parts[2])
        except ValueError:
            raise CountError(f"count must be a positive integer, got {parts[2]!r}", lineno) from None
        if not 1 <= d <= D:
            raise IndexRangeError(f"document id {d} out of range [1, {D}]", lineno)
        if not 1 <= w <= W:
            raise IndexRangeError(f"term id {w} out of range [1, {W}]", lineno)
        if c <= 0:
            raise CountError(f"count must be positive, got {c}", lineno)
        d_ids.append(d - 1)
        w_ids.append(w - 1)
        counts.append(c)
    if len(d_ids) != nnz:
        raise NNZMismatchError(f"header declares NNZ={nnz} but found {len(d_ids)} entries", len(lines))

    seen = np.zeros(D, dtype=bool)
    seen[d_ids] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0]) + 1
        raise EmptyDocumentError(f"document {missing} has no entries", 1)
    return Corpus.from_arrays(D, W, d_ids, w_ids, counts)


def parse_uci_bow(docword_text: Source, vocab_text: Source) -> tuple[Corpus, Vocabulary]:
    """Parse a docword stream and its vocabulary.

    Repeated (d, w) lines are summed.  Raises a ``ParseError`` subclass that
    names the offending line for every malformed input.
    """
    corpus = parse_docword(docword_text)
    vocab = parse_vocab(vocab_text, expected=corpus.n_terms)
    return corpus, vocab


def load_uci(docword_path, vocab_path) -> tuple[Corpus, Vocabulary]:
    with open(docword_path, "rb") as f, open(vocab_path, "rb") as g:
        return parse_uci_bow(f, g)


def format_uci(corpus: Corpus) -> str:
    buf = io.StringIO()
    buf.write(f"{corpus.n_docs}\n{corpus.n_terms}\n{corpus.nnz}\n")
    for d, w, c in zip(corpus.doc_ids.tolist(), corpus.term_ids.tolist(), corpus.counts.tolist()):
        buf.write(f"{d + 1} {w + 1} {c}\n")
    return buf.getvalue()


def write_uci(corpus: Corpus, docword_path, vocab: Optional[Vocabulary] = None, vocab_path=None):
    with open(docword_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_uci(corpus))
    if vocab_path is not None:
        vocab = vocab or Vocabulary.placeholder(corpus.n_terms)
        with open(vocab_path, "w", encoding="utf-8", newline="\n") as f:
            f.write("".join(t + "\n" for t in vocab.terms))
