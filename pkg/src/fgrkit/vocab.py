"""Functional-group vocabularies: curated SMARTS lists and mined token patterns.

The curated (FG) side loads `<name>\\t<SMARTS>` files and validates every
entry against the query engine; rejects are reported with line numbers and
only tolerated when ``skip_invalid`` is set.

The mined (MFG) side implements iterative most-frequent-pair merging over
tokenized SMILES: count all adjacent token pairs (overlaps included), merge
the most frequent pair corpus-wide by greedy left-to-right replacement,
append it to the vocabulary, and repeat until the best frequency drops
below the threshold or the vocabulary hits its size cap. Ties break on the
lexicographically smallest (left, right) pair. Pair counts are updated
incrementally by re-counting only the sequences that contain the merged
pair, which is exactly equivalent to a full re-count.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

from .chem import tokenize_smiles
from .errors import (
    EmptyCorpus,
    FgrError,
    MalformedLine,
    ParseError,
    VersionMismatch,
)
from .smarts import QueryPattern, parse_smarts

_US = "\x1f"  # unit separator keeps multi-character tokens unambiguous


# ---------------------------------------------------------------------------
# curated FG vocabulary
# ---------------------------------------------------------------------------

@dataclass
class FGEntry:
    name: str
    smarts: str
    pattern: QueryPattern


@dataclass
class FGVocabulary:
    """Ordered curated functional groups; indices define multi-hot bits."""

    entries: list[FGEntry] = field(default_factory=list)
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def fingerprint(self) -> str:
        body = "\n".join(f"{e.name}\t{e.smarts}" for e in self.entries)
        return hashlib.sha256(body.encode()).hexdigest()


def load_fg_vocab(path, skip_invalid: bool = False) -> FGVocabulary:
    """Load a `<name>\\t<SMARTS>` vocabulary file.

    Comment lines (#) and blank lines are ignored. Unparseable entries fail
    the load with their line number unless ``skip_invalid`` is set, in which
    case they are listed in the returned vocabulary's ``rejected`` report.
    """
    vocab = FGVocabulary()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                reason = "expected <name><TAB><SMARTS>"
                if skip_invalid:
                    vocab.rejected.append((lineno, reason))
                    continue
                raise MalformedLine(lineno, reason)
            name, smarts = line.split("\t", 1)
            name, smarts = name.strip(), smarts.strip()
            if not name or not smarts:
                reason = "empty name or SMARTS"
                if skip_invalid:
                    vocab.rejected.append((lineno, reason))
                    continue
                raise MalformedLine(lineno, reason)
            try:
                pattern = parse_smarts(smarts)
            except ParseError as exc:
                if skip_invalid:
                    vocab.rejected.append((lineno, str(exc)))
                    continue
                raise MalformedLine(lineno, str(exc)) from exc
            vocab.entries.append(FGEntry(name=name, smarts=smarts, pattern=pattern))
    return vocab


# ---------------------------------------------------------------------------
# mined MFG vocabulary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MFGEntry:
    tokens: tuple[str, ...]
    frequency: int

    @property
    def text(self) -> str:
        return "".join(self.tokens)


@dataclass
class MFGVocabulary:
    """Mined pattern vocabulary with mining provenance.

    Initial single-token entries precede merged entries; merged entries
    appear in merge order and always span >= 2 base tokens.
    """

    entries: list[MFGEntry] = field(default_factory=list)
    eta: int = 0
    mvs: int = 0
    corpus_fingerprint: str = ""
    skipped_lines: int = 0  # transient mining report, not persisted
    merge_log: list[tuple[tuple[str, str], int]] = field(default_factory=list)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MFGVocabulary):
            return NotImplemented
        return (self.entries == other.entries and self.eta == other.eta
                and self.mvs == other.mvs
                and self.corpus_fingerprint == other.corpus_fingerprint)

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def n_initial(self) -> int:
        return sum(1 for e in self.entries if len(e.tokens) == 1)

    @property
    def merged_entries(self) -> list[MFGEntry]:
        return [e for e in self.entries if len(e.tokens) > 1]

    @property
    def fingerprint(self) -> str:
        body = "\n".join(f"{e.frequency}\t{_US.join(e.tokens)}" for e in self.entries)
        head = f"eta={self.eta} mvs={self.mvs} corpus={self.corpus_fingerprint}\n"
        return hashlib.sha256((head + body).encode()).hexdigest()


def scan_pair_frequencies(sequences: list[list[str]]) -> dict[tuple[str, str], int]:
    """Exact order-sensitive adjacent-pair counts, overlaps included."""
    if not sequences:
        raise EmptyCorpus("no sequences to scan")
    counts: dict[tuple[str, str], int] = {}
    for seq in sequences:
        for a, b in zip(seq, seq[1:]):
            counts[(a, b)] = counts.get((a, b), 0) + 1
    return counts


def _greedy_replace(seq: list[str], a: str, b: str, merged: str) -> list[str]:
    out: list[str] = []
    i = 0
    n = len(seq)
    while i < n:
        if i + 1 < n and seq[i] == a and seq[i + 1] == b:
            out.append(merged)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def mine_mfg(corpus: Iterable[str], eta: int, mvs: int) -> MFGVocabulary:
    """Mine a pattern vocabulary from SMILES strings.

    eta=500 / mvs=30000 suit corpora of millions of molecules; desk-scale
    corpora want a much smaller eta. Untokenizable lines are skipped and
    counted in ``skipped_lines``. Deterministic given corpus order: ties
    break on the lexicographically smallest (left, right) token pair.
    """
    if eta <= 0 or mvs <= 0:
        raise ValueError("eta and mvs must be positive")
    sequences: list[list[str]] = []
    kept_lines: list[str] = []
    skipped = 0
    for line in corpus:
        smiles = line.strip()
        if not smiles:
            continue
        try:
            sequences.append(tokenize_smiles(smiles))
            kept_lines.append(smiles)
        except FgrError:
            skipped += 1
    if not sequences:
        raise EmptyCorpus("no tokenizable SMILES in corpus")

    fingerprint = hashlib.sha256("\n".join(kept_lines).encode()).hexdigest()

    token_counts: dict[str, int] = {}
    for seq in sequences:
        for tok in seq:
            token_counts[tok] = token_counts.get(tok, 0) + 1
    base_tokens: dict[str, tuple[str, ...]] = {t: (t,) for t in token_counts}

    vocab = MFGVocabulary(eta=eta, mvs=mvs, corpus_fingerprint=fingerprint,
                          skipped_lines=skipped)
    for tok in sorted(token_counts):
        vocab.entries.append(MFGEntry(tokens=(tok,), frequency=token_counts[tok]))

    counts = scan_pair_frequencies(sequences)
    # superset index: sequences that contained each pair at some point
    pair_seqs: dict[tuple[str, str], set[int]] = {}
    for sid, seq in enumerate(sequences):
        for pair in zip(seq, seq[1:]):
            pair_seqs.setdefault(pair, set()).add(sid)

    seen_sequences = {e.tokens for e in vocab.entries}
    while vocab.size < mvs and counts:
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        (left, right), freq = best
        if freq < eta:
            break
        merged = left + right
        base_tokens[merged] = base_tokens[left] + base_tokens[right]
        for sid in sorted(pair_seqs.get((left, right), ())):
            seq = sequences[sid]
            replaced = _greedy_replace(seq, left, right, merged)
            if len(replaced) == len(seq):
                continue  # stale index entry; pair no longer present
            for pair in zip(seq, seq[1:]):
                counts[pair] -= 1
                if counts[pair] == 0:
                    del counts[pair]
            for pair in zip(replaced, replaced[1:]):
                counts[pair] = counts.get(pair, 0) + 1
                pair_seqs.setdefault(pair, set()).add(sid)
            sequences[sid] = replaced
        vocab.merge_log.append(((left, right), freq))
        base = base_tokens[merged]
        # set semantics: distinct merge routes can concatenate to the same
        # token sequence; the vocabulary keeps one entry
        if base not in seen_sequences:
            seen_sequences.add(base)
            vocab.entries.append(MFGEntry(tokens=base, frequency=freq))

    return vocab


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(
    r"^fgr-mfg v1 eta=(\d+) mvs=(\d+) corpus=([0-9a-f]+)$")


def save_vocab(vocab: MFGVocabulary, path) -> None:
    """Write the versioned line-oriented MFG vocabulary format."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"fgr-mfg v1 eta={vocab.eta} mvs={vocab.mvs} "
                 f"corpus={vocab.corpus_fingerprint}\n")
        for entry in vocab.entries:
            fh.write(f"{entry.frequency}\t{_US.join(entry.tokens)}\n")


def load_mfg_vocab(path) -> MFGVocabulary:
    """Load a saved MFG vocabulary; lossless inverse of save_vocab."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        match = _HEADER_RE.match(header)
        if match is None:
            raise VersionMismatch(f"not an fgr-mfg v1 file: {header[:60]!r}")
        vocab = MFGVocabulary(eta=int(match.group(1)), mvs=int(match.group(2)),
                              corpus_fingerprint=match.group(3))
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise MalformedLine(lineno, "expected <frequency><TAB><tokens>")
            freq_text, tok_text = line.split("\t", 1)
            try:
                freq = int(freq_text)
            except ValueError as exc:
                raise MalformedLine(lineno, f"bad frequency {freq_text!r}") from exc
            vocab.entries.append(
                MFGEntry(tokens=tuple(tok_text.split(_US)), frequency=freq))
    return vocab


def read_corpus(path) -> Iterator[str]:
    """Yield SMILES lines from a text or gzip corpus file."""
    opener: TextIO
    if str(path).endswith(".gz"):
        opener = io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    else:
        opener = open(path, "r", encoding="utf-8")
    with opener as fh:
        for line in fh:
            yield line.rstrip("\n")
