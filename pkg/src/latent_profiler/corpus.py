"""Sequence sampling and n-gram frequency profiles.

A latent-space sample is only as representative as the text behind it. These
helpers draw unique, length-bounded sequences from a corpus and compare the
unigram, bigram and length distributions of the sample with the full corpus
by Jensen-Shannon divergence (natural log, so the maximum is ``ln 2``).
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Hashable, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DataError
from .pointcloud import make_rng

Token = str
TokenSeq = Tuple[Token, ...]


@dataclass(frozen=True)
class CorpusSample:
    sequences: List[TokenSeq]
    source_hash: str
    seed: int
    eligible: int


@dataclass(frozen=True)
class FrequencyProfile:
    unigram: Dict[Token, float]
    bigram: Dict[Tuple[Token, Token], float]
    lengths: Dict[int, float]


@dataclass(frozen=True)
class ProfileComparison:
    unigram_jsd: float
    bigram_jsd: float
    length_jsd: float
    tables: Dict[str, List[tuple]]

    def summary(self) -> dict:
        return {
            "unigram_jsd": self.unigram_jsd,
            "bigram_jsd": self.bigram_jsd,
            "length_jsd": self.length_jsd,
        }


def read_token_lines(paths: Iterable) -> Iterable[TokenSeq]:
    """Yield whitespace-tokenised lines from each file in turn (empty lines included)."""
    for path in paths:
        with open(Path(path), "r", encoding="utf-8") as fh:
            for line in fh:
                yield tuple(line.split())


def sample_sequences(
    corpus: Iterable[Sequence[Token]],
    count: int = 5000,
    min_len: int = 3,
    max_len: int = 50,
    seed: int = 0,
) -> CorpusSample:
    """Uniformly sample ``count`` distinct sequences with length in ``[min_len, max_len]``.

    Duplicates count once; empty sequences are never eligible. The eligible
    set is kept in first-seen order so the sample depends only on the corpus
    and the seed.
    """
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    if not 1 <= min_len <= max_len:
        raise ConfigurationError(f"need 1 <= min_len <= max_len, got {min_len}, {max_len}")
    digest = hashlib.sha256()
    seen: Dict[TokenSeq, None] = {}
    for seq in corpus:
        seq = tuple(seq)
        digest.update(" ".join(seq).encode("utf-8"))
        digest.update(b"\n")
        if min_len <= len(seq) <= max_len:
            seen.setdefault(seq, None)
    eligible = list(seen)
    if len(eligible) < count:
        raise DataError(
            f"corpus has only {len(eligible)} eligible unique sequences of length "
            f"{min_len}-{max_len}; {count} requested"
        )
    rng = make_rng(seed)
    picks = rng.choice(len(eligible), size=count, replace=False)
    return CorpusSample(
        sequences=[eligible[i] for i in picks],
        source_hash=digest.hexdigest(),
        seed=int(seed),
        eligible=len(eligible),
    )


def _normalise(counter: Counter) -> Dict:
    total = sum(counter.values())
    return {key: value / total for key, value in counter.items()} if total else {}


def frequency_profile(sequences: Iterable[Sequence[Token]]) -> FrequencyProfile:
    unigrams: Counter = Counter()
    bigrams: Counter = Counter()
    lengths: Counter = Counter()
    any_seq = False
    for seq in sequences:
        any_seq = True
        unigrams.update(seq)
        bigrams.update(zip(seq, seq[1:]))
        lengths[len(seq)] += 1
    if not any_seq:
        raise DataError("cannot profile an empty sequence list")
    return FrequencyProfile(_normalise(unigrams), _normalise(bigrams), _normalise(lengths))


def jensen_shannon(p: Dict[Hashable, float], q: Dict[Hashable, float]) -> float:
    """JSD in nats over the union of keys; missing keys have probability 0."""
    keys = list(p.keys() | q.keys())
    if not keys:
        return 0.0
    pv = np.array([p.get(key, 0.0) for key in keys], dtype=np.float64)
    qv = np.array([q.get(key, 0.0) for key in keys], dtype=np.float64)
    mid = 0.5 * (pv + qv)

    def kl(a):
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / mid[mask])))

    return float(min(math.log(2.0), max(0.0, 0.5 * kl(pv) + 0.5 * kl(qv))))


def _rank_table(sample: Dict, full: Dict) -> List[tuple]:
    """Rows ``(rank, key, full_freq, sample_freq)`` ordered by full-corpus frequency."""
    keys = sorted(full.keys() | sample.keys(), key=lambda key: (-full.get(key, 0.0), -sample.get(key, 0.0), str(key)))
    return [(rank, key, full.get(key, 0.0), sample.get(key, 0.0)) for rank, key in enumerate(keys, start=1)]


def compare_profiles(sample: FrequencyProfile, full: FrequencyProfile) -> ProfileComparison:
    return ProfileComparison(
        unigram_jsd=jensen_shannon(sample.unigram, full.unigram),
        bigram_jsd=jensen_shannon(sample.bigram, full.bigram),
        length_jsd=jensen_shannon(sample.lengths, full.lengths),
        tables={
            "unigram": _rank_table(sample.unigram, full.unigram),
            "bigram": _rank_table(sample.bigram, full.bigram),
            "length": sorted(
                _rank_table(sample.lengths, full.lengths), key=lambda row: row[1]
            ),
        },
    )


def shuffled_token_baseline(sequences: Sequence[Sequence[Token]], seed: int = 0) -> List[TokenSeq]:
    """Relabel the vocabulary by a random permutation.

    The result keeps sequence lengths and the shape of the frequency spectrum
    but attaches each frequency to the wrong token, giving a reference level
    of divergence that a representative sample should beat.
    """
    vocab = sorted({tok for seq in sequences for tok in seq})
    perm = make_rng(seed).permutation(len(vocab))
    mapping = {tok: vocab[i] for tok, i in zip(vocab, perm)}
    return [tuple(mapping[tok] for tok in seq) for seq in sequences]
