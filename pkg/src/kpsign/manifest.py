"""Labeled window manifests, vocabularies, and signer-disjoint splits.

A manifest is tab-separated text, one window per line:
``file_path  start_frame  label_word  signer_id  split`` where split is
train/val/test or ``-`` until a split has been assigned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .kpsq import KpsqFile, read_kpsq_file
from .windows import Frame, Window

SPLITS = ("train", "val", "test")
UNSPLIT = "-"


class ManifestError(ValueError):
    """Raised for malformed manifests or vocabularies."""


@dataclass(frozen=True)
class ManifestEntry:
    file_path: str
    start_frame: int
    label_word: str
    signer_id: int
    split: Optional[str] = None

    def __post_init__(self):
        if self.start_frame < 0:
            raise ManifestError(f"start_frame must be >= 0, got {self.start_frame}")
        if self.split is not None and self.split not in SPLITS:
            raise ManifestError(f"split must be one of {SPLITS}, got {self.split!r}")
        if "\t" in self.file_path or "\t" in self.label_word:
            raise ManifestError("manifest fields must not contain tabs")


class Vocabulary:
    """Bijection between label words and dense 0-based class indices."""

    def __init__(self, words: Sequence[str]):
        self._words: Tuple[str, ...] = tuple(words)
        self._index: Dict[str, int] = {}
        for i, w in enumerate(self._words):
            if w in self._index:
                raise ManifestError(f"duplicate word {w!r} at lines {self._index[w] + 1} and {i + 1}")
            self._index[w] = i

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def lookup(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise ManifestError(f"word {word!r} not in vocabulary") from None

    def word(self, index: int) -> str:
        return self._words[index]

    @property
    def words(self) -> Tuple[str, ...]:
        return self._words


def load_vocabulary(source: Union[str, Path, Iterable[str]]) -> Vocabulary:
    """One word per line; the line number (0-based) is the class index."""
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = [line.rstrip("\n") for line in source]
    return Vocabulary([line.strip() for line in lines if line.strip()])


def save_vocabulary(path: Union[str, Path], vocab: Vocabulary) -> None:
    Path(path).write_text("".join(w + "\n" for w in vocab.words), encoding="utf-8")


def write_manifest(path: Union[str, Path], entries: Iterable[ManifestEntry]) -> None:
    lines = []
    for e in entries:
        lines.append(
            f"{e.file_path}\t{e.start_frame}\t{e.label_word}\t{e.signer_id}\t{e.split or UNSPLIT}\n"
        )
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_manifest(path: Union[str, Path], vocab: Optional[Vocabulary] = None) -> List[ManifestEntry]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ManifestError(f"line {lineno}: expected 5 tab-separated fields, got {len(fields)}")
        file_path, start_frame, label_word, signer_id, split = fields
        entry = ManifestEntry(
            file_path=file_path,
            start_frame=int(start_frame),
            label_word=label_word,
            signer_id=int(signer_id),
            split=None if split == UNSPLIT else split,
        )
        if vocab is not None and label_word not in vocab:
            raise ManifestError(f"line {lineno}: label {label_word!r} not in vocabulary")
        entries.append(entry)
    return entries


def sample_window(
    source: Union[str, Path, KpsqFile],
    start_frame: int,
    window_len: int,
    label_id: int = 0,
) -> Window:
    """Cut ``window_len`` consecutive frames from a keypoint file.

    Out-of-range requests are rejected; frames are never fabricated.
    """
    kf = source if isinstance(source, KpsqFile) else read_kpsq_file(source)
    header = kf.header
    if start_frame < 0 or start_frame + window_len > header.frame_count:
        raise ManifestError(
            f"window [{start_frame}, {start_frame + window_len}) out of range "
            f"for {header.frame_count}-frame file"
        )
    frames = tuple(
        Frame(
            coords=kf.coords[t].astype(np.float64),
            width=header.width,
            height=header.height,
            frame_index=t,
        )
        for t in range(start_frame, start_frame + window_len)
    )
    return Window(frames=frames, label_id=label_id, signer_id=header.signer_id)


def split_by_signer(
    entries: Sequence[ManifestEntry],
    ratios: Tuple[float, float, float],
    seed: int,
) -> Tuple[List[ManifestEntry], List[ManifestEntry], List[ManifestEntry]]:
    """Partition signers (never windows) into train/val/test.

    Signers are shuffled by ``seed`` and assigned greedily to whichever
    split is furthest below its entry-count target, except that every
    split is guaranteed at least one signer.  The three signer sets are
    pairwise disjoint by construction.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ManifestError(f"ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ManifestError("ratios must be non-negative")

    per_signer: Dict[int, List[ManifestEntry]] = {}
    for e in entries:
        per_signer.setdefault(e.signer_id, []).append(e)
    signers = sorted(per_signer)
    if len(signers) < 3:
        raise ManifestError(f"signer-disjoint split needs at least 3 signers, got {len(signers)}")

    rng = np.random.Generator(np.random.Philox(key=seed))
    order = [signers[i] for i in rng.permutation(len(signers))]

    total = len(entries)
    targets = [r * total for r in ratios]
    assigned_counts = [0, 0, 0]
    assignment: Dict[int, int] = {}
    for pos, signer in enumerate(order):
        remaining = len(order) - pos
        empty = [s for s in range(3) if not any(a == s for a in assignment.values())]
        candidates = empty if remaining <= len(empty) else range(3)
        best = max(candidates, key=lambda s: (targets[s] - assigned_counts[s], -s))
        assignment[signer] = best
        assigned_counts[best] += len(per_signer[signer])

    out: Tuple[List[ManifestEntry], ...] = ([], [], [])
    for e in entries:
        s = assignment[e.signer_id]
        out[s].append(replace(e, split=SPLITS[s]))
    return out


def entries_for_split(entries: Sequence[ManifestEntry], split: str) -> List[ManifestEntry]:
    if split not in SPLITS:
        raise ManifestError(f"unknown split {split!r}")
    return [e for e in entries if e.split == split]


def load_windows(
    root: Union[str, Path],
    entries: Sequence[ManifestEntry],
    vocab: Vocabulary,
    window_len: int,
) -> List[Window]:
    """Materialize every manifest entry as a Window, caching file reads."""
    root = Path(root)
    cache: Dict[str, KpsqFile] = {}
    windows = []
    for e in entries:
        if e.file_path not in cache:
            cache[e.file_path] = read_kpsq_file(root / e.file_path)
        windows.append(
            sample_window(cache[e.file_path], e.start_frame, window_len, vocab.lookup(e.label_word))
        )
    return windows
