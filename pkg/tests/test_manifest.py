import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpsign.kpsq import KpsqHeader, write_kpsq_file
from kpsign.manifest import (
    ManifestEntry,
    ManifestError,
    Vocabulary,
    entries_for_split,
    load_vocabulary,
    load_windows,
    read_manifest,
    sample_window,
    save_vocabulary,
    split_by_signer,
    write_manifest,
)


def test_vocabulary_line_number_is_index():
    vocab = load_vocabulary(io.StringIO("alpha\nbeta\ngamma\n"))
    assert vocab.lookup("beta") == 1
    assert vocab.word(2) == "gamma"
    assert len(vocab) == 3


def test_vocabulary_duplicate_rejected():
    with pytest.raises(ManifestError):
        Vocabulary(["a", "b", "a"])


def test_vocabulary_large():
    vocab = Vocabulary([f"w{i}" for i in range(8162)])
    assert len(vocab) == 8162
    assert vocab.lookup("w8161") == 8161


def test_vocabulary_unknown_word():
    with pytest.raises(ManifestError):
        Vocabulary(["a"]).lookup("b")


def test_vocabulary_file_roundtrip(tmp_path):
    vocab = Vocabulary(["hello", "world"])
    save_vocabulary(tmp_path / "vocab.txt", vocab)
    assert load_vocabulary(tmp_path / "vocab.txt").words == ("hello", "world")


def test_manifest_roundtrip(tmp_path):
    entries = [
        ManifestEntry("a.kpsq", 0, "hello", 1, "train"),
        ManifestEntry("b.kpsq", 5, "world", 2, None),
    ]
    path = tmp_path / "manifest.tsv"
    write_manifest(path, entries)
    assert read_manifest(path) == entries


def test_manifest_field_count_error(tmp_path):
    path = tmp_path / "manifest.tsv"
    path.write_text("a.kpsq\t0\thello\n")
    with pytest.raises(ManifestError):
        read_manifest(path)


def test_manifest_vocab_check(tmp_path):
    path = tmp_path / "manifest.tsv"
    write_manifest(path, [ManifestEntry("a.kpsq", 0, "nope", 1, "train")])
    with pytest.raises(ManifestError):
        read_manifest(path, Vocabulary(["hello"]))


def test_manifest_entry_validation():
    with pytest.raises(ManifestError):
        ManifestEntry("a", -1, "w", 0, "train")
    with pytest.raises(ManifestError):
        ManifestEntry("a", 0, "w", 0, "banana")
    with pytest.raises(ManifestError):
        ManifestEntry("a\tb", 0, "w", 0, "train")


@pytest.fixture
def hundred_frame_file(tmp_path):
    path = tmp_path / "long.kpsq"
    coords = np.random.default_rng(1).normal(size=(100, 4, 2)).astype(np.float32)
    head = KpsqHeader(k=4, frame_count=100, fps=25.0, width=444, height=444, signer_id=3)
    write_kpsq_file(path, head, coords)
    return path


def test_sample_window_start(hundred_frame_file):
    w = sample_window(hundred_frame_file, 0, 16)
    assert [f.frame_index for f in w.frames] == list(range(16))
    assert w.signer_id == 3


def test_sample_window_boundary(hundred_frame_file):
    w = sample_window(hundred_frame_file, 84, 16)
    assert [f.frame_index for f in w.frames] == list(range(84, 100))


def test_sample_window_out_of_range(hundred_frame_file):
    with pytest.raises(ManifestError):
        sample_window(hundred_frame_file, 90, 16)
    with pytest.raises(ManifestError):
        sample_window(hundred_frame_file, -1, 16)


def entries_for(signer_counts):
    entries = []
    for signer, count in signer_counts.items():
        for j in range(count):
            entries.append(ManifestEntry(f"s{signer}_{j}.kpsq", 0, "w", signer, None))
    return entries


def test_split_ten_signers_near_ratios():
    entries = entries_for({s: 10 for s in range(10)})
    train, val, test = split_by_signer(entries, (0.8, 0.1, 0.1), seed=5)
    sizes = sorted([len({e.signer_id for e in part}) for part in (train, val, test)])
    assert sizes == [1, 1, 8]
    signer_sets = [{e.signer_id for e in part} for part in (train, val, test)]
    for i in range(3):
        for j in range(i + 1, 3):
            assert not (signer_sets[i] & signer_sets[j])


def test_split_three_signers_one_each():
    entries = entries_for({0: 4, 1: 4, 2: 4})
    parts = split_by_signer(entries, (0.8, 0.1, 0.1), seed=0)
    assert [len({e.signer_id for e in p}) for p in parts] == [1, 1, 1]


def test_split_deterministic():
    entries = entries_for({s: 5 for s in range(7)})
    a = split_by_signer(entries, (0.6, 0.2, 0.2), seed=42)
    b = split_by_signer(entries, (0.6, 0.2, 0.2), seed=42)
    assert a == b


def test_split_needs_three_signers():
    with pytest.raises(ManifestError):
        split_by_signer(entries_for({0: 5, 1: 5}), (0.8, 0.1, 0.1), seed=0)


def test_split_ratio_validation():
    entries = entries_for({0: 1, 1: 1, 2: 1})
    with pytest.raises(ManifestError):
        split_by_signer(entries, (0.8, 0.1, 0.2), seed=0)


def test_split_assigns_split_fields():
    entries = entries_for({s: 2 for s in range(4)})
    train, val, test = split_by_signer(entries, (0.5, 0.25, 0.25), seed=1)
    assert all(e.split == "train" for e in train)
    assert all(e.split == "val" for e in val)
    assert all(e.split == "test" for e in test)
    assert entries_for_split(train + val + test, "val") == val


@settings(max_examples=80, deadline=None)
@given(
    signer_counts=st.dictionaries(
        st.integers(0, 40), st.integers(1, 8), min_size=3, max_size=15
    ),
    seed=st.integers(0, 2**31 - 1),
    split_point=st.floats(0.34, 0.9),
)
def test_split_signer_sets_always_disjoint(signer_counts, seed, split_point):
    rest = (1.0 - split_point) / 2.0
    parts = split_by_signer(entries_for(signer_counts), (split_point, rest, rest), seed)
    signer_sets = [{e.signer_id for e in part} for part in parts]
    assert not (signer_sets[0] & signer_sets[1])
    assert not (signer_sets[0] & signer_sets[2])
    assert not (signer_sets[1] & signer_sets[2])
    assert sum(len(p) for p in parts) == sum(signer_counts.values())


def test_load_windows(tmp_path, hundred_frame_file):
    vocab = Vocabulary(["w"])
    entries = [
        ManifestEntry(hundred_frame_file.name, 0, "w", 3, "train"),
        ManifestEntry(hundred_frame_file.name, 10, "w", 3, "train"),
    ]
    windows = load_windows(hundred_frame_file.parent, entries, vocab, 16)
    assert len(windows) == 2
    assert windows[1].frames[0].frame_index == 10
    assert windows[0].label_id == 0
