import numpy as np
import pytest

from kpsign.layout import (
    FACE_FULL_COUNT,
    FACE_SUBSET_128,
    KeypointLayout,
    LayoutError,
    build_layout,
    layout_from_preset,
    preset_for_k,
    total_keypoints,
)


def test_total_keypoints_full(full_layout):
    assert total_keypoints(full_layout) == 543


def test_total_keypoints_reduced(reduced_layout):
    assert total_keypoints(reduced_layout) == 203


def test_total_keypoints_pose_only():
    assert total_keypoints(KeypointLayout(groups=(("pose", 33),))) == 33


def test_build_layout_no_face():
    assert total_keypoints(build_layout(0, ())) == 75


def test_build_layout_groups(full_layout):
    assert full_layout.groups == (
        ("pose", 33), ("left_hand", 21), ("right_hand", 21), ("face", 468)
    )


def test_build_layout_rejects_unknown_face_count():
    with pytest.raises(LayoutError):
        build_layout(50)


def test_build_layout_custom_subset():
    layout = build_layout(4, (0, 10, 20, 30))
    assert total_keypoints(layout) == 79
    assert layout.face_subset == (0, 10, 20, 30)


def test_build_layout_subset_length_mismatch():
    with pytest.raises(LayoutError):
        build_layout(4, (0, 1))


def test_face_subset_constant():
    assert len(FACE_SUBSET_128) == 128
    assert len(set(FACE_SUBSET_128)) == 128
    assert all(0 <= i < FACE_FULL_COUNT for i in FACE_SUBSET_128)


@pytest.mark.parametrize("face_count", [468, 128])
def test_flip_permutation_is_involution(face_count):
    layout = build_layout(face_count)
    perm = layout.flip_permutation()
    assert np.array_equal(perm[perm], np.arange(layout.total()))


def test_flip_pairs_swap_hands(full_layout):
    lh = full_layout.group_offset("left_hand")
    rh = full_layout.group_offset("right_hand")
    perm = full_layout.flip_permutation()
    for i in range(21):
        assert perm[lh + i] == rh + i
        assert perm[rh + i] == lh + i


def test_flip_pairs_each_index_once(full_layout):
    seen = [i for pair in full_layout.flip_pairs for i in pair]
    assert len(seen) == len(set(seen))


def test_duplicate_pair_index_rejected():
    with pytest.raises(LayoutError):
        KeypointLayout(groups=(("pose", 4),), flip_pairs=((0, 1), (1, 2)))


def test_self_pair_rejected():
    with pytest.raises(LayoutError):
        KeypointLayout(groups=(("pose", 4),), flip_pairs=((2, 2),))


def test_pair_out_of_range_rejected():
    with pytest.raises(LayoutError):
        KeypointLayout(groups=(("pose", 4),), flip_pairs=((0, 7),))


def test_duplicate_face_subset_rejected():
    with pytest.raises(LayoutError):
        KeypointLayout(groups=(("face", 3),), face_subset=(1, 1, 2))


def test_face_subset_out_of_range_rejected():
    with pytest.raises(LayoutError):
        KeypointLayout(groups=(("face", 2),), face_subset=(0, 468))


def test_empty_layout_rejected():
    with pytest.raises(LayoutError):
        KeypointLayout(groups=(("pose", 0),))


def test_presets():
    assert layout_from_preset("full").total() == 543
    assert layout_from_preset("reduced").total() == 203
    assert layout_from_preset("upper").total() == 75
    with pytest.raises(LayoutError):
        layout_from_preset("nope")
    assert preset_for_k(203) == "reduced"
    assert preset_for_k(7) is None
