"""Keypoint layouts: named groups, mirror pairs, face-landmark subsets.

A layout fixes the meaning of the K rows in every frame: which index is
which body part, which indices swap under a horizontal mirror, and (for
reduced layouts) which of the 468 face-mesh landmarks are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

POSE_COUNT = 33
HAND_COUNT = 21
FACE_FULL_COUNT = 468

# Holistic pose landmarks come in left/right pairs (eyes, ears, shoulders,
# elbows, wrists, finger anchors, hips, knees, ankles, heels, foot tips);
# index 0 (nose) sits on the midline.
POSE_FLIP_PAIRS: Tuple[Tuple[int, int], ...] = (
    (1, 4), (2, 5), (3, 6),      # eye inner / center / outer
    (7, 8),                      # ears
    (9, 10),                     # mouth corners
    (11, 12),                    # shoulders
    (13, 14),                    # elbows
    (15, 16),                    # wrists
    (17, 18),                    # pinky anchors
    (19, 20),                    # index anchors
    (21, 22),                    # thumb anchors
    (23, 24),                    # hips
    (25, 26),                    # knees
    (27, 28),                    # ankles
    (29, 30),                    # heels
    (31, 32),                    # foot tips
)

# Face-mesh contour rings.  The oval ring starts at the forehead midline
# (10) and runs clockwise through the chin midline (152).
FACE_OVAL = (
    10, 338, 297, 332, 284, 251, 389, 356, 454, 323, 361, 288,
    397, 365, 379, 378, 400, 377, 152, 148, 176, 149, 150, 136,
    172, 58, 132, 93, 234, 127, 162, 21, 54, 103, 67, 109,
)
RIGHT_EYE = (33, 7, 163, 144, 145, 153, 154, 155, 133, 173, 157, 158, 159, 160, 161, 246)
LEFT_EYE = (263, 249, 390, 373, 374, 380, 381, 382, 362, 398, 384, 385, 386, 387, 388, 466)
RIGHT_EYEBROW = (46, 53, 52, 65, 55, 70, 63, 105, 66, 107)
LEFT_EYEBROW = (276, 283, 282, 295, 285, 300, 293, 334, 296, 336)
LIPS_OUTER = (61, 146, 91, 181, 84, 17, 314, 405, 321, 375, 291, 409, 270, 269, 267, 0, 37, 39, 40, 185)
LIPS_INNER = (78, 95, 88, 178, 87, 14, 317, 402, 318, 324, 308, 415, 310, 311, 312, 13, 82, 81, 80, 191)

# Default reduced face: eyes + lips + outer circumference, topped up with
# the eyebrow contours so the total is exactly 128 landmarks.
FACE_SUBSET_128: Tuple[int, ...] = (
    FACE_OVAL + RIGHT_EYE + LEFT_EYE + RIGHT_EYEBROW + LEFT_EYEBROW + LIPS_OUTER + LIPS_INNER
)

# Mirror correspondences across the nose line for the contour landmarks.
# Oval pairs match symmetric ring positions (10 and 152 are midline);
# eye/brow lists are stored in mirrored traversal order, so they pair
# element-wise; lip pairs mirror around the midline points 0/17/13/14.
_FACE_OVAL_PAIRS = tuple(
    (FACE_OVAL[i], FACE_OVAL[(len(FACE_OVAL) - i) % len(FACE_OVAL)])
    for i in range(1, len(FACE_OVAL) // 2)
)
_LIPS_PAIRS = (
    (61, 291), (146, 375), (91, 321), (181, 405), (84, 314),
    (185, 409), (40, 270), (39, 269), (37, 267),
    (78, 308), (95, 324), (88, 318), (178, 402), (87, 317),
    (191, 415), (80, 310), (81, 311), (82, 312),
)
FACE_FLIP_PAIRS: Tuple[Tuple[int, int], ...] = (
    _FACE_OVAL_PAIRS
    + tuple(zip(RIGHT_EYE, LEFT_EYE))
    + tuple(zip(RIGHT_EYEBROW, LEFT_EYEBROW))
    + _LIPS_PAIRS
)


class LayoutError(ValueError):
    """Raised for inconsistent keypoint layouts."""


@dataclass(frozen=True)
class KeypointLayout:
    """Ordered keypoint groups plus the horizontal-mirror pair table.

    ``flip_pairs`` indices refer to the concatenated group index space;
    ``face_subset`` (when present) lists which of the 468 full face-mesh
    landmarks each face row corresponds to, in row order.
    """

    groups: Tuple[Tuple[str, int], ...]
    flip_pairs: Tuple[Tuple[int, int], ...] = ()
    face_subset: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple((str(n), int(c)) for n, c in self.groups))
        object.__setattr__(self, "flip_pairs", tuple((int(a), int(b)) for a, b in self.flip_pairs))
        if self.face_subset is not None:
            object.__setattr__(self, "face_subset", tuple(int(i) for i in self.face_subset))
        k = self.total()
        if k <= 0:
            raise LayoutError("layout must contain at least one keypoint")
        if any(c < 0 for _, c in self.groups):
            raise LayoutError("group counts must be non-negative")
        seen = set()
        for a, b in self.flip_pairs:
            if not (0 <= a < k and 0 <= b < k):
                raise LayoutError(f"flip pair ({a}, {b}) out of range for K={k}")
            if a == b or a in seen or b in seen:
                raise LayoutError(f"flip pair ({a}, {b}) reuses an index")
            seen.add(a)
            seen.add(b)
        if self.face_subset is not None:
            if len(set(self.face_subset)) != len(self.face_subset):
                raise LayoutError("face_subset contains duplicate indices")
            if any(not 0 <= i < FACE_FULL_COUNT for i in self.face_subset):
                raise LayoutError("face_subset indices must lie in [0, 468)")

    def total(self) -> int:
        return sum(c for _, c in self.groups)

    def group_offset(self, name: str) -> int:
        off = 0
        for n, c in self.groups:
            if n == name:
                return off
            off += c
        raise LayoutError(f"no group named {name!r}")

    def group_count(self, name: str) -> int:
        for n, c in self.groups:
            if n == name:
                return c
        raise LayoutError(f"no group named {name!r}")

    def flip_permutation(self):
        """Index permutation applied after mirroring x; an involution."""
        import numpy as np

        perm = np.arange(self.total())
        for a, b in self.flip_pairs:
            perm[a], perm[b] = perm[b], perm[a]
        return perm


def total_keypoints(layout: KeypointLayout) -> int:
    """Total keypoint count K of a layout."""
    return layout.total()


def _remap_pairs(pairs, index_of, offset):
    out = []
    for a, b in pairs:
        ia = index_of.get(a)
        ib = index_of.get(b)
        if ia is not None and ib is not None:
            out.append((offset + ia, offset + ib))
    return tuple(out)


def build_layout(face_count: int, face_subset: Optional[Sequence[int]] = None) -> KeypointLayout:
    """Standard layout: pose 33 + left hand 21 + right hand 21 + face.

    ``face_count`` 468 keeps the full mesh, 128 keeps the default
    eyes/lips/oval/brow subset; any other count requires an explicit
    ``face_subset`` of matching length (0 with an empty subset drops the
    face entirely).
    """
    if face_subset is None:
        if face_count == FACE_FULL_COUNT:
            face_subset = tuple(range(FACE_FULL_COUNT))
        elif face_count == 128:
            face_subset = FACE_SUBSET_128
        else:
            raise LayoutError(
                f"face_count {face_count} needs an explicit face_subset (supported without one: 468, 128)"
            )
    face_subset = tuple(int(i) for i in face_subset)
    if len(face_subset) != face_count:
        raise LayoutError(f"face_subset length {len(face_subset)} != face_count {face_count}")

    groups = [("pose", POSE_COUNT), ("left_hand", HAND_COUNT), ("right_hand", HAND_COUNT)]
    if face_count > 0:
        groups.append(("face", face_count))

    lh_off = POSE_COUNT
    rh_off = POSE_COUNT + HAND_COUNT
    face_off = POSE_COUNT + 2 * HAND_COUNT
    pairs = list(POSE_FLIP_PAIRS)
    # A mirrored left hand lands where the right hand was, so the two
    # hand blocks swap wholesale, landmark by landmark.
    pairs += [(lh_off + i, rh_off + i) for i in range(HAND_COUNT)]
    index_of = {mesh_idx: row for row, mesh_idx in enumerate(face_subset)}
    pairs += _remap_pairs(FACE_FLIP_PAIRS, index_of, face_off)

    return KeypointLayout(
        groups=tuple(groups),
        flip_pairs=tuple(pairs),
        face_subset=face_subset if face_count > 0 else None,
    )


LAYOUT_PRESETS = {
    "full": lambda: build_layout(468),
    "reduced": lambda: build_layout(128),
    "upper": lambda: build_layout(0, ()),
}


def layout_from_preset(name: str) -> KeypointLayout:
    try:
        return LAYOUT_PRESETS[name]()
    except KeyError:
        raise LayoutError(f"unknown layout preset {name!r} (choose from {sorted(LAYOUT_PRESETS)})")


def preset_for_k(k: int) -> Optional[str]:
    """Preset name whose layout has K keypoints, if any."""
    for name in LAYOUT_PRESETS:
        if LAYOUT_PRESETS[name]().total() == k:
            return name
    return None
