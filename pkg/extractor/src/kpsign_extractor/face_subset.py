"""The reduced 128-landmark face subset of the 468-point face mesh.

Part of the data contract for K=203 files: the recognition pipeline's
``reduced`` layout lists face rows in exactly this order (face oval,
right eye, left eye, right eyebrow, left eyebrow, outer lips, inner
lips).
"""

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

FACE_SUBSET_128 = (
    FACE_OVAL + RIGHT_EYE + LEFT_EYE + RIGHT_EYEBROW + LEFT_EYEBROW + LIPS_OUTER + LIPS_INNER
)

assert len(FACE_SUBSET_128) == 128
