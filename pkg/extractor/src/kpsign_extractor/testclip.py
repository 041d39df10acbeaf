"""Synthetic two-person test clip.

Renders a bright, large "signer" on the left half and a dimmer, smaller
bystander on the right, both moving; two frames in the middle are empty
so extraction has to emit all-NaN rows.  Usable as a module:
``python -m kpsign_extractor.testclip out.avi``.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Union

import cv2
import numpy as np

WIDTH = 352
HEIGHT = 288
FRAMES = 48
FPS = 25.0
EMPTY_FRAMES = (20, 21)

SIGNER_BOX_WIDTH = 110
SIGNER_BOX_HEIGHT = 200
BYSTANDER_BOX_WIDTH = 60
BYSTANDER_BOX_HEIGHT = 110


def _draw_person(frame, x0, y0, w, h, brightness):
    """One connected bright region: head, torso, and arms to both hands."""
    color = (brightness, brightness, brightness)
    cx = x0 + w // 2
    shoulder = (cx, y0 + h // 2)
    cv2.circle(frame, (cx, y0 + h // 6), h // 7, color, -1)
    cv2.line(frame, (cx, y0 + h // 6), shoulder, color, max(2, w // 8))
    cv2.rectangle(frame, (x0 + w // 4, y0 + h // 3), (x0 + 3 * w // 4, y0 + h), color, -1)
    for hand_x in (x0 + w // 8, x0 + 7 * w // 8):
        hand = (hand_x, y0 + 2 * h // 3)
        cv2.line(frame, shoulder, hand, color, max(2, w // 10))
        cv2.circle(frame, hand, w // 9, color, -1)


def write_two_person_clip(path: Union[str, Path], frames: int = FRAMES) -> None:
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"MJPG"), FPS, (WIDTH, HEIGHT)
    )
    if not writer.isOpened():
        raise RuntimeError(f"cannot open video writer for {path}")
    for t in range(frames):
        frame = np.zeros((HEIGHT, WIDTH, 3), np.uint8)
        if t not in EMPTY_FRAMES:
            sway = int(10 * np.sin(2 * np.pi * t / frames))
            _draw_person(
                frame, 30 + sway, 40, SIGNER_BOX_WIDTH, SIGNER_BOX_HEIGHT, brightness=230
            )
            bob = int(6 * np.cos(2 * np.pi * t / frames))
            _draw_person(
                frame, 260, 120 + bob, BYSTANDER_BOX_WIDTH, BYSTANDER_BOX_HEIGHT, brightness=110
            )
        writer.write(frame)
    writer.release()


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "two_person.avi"
    write_two_person_clip(out)
    print(f"wrote {out}")
