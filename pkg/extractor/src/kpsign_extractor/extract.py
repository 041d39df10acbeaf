"""Video-to-KPSQ extraction with the single-signer selection rule."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import cv2
import numpy as np

from .estimators import Estimator, TOTAL_LANDMARKS, make_estimator
from .face_subset import FACE_SUBSET_128
from .kpsq import write_kpsq

POSE_AND_HANDS = 75
_FACE_OFFSET = POSE_AND_HANDS


class ExtractorError(RuntimeError):
    pass


@dataclass
class ExtractionReport:
    video: str
    output: str
    backend: str
    frames_total: int
    frames_with_person: int
    frames_without_person: int
    frames_multi_person: int
    nan_landmarks: int
    k: int
    fps: float
    width: int
    height: int

    def to_text(self) -> str:
        lines = [f"{key} = {getattr(self, key)}" for key in (
            "video", "output", "backend", "frames_total", "frames_with_person",
            "frames_without_person", "frames_multi_person", "nan_landmarks",
            "k", "fps", "width", "height",
        )]
        return "\n".join(lines) + "\n"


def _reduce_face(landmarks: np.ndarray) -> np.ndarray:
    """Keep pose+hands and the contract's 128 face-mesh landmarks."""
    face = landmarks[_FACE_OFFSET:][list(FACE_SUBSET_128)]
    return np.concatenate([landmarks[:_FACE_OFFSET], face], axis=0)


def extract(
    video_path: Union[str, Path],
    out_path: Union[str, Path],
    face: int = 468,
    backend: str = "auto",
    signer_id: int = 0,
    estimator: Optional[Estimator] = None,
    report_path: Optional[Union[str, Path]] = None,
) -> ExtractionReport:
    """Extract one person's keypoints per frame into a KPSQ file.

    When several people are detected, only the highest-confidence one is
    kept.  Frames with no detection become all-NaN rows so the output
    length always matches the clip; the report counts every such event.
    """
    video_path = Path(video_path)
    if not video_path.is_file():
        raise ExtractorError(f"video not found: {video_path}")
    if face not in (468, 128):
        raise ExtractorError(f"--face must be 468 or 128, got {face}")
    estimator = estimator if estimator is not None else make_estimator(backend)

    capture = cv2.VideoCapture(str(video_path))
    if not capture.isOpened():
        raise ExtractorError(f"cannot open video: {video_path}")
    fps = capture.get(cv2.CAP_PROP_FPS) or 25.0

    rows = []
    width = height = 0
    with_person = without_person = multi_person = 0
    while True:
        ok, frame = capture.read()
        if not ok:
            break
        height, width = frame.shape[:2]
        detections = estimator.detect(frame)
        if len(detections) > 1:
            multi_person += 1
        if detections:
            best = max(detections, key=lambda d: d.confidence)
            landmarks = best.landmarks
            with_person += 1
        else:
            landmarks = np.full((TOTAL_LANDMARKS, 2), np.nan)
            without_person += 1
        if face == 128:
            landmarks = _reduce_face(landmarks)
        rows.append(landmarks.astype(np.float32))
    capture.release()

    if not rows:
        raise ExtractorError(f"video has no readable frames: {video_path}")

    coords = np.stack(rows)
    write_kpsq(out_path, coords, fps=float(fps), width=width, height=height, signer_id=signer_id)

    report = ExtractionReport(
        video=str(video_path),
        output=str(out_path),
        backend=getattr(estimator, "name", type(estimator).__name__),
        frames_total=len(rows),
        frames_with_person=with_person,
        frames_without_person=without_person,
        frames_multi_person=multi_person,
        nan_landmarks=int(np.isnan(coords).sum()),
        k=coords.shape[1],
        fps=float(fps),
        width=width,
        height=height,
    )
    report_path = Path(report_path) if report_path else Path(str(out_path) + ".report.txt")
    report_path.write_text(report.to_text(), encoding="utf-8")
    return report
