"""Landmark estimator backends.

Every backend turns one BGR frame into a list of person candidates, each
with a full 543-landmark set (pose 33, left hand 21, right hand 21, face
468) in pixel coordinates, NaN where a landmark was not detected, plus a
detection confidence.  The extraction driver picks the single
highest-confidence candidate per frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Protocol

import cv2
import numpy as np

POSE_COUNT = 33
HAND_COUNT = 21
FACE_COUNT = 468
TOTAL_LANDMARKS = POSE_COUNT + 2 * HAND_COUNT + FACE_COUNT  # 543


class EstimatorError(RuntimeError):
    pass


@dataclass
class PersonDetection:
    landmarks: np.ndarray  # (543, 2) float64 pixels, NaN for missing
    confidence: float


class Estimator(Protocol):
    name: str

    def detect(self, frame_bgr: np.ndarray) -> List[PersonDetection]:
        ...


def _ring(center_x, center_y, radius_x, radius_y, count):
    phi = 2.0 * np.pi * np.arange(count) / count
    return np.stack([center_x + radius_x * np.cos(phi), center_y + radius_y * np.sin(phi)], axis=1)


def landmarks_from_box(x0: float, y0: float, w: float, h: float) -> np.ndarray:
    """Deterministic body-shaped landmark arrangement inside a person box:
    face ellipse in the head area, pose spread over the torso, one hand
    cluster per side."""
    out = np.empty((TOTAL_LANDMARKS, 2))
    out[:POSE_COUNT] = _ring(x0 + 0.5 * w, y0 + 0.5 * h, 0.30 * w, 0.28 * h, POSE_COUNT)
    lh = POSE_COUNT
    rh = POSE_COUNT + HAND_COUNT
    face = POSE_COUNT + 2 * HAND_COUNT
    out[lh:lh + HAND_COUNT] = _ring(x0 + 0.18 * w, y0 + 0.68 * h, 0.07 * w, 0.05 * h, HAND_COUNT)
    out[rh:rh + HAND_COUNT] = _ring(x0 + 0.82 * w, y0 + 0.68 * h, 0.07 * w, 0.05 * h, HAND_COUNT)
    out[face:] = _ring(x0 + 0.5 * w, y0 + 0.16 * h, 0.16 * w, 0.12 * h, FACE_COUNT)
    return out


class MarkerEstimator:
    """Blob detector for synthetic test footage.

    People are bright connected regions on a dark background; the
    confidence is the region's area-weighted brightness.  Landmarks are
    synthesized from the region's bounding box, which is all the
    single-signer selection logic needs to be exercised.
    """

    name = "marker"

    def __init__(self, threshold: int = 60, min_area: int = 400):
        self.threshold = threshold
        self.min_area = min_area

    def detect(self, frame_bgr: np.ndarray) -> List[PersonDetection]:
        gray = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2GRAY)
        _, binary = cv2.threshold(gray, self.threshold, 255, cv2.THRESH_BINARY)
        count, labels, stats, _ = cv2.connectedComponentsWithStats(binary, connectivity=8)
        detections = []
        frame_weight = float(gray.shape[0] * gray.shape[1]) * 255.0
        for i in range(1, count):
            x, y, w, h, area = stats[i]
            if area < self.min_area:
                continue
            brightness = float(gray[labels == i].mean())
            confidence = min(1.0, (area * brightness) / frame_weight * 10.0)
            detections.append(
                PersonDetection(landmarks=landmarks_from_box(x, y, w, h), confidence=confidence)
            )
        return detections


class MediapipeHolisticEstimator:
    """Holistic landmark backend (pose + hands + face mesh).

    The library tracks a single person internally, so at most one
    candidate is returned; its confidence is the mean pose-landmark
    visibility.  Requires the optional mediapipe dependency.
    """

    name = "mediapipe"

    def __init__(self):
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise EstimatorError(
                "mediapipe is not installed; install kpsign-extractor[mediapipe] "
                "or use the marker backend"
            ) from exc
        self._holistic = mp.solutions.holistic.Holistic(
            static_image_mode=False, model_complexity=1, refine_face_landmarks=False
        )

    def detect(self, frame_bgr: np.ndarray) -> List[PersonDetection]:
        height, width = frame_bgr.shape[:2]
        results = self._holistic.process(cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB))
        landmarks = np.full((TOTAL_LANDMARKS, 2), np.nan)

        def fill(offset, count, lm_list):
            if lm_list is None:
                return
            for i, lm in enumerate(lm_list.landmark[:count]):
                landmarks[offset + i] = (lm.x * width, lm.y * height)

        fill(0, POSE_COUNT, results.pose_landmarks)
        fill(POSE_COUNT, HAND_COUNT, results.left_hand_landmarks)
        fill(POSE_COUNT + HAND_COUNT, HAND_COUNT, results.right_hand_landmarks)
        fill(POSE_COUNT + 2 * HAND_COUNT, FACE_COUNT, results.face_landmarks)

        if results.pose_landmarks is None:
            return []
        visibility = [lm.visibility for lm in results.pose_landmarks.landmark]
        return [PersonDetection(landmarks=landmarks, confidence=float(np.mean(visibility)))]


def make_estimator(backend: str = "auto") -> Estimator:
    if backend == "marker":
        return MarkerEstimator()
    if backend == "mediapipe":
        return MediapipeHolisticEstimator()
    if backend == "auto":
        try:
            return MediapipeHolisticEstimator()
        except EstimatorError:
            return MarkerEstimator()
    raise EstimatorError(f"unknown backend {backend!r} (choose auto, mediapipe, or marker)")
