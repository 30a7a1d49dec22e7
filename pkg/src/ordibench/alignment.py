"""2-D similarity alignment: crop boxes, eye-levelling rotation, and a
closed-form least-squares fit of landmarks onto a template.

A similarity transform is x -> s R(theta) x + t with positive scale, so
shapes are preserved: angles are unchanged and all distances scale by s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimilarityTransform",
    "LandmarkSet",
    "LANDMARK_ORDER",
    "DEFAULT_TEMPLATE_256",
    "crop_transform",
    "rotation_transform",
    "similarity_align",
    "alignment_residual",
]


@dataclass(frozen=True)
class SimilarityTransform:
    """Rotation by `rotation` radians, scaling by `scale`, then translation."""

    scale: float
    rotation: float
    tx: float
    ty: float

    def __post_init__(self) -> None:
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")
        for v in (self.rotation, self.tx, self.ty):
            if not np.isfinite(v):
                raise ValueError("transform parameters must be finite")

    @property
    def matrix(self) -> np.ndarray:
        """2x3 matrix A such that applying the transform is A @ [x, y, 1]."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([
            [self.scale * c, -self.scale * s, self.tx],
            [self.scale * s, self.scale * c, self.ty],
        ])

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (2,) or (n, 2)")
        a = self.matrix
        out = pts @ a[:, :2].T + a[:, 2]
        return out[0] if single else out

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.rotation), math.sin(-self.rotation)
        tx = -inv_scale * (c * self.tx - s * self.ty)
        ty = -inv_scale * (s * self.tx + c * self.ty)
        return SimilarityTransform(scale=inv_scale, rotation=-self.rotation, tx=tx, ty=ty)

    def after(self, first: "SimilarityTransform") -> "SimilarityTransform":
        """Composition: (self.after(first))(x) == self(first(x))."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        tx = self.scale * (c * first.tx - s * first.ty) + self.tx
        ty = self.scale * (s * first.tx + c * first.ty) + self.ty
        return SimilarityTransform(
            scale=self.scale * first.scale,
            rotation=self.rotation + first.rotation,
            tx=tx,
            ty=ty,
        )

    def to_dict(self) -> dict:
        return {"scale": self.scale, "rotation": self.rotation, "tx": self.tx, "ty": self.ty}


LANDMARK_ORDER = ("left_eye", "right_eye", "nose", "mouth_left", "mouth_right")

# Frontal five-point layout on a 256 x 256 canvas, eyes level, used as the
# default alignment target.
_TEMPLATE_POINTS_256 = np.array([
    [87.53, 118.16],
    [168.07, 117.72],
    [128.06, 163.97],
    [94.97, 211.12],
    [161.67, 210.75],
])


@dataclass(frozen=True)
class LandmarkSet:
    """An ordered set of 2-D landmark points.

    Five-point sets follow LANDMARK_ORDER; a five-point set whose left eye
    sits to the right of its right eye triggers a warning since that usually
    means swapped columns upstream.
    """

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("landmarks must have shape (n >= 2, 2)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmarks must be finite")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if len(pts) == 5 and pts[0, 0] >= pts[1, 0]:
            warnings.warn("left eye is not left of the right eye; check landmark order", stacklevel=2)

    def __len__(self) -> int:
        return len(self.points)


DEFAULT_TEMPLATE_256 = LandmarkSet(points=_TEMPLATE_POINTS_256)


def _check_bbox(bbox) -> tuple[float, float, float, float]:
    x, y, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        raise ValueError(f"bbox must have positive width and height, got {w} x {h}")
    return x, y, w, h


def crop_transform(bbox, out_size: int) -> SimilarityTransform:
    """Map a bounding box onto a square output canvas without rotation.

    The longer box side spans the canvas; the box centre maps to the canvas
    centre, so the shorter side is letterboxed symmetrically.
    """
    x, y, w, h = _check_bbox(bbox)
    if out_size <= 0:
        raise ValueError("out_size must be positive")
    scale = float(out_size) / max(w, h)
    cx, cy = x + w / 2.0, y + h / 2.0
    return SimilarityTransform(
        scale=scale,
        rotation=0.0,
        tx=out_size / 2.0 - scale * cx,
        ty=out_size / 2.0 - scale * cy,
    )


def rotation_transform(bbox, left_eye, right_eye, out_size: int) -> SimilarityTransform:
    """Crop as in crop_transform, additionally levelling the eye line.

    The rotation -atan2(dy, dx) of the eye vector is applied about the box
    centre before cropping, so transformed eyes share one y coordinate.
    """
    x, y, w, h = _check_bbox(bbox)
    le = np.asarray(left_eye, dtype=float)
    re = np.asarray(right_eye, dtype=float)
    if le.shape != (2,) or re.shape != (2,):
        raise ValueError("eye positions must be 2-d points")
    d = re - le
    if np.allclose(d, 0.0):
        raise ValueError("eye positions coincide; rotation is undefined")
    theta = -math.atan2(d[1], d[0])
    cx, cy = x + w / 2.0, y + h / 2.0
    c, s = math.cos(theta), math.sin(theta)
    # rotate about the box centre: x -> R (x - c) + c
    spin = SimilarityTransform(
        scale=1.0,
        rotation=theta,
        tx=cx - (c * cx - s * cy),
        ty=cy - (s * cx + c * cy),
    )
    return crop_transform(bbox, out_size).after(spin)


def _as_points(obj) -> np.ndarray:
    pts = np.asarray(getattr(obj, "points", obj), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least 2 points of shape (n, 2)")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


def similarity_align(landmarks, template) -> SimilarityTransform:
    """Least-squares similarity transform taking landmarks onto a template.

    Minimizes sum_i ||s R p_i + t - q_i||^2 over scale, rotation and
    translation in closed form: centre both point sets, take the SVD of
    their cross-covariance, and force a proper rotation (det +1) so a
    reflected solution is never returned.

    Raises ValueError when the source points all coincide (scale would be
    unconstrained) or the point counts differ.
    """
    src = _as_points(landmarks)
    dst = _as_points(template)
    if src.shape != dst.shape:
        raise ValueError(f"point counts differ: {src.shape[0]} vs {dst.shape[0]}")
    n = src.shape[0]
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cs = src - mu_s
    cd = dst - mu_d
    var_s = float((cs ** 2).sum()) / n
    if var_s <= 1e-24:
        raise ValueError("degenerate landmarks: all source points coincide")
    cov = cd.T @ cs / n
    u, svals, vt = np.linalg.svd(cov)
    d = 1.0 if np.linalg.det(u) * np.linalg.det(vt) >= 0 else -1.0
    rot = u @ np.diag([1.0, d]) @ vt
    scale = (svals[0] + d * svals[1]) / var_s
    if scale <= 0:
        raise ValueError("fitted scale is not positive; points are adversarially placed")
    t = mu_d - scale * (rot @ mu_s)
    theta = math.atan2(rot[1, 0], rot[0, 0])
    return SimilarityTransform(scale=float(scale), rotation=float(theta), tx=float(t[0]), ty=float(t[1]))


def alignment_residual(transform: SimilarityTransform, landmarks, template) -> float:
    """Sum of squared distances between transformed landmarks and the template."""
    src = _as_points(landmarks)
    dst = _as_points(template)
    if src.shape != dst.shape:
        raise ValueError("point counts differ")
    diff = transform.apply(src) - dst
    return float((diff ** 2).sum())
