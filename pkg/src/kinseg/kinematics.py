"""Orientation conversion, radial 3D embedding and series handling.

Measured joint orientations arrive as unit quaternions or axis-angle
tuples. They are embedded into a constrained 3D space: the rotation axis
gives the direction and the rotation angle is mapped linearly onto the
radius, inner radius 1 at angle 0 and outer radius 2 at angle pi, so
every embedded point lives in the thick spherical shell 1 <= |o| <= 2.
Externally computed embeddings can be ingested as-is (unconstrained).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

ZERO_ANGLE_EPS = 1e-8
DEFAULT_AXIS = (0.0, 0.0, 1.0)

INNER_RADIUS = 1.0
OUTER_RADIUS = 2.0

SHELL_TOL = 1e-9

# Recognised CSV layouts, keyed by exact header.
_CSV_LAYOUTS = {
    ("t", "qw", "qx", "qy", "qz"): "quaternion",
    ("t", "x1", "x2", "x3", "x4"): "axisangle",
    ("t", "o1", "o2", "o3"): "embedding",
}


def _canonicalize(q: np.ndarray) -> np.ndarray:
    """Flip sign so w >= 0; at w == 0 the first nonzero vector part is positive."""
    w = q[..., 0]
    sign = np.sign(w)
    if np.any(sign == 0.0):
        vec_sign = np.sign(q[..., 1:])
        first = np.argmax(vec_sign != 0.0, axis=-1)
        fallback = np.take_along_axis(vec_sign, first[..., None], axis=-1)[..., 0]
        sign = np.where(sign == 0.0, np.where(fallback == 0.0, 1.0, fallback), sign)
    return q * sign[..., None]


def quaternion_to_axis_angle(q, fallback_axis=DEFAULT_AXIS):
    """Convert one quaternion (w, i, j, k) to a unit axis and angle in [0, pi].

    The quaternion is normalised and sign-canonicalised first (q and -q are
    the same rotation). At angles below ZERO_ANGLE_EPS the axis is
    undefined; ``fallback_axis`` is returned instead.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError("quaternion must have four components (w, i, j, k)")
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise ValueError("cannot convert a zero quaternion")
    q = _canonicalize(q / norm)
    angle = 2.0 * np.arccos(np.clip(q[0], -1.0, 1.0))
    if angle <= ZERO_ANGLE_EPS:
        return np.asarray(fallback_axis, dtype=float), float(angle)
    axis = q[1:] / np.linalg.norm(q[1:])
    return axis, float(angle)


def quaternion_series_to_axis_angle(quats):
    """Convert a quaternion timeseries, carrying the axis over degenerate samples.

    At near-zero rotation angles the axis direction is meaningless but the
    embedding still needs one; the previous sample's axis is carried
    forward to keep the embedded trajectory continuous (DEFAULT_AXIS for a
    degenerate first sample).

    Returns:
        (axes, angles) with shapes (N, 3) and (N,).
    """
    q = np.atleast_2d(np.asarray(quats, dtype=float))
    if q.shape[-1] != 4:
        raise ValueError("quaternion series must have four columns")
    norms = np.linalg.norm(q, axis=-1)
    if np.any(norms < 1e-12):
        raise ValueError("quaternion series contains a zero quaternion")
    q = _canonicalize(q / norms[:, None])
    angles = 2.0 * np.arccos(np.clip(q[:, 0], -1.0, 1.0))
    vec = q[:, 1:]
    vec_norms = np.linalg.norm(vec, axis=-1)
    degenerate = angles <= ZERO_ANGLE_EPS
    safe = np.where(vec_norms > 0.0, vec_norms, 1.0)
    axes = vec / safe[:, None]
    # iterating in order propagates the carried axis through degenerate runs
    for i in np.flatnonzero(degenerate):
        axes[i] = np.asarray(DEFAULT_AXIS, dtype=float) if i == 0 else axes[i - 1]
    return axes, angles


def axis_angle_to_quaternion(axis, angle) -> np.ndarray:
    """Inverse conversion, (w, i, j, k) with w = cos(angle / 2)."""
    axis = np.asarray(axis, dtype=float)
    half = 0.5 * float(angle)
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def adr_embed(axes, angles) -> np.ndarray:
    """Embed axis-angle orientations into the radial shell.

    The radius interpolates linearly from the inner radius (angle 0) to the
    outer radius (angle pi): r = 1 + angle / pi, and the embedded point is
    r times the rotation axis.
    """
    axes = np.asarray(axes, dtype=float)
    angles = np.asarray(angles, dtype=float)
    norms = np.linalg.norm(axes, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("rotation axes must be unit vectors")
    if np.any((angles < -1e-12) | (angles > np.pi + 1e-12)):
        raise ValueError("rotation angles must lie in [0, pi]")
    radius = INNER_RADIUS + np.clip(angles, 0.0, np.pi) / np.pi
    return radius[..., None] * axes


def adr_invert(points):
    """Recover (axes, angles) from embedded points; inverse of adr_embed."""
    pts = np.asarray(points, dtype=float)
    norms = np.linalg.norm(pts, axis=-1)
    if np.any((norms < INNER_RADIUS - SHELL_TOL) | (norms > OUTER_RADIUS + SHELL_TOL)):
        raise ValueError("embedded point norm outside the [1, 2] shell")
    radius = np.clip(norms, INNER_RADIUS, OUTER_RADIUS)
    angles = (radius - INNER_RADIUS) * np.pi
    axes = pts / norms[..., None]
    return axes, angles


@dataclass
class EmbeddingSeries:
    """An ordered 3D embedding timeseries with timestamps and provenance.

    ``source`` records how the embedding was produced ("adr" or
    "external"). Unconstrained series (external embeddings) are exempt
    from the shell-norm invariant.
    """

    values: np.ndarray
    timestamps: np.ndarray
    source: str = "adr"
    unconstrained: bool = False
    sample_rate_hz: float | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.timestamps = np.asarray(self.timestamps, dtype=float).ravel()
        if self.values.shape[0] != self.timestamps.shape[0]:
            raise ValueError("values and timestamps must have equal length")
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")
        if not self.unconstrained and len(self.values):
            norms = np.linalg.norm(self.values, axis=-1)
            if np.any((norms < INNER_RADIUS - SHELL_TOL) | (norms > OUTER_RADIUS + SHELL_TOL)):
                raise ValueError("constrained embedding outside the [1, 2] shell")

    def __len__(self) -> int:
        return len(self.values)

    def decimated(self, factor: int) -> "EmbeddingSeries":
        return decimate(self, factor)


def decimate(series, factor: int):
    """Keep every factor-th sample starting at index 0.

    Plain sample picking with no anti-alias filter; output length is
    ceil(N / factor). Accepts an EmbeddingSeries (timestamps are decimated
    alongside) or a bare array.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError(f"decimation factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    if isinstance(series, EmbeddingSeries):
        rate = series.sample_rate_hz / factor if series.sample_rate_hz else None
        return replace(
            series,
            values=series.values[::factor],
            timestamps=series.timestamps[::factor],
            sample_rate_hz=rate,
        )
    return np.asarray(series)[::factor]


def read_orientation_csv(path):
    """Read a timeseries CSV, dispatching on the header.

    Recognised layouts: ``t,qw,qx,qy,qz`` (quaternions),
    ``t,x1,x2,x3,x4`` (axis-angle) and ``t,o1,o2,o3`` (embeddings).

    Returns:
        (kind, timestamps, values) where kind is one of "quaternion",
        "axisangle", "embedding".
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        kind = _CSV_LAYOUTS.get(header)
        if kind is None:
            raise ValueError(f"{path}: unrecognised header {','.join(header)!r}")
        try:
            data = np.array([[float(c) for c in row] for row in reader if row])
        except ValueError as exc:
            raise ValueError(f"{path}: malformed numeric row ({exc})") from None
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: row width does not match header")
    return kind, data[:, 0], data[:, 1:]


def write_embedding_csv(path, series: EmbeddingSeries) -> int:
    """Write an embedding series as t,o1,o2,o3 rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "o1", "o2", "o3"])
        for t, row in zip(series.timestamps, series.values):
            writer.writerow([repr(float(t))] + [repr(float(c)) for c in row])
    return len(series)


def write_axis_angle_csv(path, timestamps, axes, angles) -> int:
    """Write an axis-angle series as t,x1,x2,x3,x4 rows."""
    axes = np.atleast_2d(np.asarray(axes, dtype=float))
    angles = np.asarray(angles, dtype=float).ravel()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x1", "x2", "x3", "x4"])
        for t, axis, angle in zip(timestamps, axes, angles):
            writer.writerow(
                [repr(float(t))]
                + [repr(float(c)) for c in axis]
                + [repr(float(angle))]
            )
    return len(angles)
