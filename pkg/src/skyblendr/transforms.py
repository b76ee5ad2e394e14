"""2-D similarity transforms (translation + rotation + uniform scale).

The 4-DoF motion model used throughout: a 3x3 homogeneous matrix whose upper
2x2 block is ``s * [[cos t, -sin t], [sin t, cos t]]`` with ``s > 0``.
Matrices that deviate from this structure by more than ``STRUCTURE_ATOL`` are
rejected; accepted ones are snapped to the exact form so that composing many
transforms never drifts out of the family.
"""

from dataclasses import dataclass, field

import numpy as np

STRUCTURE_ATOL = 1e-9


@dataclass(frozen=True)
class SimilarityTransform:
    """Immutable similarity transform backed by a 3x3 float64 matrix."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"similarity matrix must be 3x3, got {m.shape}")
        if (abs(m[2, 0]) > STRUCTURE_ATOL or abs(m[2, 1]) > STRUCTURE_ATOL
                or abs(m[2, 2] - 1.0) > STRUCTURE_ATOL):
            raise ValueError(f"last row must be [0, 0, 1], got {m[2]}")
        if abs(m[0, 0] - m[1, 1]) > STRUCTURE_ATOL or abs(m[0, 1] + m[1, 0]) > STRUCTURE_ATOL:
            raise ValueError(
                "upper 2x2 block is not a scaled rotation: "
                f"[[{m[0, 0]}, {m[0, 1]}], [{m[1, 0]}, {m[1, 1]}]]"
            )
        a = 0.5 * (m[0, 0] + m[1, 1])
        b = 0.5 * (m[1, 0] - m[0, 1])
        if np.hypot(a, b) <= STRUCTURE_ATOL:
            raise ValueError("similarity scale must be positive (got ~0)")
        snapped = np.array(
            [[a, -b, m[0, 2]], [b, a, m[1, 2]], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )
        snapped.flags.writeable = False
        object.__setattr__(self, "matrix", snapped)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def from_params(cls, scale, rotation, tx, ty):
        """Build from scale, rotation angle (radians), and translation."""
        if scale <= 0.0:
            raise ValueError(f"scale must be positive, got {scale}")
        a = scale * np.cos(rotation)
        b = scale * np.sin(rotation)
        return cls(np.array([[a, -b, tx], [b, a, ty], [0.0, 0.0, 1.0]]))

    @classmethod
    def translation_by(cls, tx, ty):
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    @property
    def scale(self):
        return float(np.hypot(self.matrix[0, 0], self.matrix[1, 0]))

    @property
    def rotation(self):
        return float(np.arctan2(self.matrix[1, 0], self.matrix[0, 0]))

    @property
    def translation(self):
        return float(self.matrix[0, 2]), float(self.matrix[1, 2])

    def __matmul__(self, other):
        return SimilarityTransform(self.matrix @ other.matrix)

    def inverse(self):
        """Closed-form inverse, staying exactly in the similarity family."""
        a = self.matrix[0, 0]
        b = self.matrix[1, 0]
        s2 = a * a + b * b
        ia = a / s2
        ib = -b / s2
        tx = self.matrix[0, 2]
        ty = self.matrix[1, 2]
        return SimilarityTransform(np.array([
            [ia, -ib, -(ia * tx - ib * ty)],
            [ib, ia, -(ib * tx + ia * ty)],
            [0.0, 0.0, 1.0],
        ]))

    def apply(self, points):
        """Map an (N, 2) array of points through the transform."""
        pts = np.asarray(points, dtype=np.float64)
        a = self.matrix[0, 0]
        b = self.matrix[1, 0]
        x = a * pts[..., 0] - b * pts[..., 1] + self.matrix[0, 2]
        y = b * pts[..., 0] + a * pts[..., 1] + self.matrix[1, 2]
        return np.stack([x, y], axis=-1)
