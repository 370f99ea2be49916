"""Periodic box geometry and minimal-image arithmetic.

The finite-volume arena for simulation and for the gridded kinetic solver is
a d-dimensional torus [0, L)^d with equal side lengths. All pair distances
are minimal-image distances, which are unambiguous as long as every
interaction radius is below L/2 (the constructors of the dynamic objects
enforce the stricter L > 4 * radius rule).
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError


@dataclass(frozen=True)
class Torus:
    """Periodic box [0, L)^d."""

    dim: int
    side: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GeometryError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if not self.side > 0:
            raise GeometryError(f"side length must be positive, got {self.side}")

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    def wrap(self, x):
        """Map points into [0, L)^d.

        np.mod can round tiny negative inputs to the modulus itself, so an
        exact fold of L back to 0 keeps the half-open invariant airtight.
        """
        out = np.mod(x, self.side)
        return np.where(out >= self.side, 0.0, out)

    def minimal_image(self, dx):
        """Fold coordinate differences into [-L/2, L/2)^d."""
        L = self.side
        return (np.asarray(dx) + 0.5 * L) % L - 0.5 * L

    def distance(self, x, y):
        """Minimal-image Euclidean distance between points (or arrays of points)."""
        d = self.minimal_image(np.asarray(x) - np.asarray(y))
        if d.ndim <= 1 and self.dim == 1:
            return np.abs(d)
        return np.sqrt(np.sum(d * d, axis=-1))

    def require_fits(self, radius: float, what: str = "interaction"):
        """Raise unless L > 4 * radius (the minimal-image safety margin)."""
        if not self.side > 4.0 * radius:
            raise GeometryError(
                f"minimal-image ambiguity: {what} radius {radius:g} requires "
                f"side > {4.0 * radius:g}, got {self.side:g}"
            )

    def to_json(self) -> dict:
        return {"dim": self.dim, "side": self.side}

    @classmethod
    def from_json(cls, obj: dict) -> "Torus":
        return cls(dim=int(obj["dim"]), side=float(obj["side"]))
