"""Box/orthant feasible sets with point and vector-field projection.

The vector field projection removes the outward component of a direction at
the boundary of a box: it is the one-sided directional derivative of the
point projection, which for axis-aligned boxes reduces to an element-wise
rule (pass the component through in the interior, drop it when it points
out of an active face).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FeasibleSet", "project_point", "project_vector_field", "SNAP_TOL"]

# Boundary snap tolerance: states are clamped onto the set by the integrator
# after every step, so active faces are detected by exact comparison after a
# snap of at most this size.
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class FeasibleSet:
    """Axis-aligned box ``{p : lower <= p <= upper}``; entries may be +-inf."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.ndim != 1 or up.ndim != 1 or lo.shape != up.shape:
            raise ValueError(
                f"bounds must be 1-d of equal length, got {lo.shape} and {up.shape}"
            )
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise ValueError("bounds must not contain NaN")
        if np.any(lo > up):
            j = int(np.argmax(lo > up))
            raise ValueError(f"empty set: lower[{j}]={lo[j]} > upper[{j}]={up[j]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        return cls(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))

    @classmethod
    def nonnegative(cls, dim: int) -> "FeasibleSet":
        """The orthant ``p >= 0`` in ``dim`` coordinates."""
        return cls(np.zeros(dim), np.full(dim, np.inf))

    @classmethod
    def free(cls, dim: int) -> "FeasibleSet":
        """Unconstrained coordinates, encoded as the (-inf, +inf) box."""
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @staticmethod
    def stack(*sets: "FeasibleSet") -> "FeasibleSet":
        """Concatenate sets block-wise into one box over the stacked state."""
        return FeasibleSet(
            np.concatenate([s.lower for s in sets]),
            np.concatenate([s.upper for s in sets]),
        )

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def violation(self, p) -> float:
        """Largest distance by which ``p`` leaves the box (0 inside)."""
        p = np.asarray(p, dtype=float)
        out = np.maximum(self.lower - p, p - self.upper)
        return float(max(np.max(out, initial=0.0), 0.0))


def project_point(fs: FeasibleSet, r) -> np.ndarray:
    """Euclidean projection onto the box: element-wise clamp of ``r``."""
    r = np.asarray(r, dtype=float)
    if r.shape != fs.lower.shape:
        raise ValueError(f"dimension mismatch: point {r.shape}, set ({fs.dim},)")
    return np.clip(r, fs.lower, fs.upper)


def project_vector_field(fs: FeasibleSet, p, s) -> np.ndarray:
    """Project the direction ``s`` at the point ``p`` of the box.

    Per coordinate: keep ``s_j`` strictly inside, drop negative components on
    the lower face and positive components on the upper face. ``p`` must lie
    in the set up to :data:`SNAP_TOL`; it is snapped onto the set before the
    active faces are detected by exact comparison.
    """
    p = np.asarray(p, dtype=float)
    s = np.asarray(s, dtype=float)
    if p.shape != fs.lower.shape or s.shape != fs.lower.shape:
        raise ValueError(
            f"dimension mismatch: point {p.shape}, direction {s.shape}, set ({fs.dim},)"
        )
    viol = fs.violation(p)
    if viol > SNAP_TOL:
        raise ValueError(f"point outside the feasible set by {viol:.3e} (> {SNAP_TOL:.0e})")
    p = np.clip(p, fs.lower, fs.upper)
    out = np.where(p == fs.lower, np.maximum(s, 0.0), s)
    out = np.where(p == fs.upper, np.minimum(out, 0.0), out)
    return out
