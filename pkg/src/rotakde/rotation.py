"""Plane rotations, the overlap coefficients p1/p2, the pseudo-metric rho,
and separated rotation nets with their capacity.

rho(D, Q) = min(|p1|, |p2|) depends only on the angle difference, is
pi/2-periodic in it, and satisfies a relaxed triangle inequality with
multiplicative constant 2*sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi
PSEUDO_INFRAMETRIC_CONST = 2.0 * math.sqrt(2.0)
ANGLE_EQ_TOL = 1e-12


@dataclass(frozen=True)
class Rotation:
    """A 2x2 rotation ((q1, -q2), (q2, q1)); columns are q and q_perp."""

    theta: float
    q1: float
    q2: float

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.array([[self.q1, -self.q2], [self.q2, self.q1]])
        m.flags.writeable = False
        return m

    @cached_property
    def d(self) -> np.ndarray:
        v = np.array([self.q1, self.q2])
        v.flags.writeable = False
        return v

    @cached_property
    def d_perp(self) -> np.ndarray:
        v = np.array([-self.q2, self.q1])
        v.flags.writeable = False
        return v


def canonical_angle(theta: float) -> float:
    """Map to [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:  # fmod can land exactly on 2*pi after the shift
        t -= TWO_PI
    return t


def rotation_from_angle(theta: float) -> Rotation:
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta!r}")
    t = canonical_angle(float(theta))
    return Rotation(theta=t, q1=math.cos(t), q2=math.sin(t))


def angles_equal(a: Rotation, b: Rotation, tol: float = ANGLE_EQ_TOL) -> bool:
    """Exact-identity test used for the D = Q estimator branch."""
    diff = abs(a.theta - b.theta)
    return min(diff, TWO_PI - diff) <= tol


def overlap_coeffs(d_rot: Rotation, q_rot: Rotation) -> tuple[float, float]:
    """(p1, p2) with p1 = q^T d_perp and p2 = q^T d.

    Evaluated through the angle difference so that p1^2 + p2^2 = 1 holds to
    machine precision: p1 = sin(theta_Q - theta_D), p2 = cos(theta_Q - theta_D).
    """
    diff = q_rot.theta - d_rot.theta
    return math.sin(diff), math.cos(diff)


def rho(a: Rotation, b: Rotation) -> float:
    p1, p2 = overlap_coeffs(a, b)
    return min(abs(p1), abs(p2))


def pseudo_inframetric_check(points) -> bool:
    """True iff rho(Q1,Q3) <= 2*sqrt(2)*[rho(Q1,Q2) + rho(Q2,Q3)] for every
    ordered triple of the given rotations."""
    points = list(points)
    if len(points) < 3:
        raise ValueError("need at least 3 rotations")
    thetas = np.array([p.theta for p in points])
    diff = thetas[:, None] - thetas[None, :]
    r = np.minimum(np.abs(np.sin(diff)), np.abs(np.cos(diff)))
    lhs = r[:, None, :]                      # rho(Q1, Q3), middle axis free
    rhs = r[:, :, None] + r.T[None, :, :]    # rho(Q1, Q2) + rho(Q2, Q3)
    return bool(np.all(lhs <= PSEUDO_INFRAMETRIC_CONST * rhs + 1e-15))


@dataclass(frozen=True)
class RotationNet:
    """A finite set of rotations pairwise separated by at least delta in rho.

    capacity is ln(cardinality) -- the structural-adaptation price factor.
    Member order is deterministic (ascending angle for built nets); argmin
    tie-breaking downstream relies on it.
    """

    delta: float
    members: tuple[Rotation, ...]
    capacity: float

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @classmethod
    def from_members(cls, delta: float, members) -> "RotationNet":
        members = tuple(members)
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
        if not members:
            raise ValueError("a rotation net needs at least one member")
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                r = rho(members[i], members[j])
                if r < delta:
                    raise ValueError(
                        f"members {i} and {j} violate separation: rho={r} < delta={delta}"
                    )
        return cls(delta=delta, members=members, capacity=math.log(len(members)))

    def min_separation(self) -> float:
        best = math.inf
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                best = min(best, rho(self.members[i], self.members[j]))
        return best


def build_net(delta: float) -> RotationNet:
    """Maximal uniform-grid net: k points spaced pi/(2k) on [0, pi/2),
    k = max(1, floor(pi / (2 asin(delta)))).

    rho is pi/2-periodic in the angle difference, so the grid lives on
    [0, pi/2); for spacing <= pi/4 the binding pairs are the adjacent ones
    and the wrap-around pair, both at separation sin(pi/(2k)).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if delta >= math.sin(math.pi / 4.0):
        k = 1  # no two distinct rotations are this far apart in rho
    else:
        k = max(1, math.floor(math.pi / (2.0 * math.asin(delta))))
    spacing = math.pi / (2.0 * k)
    members = tuple(rotation_from_angle(i * spacing) for i in range(k))
    return RotationNet(delta=delta, members=members, capacity=math.log(k))
