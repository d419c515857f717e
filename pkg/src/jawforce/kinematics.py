"""Resolution of the two jaw-sensor forces into the robot base frame.

The kinematic chain is data: a list of segments, each a fixed homogeneous
transform optionally followed by a rotation about one of its local axes.
Segments before ``jaw6`` form the common prefix ending at the gripper frame
G, segments from ``jaw6`` up to ``jaw7`` the right-jaw branch (ending at the
right sensor frame R), and the remainder the left-jaw branch (ending at L).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import ForceVector

ORTHO_TOL = 1e-9
CHAIN_HEADER = "# jawforce-chain v1"

# Joint names a chain segment may bind to a joint variable.
JOINT_NAMES = ("joint1", "joint2", "joint3", "joint4", "joint5",
               "gripper", "jaw6", "jaw7", "mount_r", "mount_l")

DEFAULT_THETA_MIN_DEG = 8.4


class ChainMismatch(ValueError):
    pass


class ChainFormatError(ValueError):
    pass


def rotation_about(axis: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"axis must be x, y or z, got {axis!r}")


def is_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    return (r.shape == (3, 3)
            and np.max(np.abs(r.T @ r - np.eye(3))) <= tol
            and abs(np.linalg.det(r) - 1.0) <= tol)


class Transform:
    """Rigid homogeneous transform (rotation + translation in mm)."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, *, check: bool = True):
        m = np.array(matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"transform must be 4x4, got {m.shape}")
        if check:
            if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
                raise ValueError("bottom row of a transform must be (0, 0, 0, 1)")
            if not is_rotation(m[:3, :3]):
                raise ValueError("rotation block is not orthonormal with det +1")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def identity(cls) -> "Transform":
        return cls(np.eye(4), check=False)

    @classmethod
    def from_rt(cls, rotation, translation=(0.0, 0.0, 0.0), *, check: bool = True) -> "Transform":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m, check=check)

    @classmethod
    def rot(cls, axis: str, angle: float) -> "Transform":
        return cls.from_rt(rotation_about(axis, angle), check=False)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def __matmul__(self, other: "Transform") -> "Transform":
        return Transform(self.matrix @ other.matrix, check=False)

    def inverse(self) -> "Transform":
        r = self.rotation
        return Transform.from_rt(r.T, -r.T @ self.translation, check=False)

    def rotate(self, f: ForceVector) -> ForceVector:
        """Apply the rotation block only; forces are free vectors."""
        return ForceVector.from_array(self.rotation @ f.as_array())

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        return (np.array_equal(self.matrix[3], [0.0, 0.0, 0.0, 1.0])
                and is_rotation(self.rotation, tol))

    def __repr__(self) -> str:
        return f"Transform({self.matrix.tolist()!r})"


@dataclass(frozen=True)
class Segment:
    name: str
    fixed: Transform
    axis: Optional[str] = None

    def __post_init__(self) -> None:
        if self.axis is not None and self.axis not in ("x", "y", "z"):
            raise ValueError(f"segment {self.name}: axis must be x, y or z")

    def evaluate(self, q: float = 0.0) -> Transform:
        if self.axis is None:
            return self.fixed
        return self.fixed @ Transform.rot(self.axis, q)


class TransformChain:
    """Ordered segments; joint variables are bound by segment name."""

    def __init__(self, segments: Iterable[Segment]):
        self.segments = tuple(segments)
        names = [s.name for s in self.segments]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ChainMismatch(f"duplicate segment names: {sorted(dupes)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments)

    @property
    def joints(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments if s.axis is not None)

    def evaluate(self, values: Mapping[str, float] | None = None,
                 base: Transform | None = None) -> Transform:
        """Product of all segment transforms at the given joint values."""
        values = values or {}
        missing = [n for n in self.joints if n not in values]
        if missing:
            raise ChainMismatch(f"no joint value for {missing}")
        t = base or Transform.identity()
        for seg in self.segments:
            t = t @ seg.evaluate(values.get(seg.name, 0.0))
        return t

    def split(self) -> tuple["TransformChain", "TransformChain", "TransformChain"]:
        """(prefix to G, right branch G->R, left branch G->L)."""
        names = self.names
        if "jaw6" not in names or "jaw7" not in names:
            raise ChainMismatch("chain must contain segments named jaw6 and jaw7")
        i6, i7 = names.index("jaw6"), names.index("jaw7")
        if i7 < i6:
            raise ChainMismatch("jaw6 branch must precede jaw7 branch")
        segs = self.segments
        return (TransformChain(segs[:i6]), TransformChain(segs[i6:i7]),
                TransformChain(segs[i7:]))


# --- chain file ---------------------------------------------------------------

def parse_chain(text: str) -> TransformChain:
    """Parse a chain description.

    One segment per non-blank line, ``#`` starts a comment. Fields::

        name r11 r12 r13 r21 r22 r23 r31 r32 r33 tx ty tz [axis]

    The rotation is row-major, the translation in mm, the optional axis one
    of x, y, z. Segments with an axis must use a name from JOINT_NAMES.
    """
    segments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (13, 14):
            raise ChainFormatError(f"line {lineno}: expected 13 or 14 fields, got {len(fields)}")
        name = fields[0]
        try:
            nums = [float(x) for x in fields[1:13]]
        except ValueError:
            raise ChainFormatError(f"line {lineno}: non-numeric transform entry") from None
        axis = fields[13] if len(fields) == 14 else None
        if axis is not None and axis not in ("x", "y", "z"):
            raise ChainFormatError(f"line {lineno}: axis must be x, y or z, got {axis!r}")
        if axis is not None and name not in JOINT_NAMES:
            raise ChainMismatch(f"line {lineno}: joint {name!r} is not one of {JOINT_NAMES}")
        rot = np.array(nums[:9]).reshape(3, 3)
        if not is_rotation(rot):
            raise ChainFormatError(f"line {lineno}: fixed rotation of {name!r} is not orthonormal")
        segments.append(Segment(name, Transform.from_rt(rot, nums[9:12]), axis))
    chain = TransformChain(segments)
    chain.split()
    return chain


def format_chain(chain: TransformChain) -> str:
    lines = [CHAIN_HEADER]
    for seg in chain.segments:
        m = seg.fixed.matrix
        nums = list(m[:3, :3].ravel()) + list(m[:3, 3])
        fields = [seg.name] + [f"{x:.17g}" for x in nums]
        if seg.axis:
            fields.append(seg.axis)
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def read_chain(path: Union[str, Path]) -> TransformChain:
    return parse_chain(Path(path).read_text())


def default_chain() -> TransformChain:
    """Illustrative roll-pitch-yaw-jaw wrist shipped with the package."""
    text = resources.files("jawforce").joinpath("data/default_chain.txt").read_text()
    return parse_chain(text)


def identity_chain() -> TransformChain:
    eye = Transform.identity()
    return TransformChain([Segment("jaw6", eye), Segment("jaw7", eye)])


# --- jaw state and jaw-angle clamp ----------------------------------------------------------

@dataclass(frozen=True)
class JawState:
    """Joint angles of one posture (rad).

    theta_6 and theta_7 are the jaw joint angles measured from the gripper
    bisector, each positive when opening; theta_g is the bisector angle from
    the frame-5 x-axis. theta_r and theta_l are the fixed angles between each
    jaw and its sensor frame.
    """

    theta_1: float = 0.0
    theta_2: float = 0.0
    theta_3: float = 0.0
    theta_4: float = 0.0
    theta_5: float = 0.0
    theta_6: float = 0.0
    theta_7: float = 0.0
    theta_r: float = 0.0
    theta_l: float = 0.0
    theta_g: float = 0.0
    theta_min: float = math.radians(DEFAULT_THETA_MIN_DEG)

    def __post_init__(self) -> None:
        if not self.theta_min >= 0.0:
            raise ValueError("theta_min must be >= 0")

    @property
    def proximal(self) -> tuple[float, float, float, float, float]:
        return (self.theta_1, self.theta_2, self.theta_3, self.theta_4, self.theta_5)

    @property
    def jaw_angle(self) -> float:
        """Opening between the two sensor frames."""
        return (self.theta_6 - self.theta_r) + (self.theta_7 - self.theta_l)

    def joint_values(self) -> dict[str, float]:
        return {
            "joint1": self.theta_1, "joint2": self.theta_2, "joint3": self.theta_3,
            "joint4": self.theta_4, "joint5": self.theta_5, "gripper": self.theta_g,
            "jaw6": self.theta_6, "jaw7": self.theta_7,
            # sensor frames sit at theta_6 - theta_r / theta_7 - theta_l from the bisector
            "mount_r": -self.theta_r, "mount_l": -self.theta_l,
        }

    def with_jaw_angle(self, theta_jaw: float) -> "JawState":
        """Re-derive theta_6 = theta_7 so that the sensor opening is theta_jaw."""
        half = 0.5 * (theta_jaw + self.theta_r + self.theta_l)
        return replace(self, theta_6=half, theta_7=half)

    def corrected(self, theta_jaw_reported: float) -> "JawState":
        return self.with_jaw_angle(corrected_jaw_angle(theta_jaw_reported, self.theta_min))


def corrected_jaw_angle(theta_prime: float, theta_min: float) -> float:
    """Reported jaw angle if it exceeds theta_min, otherwise theta_min."""
    return theta_prime if theta_prime > theta_min else theta_min


@dataclass(frozen=True)
class JawForces:
    left: ForceVector
    right: ForceVector


def gripper_frame(chain: TransformChain, state: JawState) -> Transform:
    prefix, _, _ = chain.split()
    return prefix.evaluate(state.joint_values())


def gripper_poses(chain: TransformChain, state: JawState) -> tuple[Transform, Transform]:
    """Sensor poses relative to the gripper frame G: (G_T_R, G_T_L)."""
    _, right, left = chain.split()
    q = state.joint_values()
    return right.evaluate(q), left.evaluate(q)


def jaw_poses(chain: TransformChain, state: JawState) -> tuple[Transform, Transform]:
    """Sensor poses in the robot base frame: (0_T_6 * 6_T_R, 0_T_7 * 7_T_L)."""
    g = gripper_frame(chain, state)
    g_r, g_l = gripper_poses(chain, state)
    return g @ g_r, g @ g_l


def resultant_force(poses: tuple[Transform, Transform], forces: JawForces) -> ForceVector:
    """Sum of both jaw forces rotated into the base frame; poses are (right, left)."""
    right, left = poses
    total = right.rotation @ forces.right.as_array() + left.rotation @ forces.left.as_array()
    return ForceVector.from_array(total)


def resultant_many(rot_right: np.ndarray, rot_left: np.ndarray,
                   f_right: np.ndarray, f_left: np.ndarray) -> np.ndarray:
    """Batch resultant: (N,3,3) rotations and (N,3) forces -> (N,3)."""
    return (np.einsum("nij,nj->ni", rot_right, f_right)
            + np.einsum("nij,nj->ni", rot_left, f_left))


J_HAT = np.array([0.0, 1.0, 0.0])


def grasp_force(gripper_pose_transforms: tuple[Transform, Transform],
                forces: JawForces) -> float:
    """Two-point grasp force: the smaller of the two jaw forces projected on
    the inter-jaw line of action (the y-axis of G)."""
    g_r, g_l = gripper_pose_transforms
    pr = abs(float(J_HAT @ (g_r.rotation @ forces.right.as_array())))
    pl = abs(float(J_HAT @ (g_l.rotation @ forces.left.as_array())))
    return min(pr, pl)


def grasp_many(rot_right: np.ndarray, rot_left: np.ndarray,
               f_right: np.ndarray, f_left: np.ndarray) -> np.ndarray:
    pr = np.abs(np.einsum("nj,nj->n", rot_right[:, 1, :], f_right))
    pl = np.abs(np.einsum("nj,nj->n", rot_left[:, 1, :], f_left))
    return np.minimum(pr, pl)


