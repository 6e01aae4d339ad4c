"""Morphology encoding and assembly.

A morphology is encoded as an ordered id vector ``C_v`` (a permutation of
``1..m+3``). The end-effector id truncates the chain; the two virtual marker
ids partition the remainder into up to three segments: segment 1 mounts at
the base, segment 2 is the tool-carrying main branch, segment 3 the assist
branch. Continuous score vectors map onto ``C_v`` by descending sort, which
lets a continuous optimizer search the discrete design space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog
from .kinematics import Body, Joint, KinematicModel, ModuleFrame
from .rotations import rot_y, transform, transform_rpy

POSE_COMPONENTS = ("x", "y", "z", "roll", "pitch", "yaw")


class MorphologyInfeasibleError(ValueError):
    """Decoded morphology cannot be assembled into a usable manipulator."""

    def __init__(self, reason, deficit=1.0):
        super().__init__(reason)
        self.reason = reason
        self.deficit = float(deficit)


def clamp_scores(M, dim):
    """Validate/clamp a raw score vector into [0, 1]^dim."""
    M = np.asarray(M, dtype=float)
    if M.shape != (dim,):
        raise ValueError(f"score vector must have length {dim}, got {M.shape}")
    return np.clip(M, 0.0, 1.0)


def sort_map(M):
    """Rank scores in descending order; ties break toward ascending id.

    Returns the id list (ids are 1-based positions in M). The map is
    invariant under any strictly increasing transform of the scores.
    """
    M = np.asarray(M, dtype=float)
    ids = np.arange(1, M.size + 1)
    order = np.lexsort((ids, -M))
    return [int(i) for i in ids[order]]


def mount_map(h):
    """Descending sort of the two mount-hole scores -> port order S."""
    h = np.asarray(h, dtype=float)
    if h.shape != (2,):
        raise ValueError("mount-hole score vector must have length 2")
    return (1, 2) if h[0] >= h[1] else (2, 1)


@dataclass
class MorphologyState:
    """Discrete morphology state: id ordering, port order, raw hole scores."""

    C_v: tuple
    S: tuple
    h: tuple = (1.0, 0.0)


@dataclass
class MountedPose:
    """Manipulator base pose in the world frame.

    ``values`` is [x, y, z, roll, pitch, yaw] (m, rad); ``free`` names the
    components a designer may vary, the rest stay at the given values.
    """

    values: np.ndarray = field(default_factory=lambda: np.zeros(6))
    free: tuple = POSE_COMPONENTS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (6,):
            raise ValueError("mounted pose needs 6 components")
        for name in self.free:
            if name not in POSE_COMPONENTS:
                raise ValueError(f"unknown pose component {name!r}")

    def as_transform(self):
        return transform_rpy(self.values[:3], self.values[3:])


@dataclass
class SegmentedMorphology:
    """Module id lists per structural role after decoding C_v."""

    base_segment: list
    main_branch: list
    assist_branch: list
    is_bi_branch: bool
    uses_y_module: bool
    port_main: int = None
    port_assist: int = None

    def all_module_ids(self):
        return list(self.base_segment) + list(self.main_branch) + list(self.assist_branch)


def segment(C_v, S, catalog: Catalog):
    """Partition an ordered id vector into base/main/assist segments."""
    eom = catalog.eom_id
    som_ids = catalog.som_ids
    if eom not in C_v:
        raise MorphologyInfeasibleError("ordering contains no end-effector marker")
    trunc = list(C_v[:list(C_v).index(eom)])

    segs = [[], [], []]
    cursor = 0
    som_seen = 0
    for mid in trunc:
        if mid in som_ids:
            som_seen += 1
            cursor = min(cursor + 1, 2)
            continue
        segs[cursor].append(mid)
    base, b2, b3 = segs

    if b2 and b3:
        port_main, port_assist = S[0], S[1]
        return SegmentedMorphology(base, b2, b3, True, True, port_main, port_assist)
    branch = b2 or b3
    if som_seen and branch:
        return SegmentedMorphology(base, branch, [], False, True)
    return SegmentedMorphology(base, [], [], False, False)


def decode_scores(M, h, catalog: Catalog):
    """Full decode: scores -> (C_v, S, segmented morphology)."""
    C_v = sort_map(M)
    S = mount_map(h)
    return MorphologyState(tuple(C_v), S, tuple(np.asarray(h, dtype=float))), segment(C_v, S, catalog)


def _tz(L):
    return transform(p=[0.0, 0.0, L])


class _Assembler:
    def __init__(self, catalog, pose):
        self.catalog = catalog
        self.joints = []
        self.bodies = {-1: Body()}
        self.frames = []
        self.adjacent = set()
        self.base_pose = pose.as_transform()
        self.limits = catalog.joint_limits

    def _link_adjacent(self, a, b):
        if a is None or b is None or a == b:
            return
        self.adjacent.add((min(a, b), max(a, b)))

    def add_module(self, spec, branch, owner, T_cur, prev_frame):
        """Attach one module; returns (owner, T_cur, frame_index)."""
        idx = len(self.frames)
        if spec.is_joint:
            T_joint = T_cur @ _tz(spec.length / 2.0)
            joint = Joint(parent=owner, T_parent=T_joint, axis=spec.joint_axis.copy(),
                          module_id=spec.id, branch=branch, torque_limit=spec.torque_limit,
                          q_bound=(-self.limits.position, self.limits.position),
                          qd_bound=(-self.limits.velocity, self.limits.velocity),
                          qdd_bound=(-self.limits.acceleration, self.limits.acceleration))
            self.joints.append(joint)
            new_owner = len(self.joints) - 1
            self.bodies[new_owner] = Body()
            half = np.array([0.0, 0.0, spec.length / 2.0])
            self.bodies[new_owner].add(spec.mass, spec.com_offset - half, spec.inertia.copy())
            # capsule rides the distal (rotating) side of the joint
            self.frames.append(ModuleFrame(new_owner, _tz(-spec.length / 2.0), spec.id,
                                           spec.kind, spec.length, spec.radius))
            self._link_adjacent(prev_frame, idx)
            return new_owner, _tz(spec.length / 2.0), idx
        R, p = T_cur[:3, :3], T_cur[:3, 3]
        self.bodies[owner].add(spec.mass, p + R @ spec.com_offset, R @ spec.inertia @ R.T)
        self.frames.append(ModuleFrame(owner, T_cur.copy(), spec.id, spec.kind,
                                       spec.length, spec.radius))
        self._link_adjacent(prev_frame, idx)
        return owner, T_cur @ _tz(spec.length), idx

    def walk(self, ids, branch, owner, T_cur, prev_frame):
        for mid in ids:
            spec = self.catalog.module(mid)
            owner, T_cur, prev_frame = self.add_module(spec, branch, owner, T_cur, prev_frame)
        return owner, T_cur, prev_frame


def assemble(seg: SegmentedMorphology, pose: MountedPose, catalog: Catalog):
    """Build the kinematic/dynamic tree for a segmented morphology.

    The implicit Y splitter is inserted at the segmentation point. When only
    one branch follows it, the used output port is aligned with the module
    axis; in the bi-branch case the two ports leave at +/- the configured
    half angle (main branch on its assigned port).
    """
    if not seg.all_module_ids():
        raise MorphologyInfeasibleError("empty morphology: end-effector marker leads the ordering")

    asm = _Assembler(catalog, pose)
    base_branch = "shared" if seg.is_bi_branch else "main"
    owner, T_cur, prev = asm.walk(seg.base_segment, base_branch, -1, np.eye(4), None)

    if seg.uses_y_module:
        y = catalog.y_module
        owner, T_after, y_frame = asm.add_module(y, base_branch, owner, T_cur, prev)
        # add_module advanced straight through the trunk; branch ports start there
        if seg.is_bi_branch:
            half = y.port_half_angle
            def port_T(port):
                ang = half if port == 1 else -half
                return T_after @ transform(rot_y(ang))
            m_owner, m_T, m_prev = asm.walk(seg.main_branch, "main", owner,
                                            port_T(seg.port_main), y_frame)
            first_main = y_frame + 1 if seg.main_branch else None
            a_owner, a_T, a_prev = asm.walk(seg.assist_branch, "assist", owner,
                                            port_T(seg.port_assist), y_frame)
            if seg.main_branch and seg.assist_branch:
                asm._link_adjacent(first_main, y_frame + 1 + len(seg.main_branch))
            owner, T_cur, prev = m_owner, m_T, m_prev
        else:
            owner, T_cur, prev = asm.walk(seg.main_branch, "main", owner, T_after, y_frame)

    ee_spec = catalog.module(catalog.eom_id)
    owner, T_cur, prev = asm.add_module(ee_spec, "main", owner, T_cur, prev)

    main_joints = [i for i, j in enumerate(asm.joints) if j.branch in ("shared", "main")]
    assist_joints = [i for i, j in enumerate(asm.joints) if j.branch == "assist"]
    if not main_joints:
        raise MorphologyInfeasibleError("main branch has no joints", deficit=1.0)

    model = KinematicModel(asm.base_pose, asm.joints, asm.bodies, asm.frames,
                           ee_joint=owner, ee_T_local=T_cur,
                           main_joints=main_joints, assist_joints=assist_joints,
                           adjacent_pairs=asm.adjacent, segmented=seg)
    return model


def assembled_module_count(seg: SegmentedMorphology):
    """Physical modules used by the design (implicit Y included, EE excluded)."""
    return len(seg.all_module_ids()) + (1 if seg.uses_y_module else 0)
