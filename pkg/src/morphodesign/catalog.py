"""Module catalog: the set of pre-manufactured base modules.

A catalog holds one record per physical module plus bookkeeping ids used by
the morphology encoding: physical modules carry ids ``1..m``, the
end-effector is ``m+1`` (the end-of-manipulator marker), and two virtual
segmentation markers take ids ``m+2`` and ``m+3``. The branch-splitting
Y module is implicit: it is not part of the encodable id range and is
inserted into an assembly whenever a segmentation marker calls for it.

Units are fixed: m, kg, N*m, rad.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

KIND_STRAIGHT = "straight_joint"
KIND_ELBOW = "elbow_joint"
KIND_LINK = "passive_link"
KIND_Y = "y_splitter"
KIND_EE = "end_effector"
KIND_SOM = "som_virtual"

JOINT_KINDS = (KIND_STRAIGHT, KIND_ELBOW)
PHYSICAL_KINDS = (KIND_STRAIGHT, KIND_ELBOW, KIND_LINK, KIND_Y, KIND_EE)
ALL_KINDS = PHYSICAL_KINDS + (KIND_SOM,)

Y_MODULE_ID = 0  # reserved id of the implicit branch splitter

_DEFAULT_AXES = {KIND_STRAIGHT: (0.0, 0.0, 1.0), KIND_ELBOW: (0.0, 1.0, 0.0)}
_DEFAULT_RADII = {KIND_STRAIGHT: 0.08, KIND_ELBOW: 0.08, KIND_Y: 0.08,
                  KIND_LINK: 0.05, KIND_EE: 0.05, KIND_SOM: 0.0}


class CatalogError(ValueError):
    """Catalog file failed to parse or violated a module invariant."""


def cylinder_inertia(mass, length, radius):
    """Inertia of a solid cylinder about its CoM, axis along z."""
    ixx = mass * (3.0 * radius ** 2 + length ** 2) / 12.0
    izz = 0.5 * mass * radius ** 2
    return np.diag([ixx, ixx, izz])


@dataclass
class ModuleSpec:
    """Physical parameters of one interchangeable module.

    The module frame has the input flange at the origin and the output
    flange at ``+length`` along local z; joint modules rotate about
    ``joint_axis`` located at the module midpoint.
    """

    id: int
    kind: str
    mass: float = 0.0
    length: float = 0.0
    radius: float = 0.0
    com_offset: np.ndarray = None
    inertia: np.ndarray = None
    joint_axis: np.ndarray = None
    torque_limit: float = None
    output_ports: int = None
    port_half_angle: float = 0.5235987755982988  # pi/6, y_splitter only

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise CatalogError(f"module {self.id}: unknown kind {self.kind!r}")
        if self.com_offset is None:
            self.com_offset = np.array([0.0, 0.0, self.length / 2.0])
        else:
            self.com_offset = np.asarray(self.com_offset, dtype=float)
        if self.inertia is None:
            self.inertia = cylinder_inertia(self.mass, self.length, max(self.radius, 1e-3))
        else:
            self.inertia = np.asarray(self.inertia, dtype=float)
        if self.is_joint and self.joint_axis is None:
            self.joint_axis = np.array(_DEFAULT_AXES[self.kind])
        elif self.joint_axis is not None:
            self.joint_axis = np.asarray(self.joint_axis, dtype=float)
        if self.output_ports is None:
            self.output_ports = {KIND_Y: 2, KIND_EE: 0, KIND_SOM: 0}.get(self.kind, 1)

    @property
    def is_joint(self):
        return self.kind in JOINT_KINDS

    @property
    def is_physical(self):
        return self.kind in PHYSICAL_KINDS

    def validate(self):
        mid = self.id
        if self.kind == KIND_SOM:
            if self.mass != 0.0 or self.length != 0.0 or self.radius != 0.0:
                raise CatalogError(f"module {mid}: virtual markers must have zero mass/length/radius")
            return
        if self.mass <= 0.0:
            raise CatalogError(f"module {mid}: mass must be positive for physical modules")
        if self.length < 0.0:
            raise CatalogError(f"module {mid}: length must be nonnegative")
        if self.radius <= 0.0:
            raise CatalogError(f"module {mid}: capsule radius must be positive")
        if self.is_joint:
            if self.torque_limit is None or self.torque_limit <= 0.0:
                raise CatalogError(f"module {mid}: joint modules need torque_limit > 0")
            if abs(np.linalg.norm(self.joint_axis) - 1.0) > 1e-9:
                raise CatalogError(f"module {mid}: joint_axis must have unit norm")
        elif self.torque_limit is not None:
            raise CatalogError(f"module {mid}: torque_limit only applies to joint modules")
        expected_ports = {KIND_Y: 2, KIND_EE: 0}.get(self.kind, 1)
        if self.output_ports != expected_ports:
            raise CatalogError(f"module {mid}: {self.kind} must have {expected_ports} output port(s)")

    def to_dict(self):
        d = {"id": self.id, "kind": self.kind, "mass": self.mass,
             "length": self.length, "radius": self.radius,
             "com_offset": [float(v) for v in self.com_offset],
             "inertia": [[float(v) for v in row] for row in self.inertia]}
        if self.is_joint:
            d["joint_axis"] = [float(v) for v in self.joint_axis]
            d["torque_limit"] = self.torque_limit
        if self.kind == KIND_Y:
            d["port_half_angle"] = self.port_half_angle
        return d


@dataclass
class JointLimits:
    """Symmetric default joint bounds shared by all joint modules."""

    position: float = 2.4
    velocity: float = 2.0
    acceleration: float = 0.5


@dataclass
class Catalog:
    """Validated set of modules plus the virtual bookkeeping entries."""

    modules: dict = field(default_factory=dict)  # id -> ModuleSpec, physical ids
    y_module: ModuleSpec = None
    joint_limits: JointLimits = field(default_factory=JointLimits)

    def __post_init__(self):
        if self.y_module is None:
            self.y_module = ModuleSpec(Y_MODULE_ID, KIND_Y, mass=2.5, length=0.2, radius=0.08)
        self._append_virtual()
        self.validate()

    # -- id bookkeeping -------------------------------------------------
    @property
    def m(self):
        """Count of encodable physical modules (end-effector excluded)."""
        return self.eom_id - 1

    @property
    def eom_id(self):
        return next(mid for mid, s in self.modules.items() if s.kind == KIND_EE)

    @property
    def som_ids(self):
        return {self.eom_id + 1, self.eom_id + 2}

    @property
    def score_dim(self):
        return self.m + 3

    def module(self, mid):
        try:
            return self.modules[mid]
        except KeyError:
            raise CatalogError(f"unknown module id {mid}") from None

    def encodable_ids(self):
        """All ids that participate in the score vector, in order."""
        return list(range(1, self.m + 4))

    def _append_virtual(self):
        ee_ids = [mid for mid, s in self.modules.items() if s.kind == KIND_EE]
        if len(ee_ids) != 1:
            raise CatalogError("catalog must contain exactly one end_effector entry")
        eom = ee_ids[0]
        for som in (eom + 1, eom + 2):
            if som not in self.modules:
                self.modules[som] = ModuleSpec(som, KIND_SOM)

    def validate(self):
        ids = sorted(self.modules)
        eom = self.eom_id
        expected = list(range(1, eom + 3))
        if ids != expected:
            raise CatalogError(f"module ids must be contiguous 1..{eom + 2}, got {ids}")
        for mid, spec in self.modules.items():
            if spec.id != mid:
                raise CatalogError(f"module {mid}: id field mismatch ({spec.id})")
            spec.validate()
        soms = [mid for mid, s in self.modules.items() if s.kind == KIND_SOM]
        if sorted(soms) != sorted(self.som_ids):
            raise CatalogError(f"virtual marker ids must be {sorted(self.som_ids)}, got {sorted(soms)}")
        for mid, spec in self.modules.items():
            if spec.kind == KIND_EE and mid != eom:
                raise CatalogError("only one end_effector entry is allowed")
        if self.y_module.kind != KIND_Y:
            raise CatalogError("y_module entry must have kind y_splitter")
        self.y_module.validate()

    def to_dict(self):
        return {
            "modules": [self.modules[mid].to_dict() for mid in sorted(self.modules)
                        if self.modules[mid].kind != KIND_SOM],
            "y_module": {k: v for k, v in self.y_module.to_dict().items() if k != "id"},
            "joint_limits": {"position": self.joint_limits.position,
                             "velocity": self.joint_limits.velocity,
                             "acceleration": self.joint_limits.acceleration},
        }


def _spec_from_dict(d):
    try:
        mid = int(d["id"])
        kind = str(d["kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CatalogError(f"module record missing id/kind: {d!r}") from exc
    kwargs = {}
    for key in ("mass", "length", "radius", "torque_limit", "port_half_angle"):
        if key in d:
            kwargs[key] = float(d[key])
    for key in ("com_offset", "joint_axis"):
        if key in d:
            kwargs[key] = np.asarray(d[key], dtype=float)
    if "inertia" in d:
        kwargs["inertia"] = np.asarray(d["inertia"], dtype=float)
    if "radius" not in kwargs:
        kwargs["radius"] = _DEFAULT_RADII.get(kind, 0.05)
    return ModuleSpec(mid, kind, **kwargs)


def load_catalog(path):
    """Load and validate a catalog file (YAML schema, see README)."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise CatalogError(f"cannot read catalog file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise CatalogError(f"catalog file {path} failed to parse: {exc}") from exc
    if not isinstance(raw, dict) or "modules" not in raw:
        raise CatalogError("catalog file must contain a 'modules' list")
    modules = {}
    for rec in raw["modules"]:
        spec = _spec_from_dict(rec)
        if spec.id in modules:
            raise CatalogError(f"module {spec.id}: duplicate id")
        modules[spec.id] = spec
    y_module = None
    if "y_module" in raw:
        y_rec = dict(raw["y_module"])
        y_rec.setdefault("id", Y_MODULE_ID)
        y_rec.setdefault("kind", KIND_Y)
        y_module = _spec_from_dict(y_rec)
    limits = JointLimits()
    if "joint_limits" in raw:
        jl = raw["joint_limits"]
        limits = JointLimits(float(jl.get("position", limits.position)),
                             float(jl.get("velocity", limits.velocity)),
                             float(jl.get("acceleration", limits.acceleration)))
    return Catalog(modules=modules, y_module=y_module, joint_limits=limits)


def save_catalog(catalog, path):
    with open(path, "w") as fh:
        yaml.safe_dump(catalog.to_dict(), fh, sort_keys=False)


def default_catalog():
    """The built-in 15-entry catalog (ids 1-15, end-effector id 15).

    Joint torque limits follow the reference hardware: 120 N*m for modules
    1, 2, 4 and 5; 160 N*m for the large modules 3 and 6. Passive links come
    in 0.3 m, 0.4 m and 0.6 m lengths. Masses and inertias are plausible
    defaults (the tests are property-based, not tied to hardware masses).
    """
    mods = {}

    def add(mid, kind, mass, length, radius, torque=None):
        mods[mid] = ModuleSpec(mid, kind, mass=mass, length=length,
                               radius=radius, torque_limit=torque)

    add(1, KIND_STRAIGHT, 4.0, 0.25, 0.08, 120.0)
    add(2, KIND_STRAIGHT, 4.0, 0.25, 0.08, 120.0)
    add(3, KIND_ELBOW, 5.5, 0.25, 0.08, 160.0)   # large elbow
    add(4, KIND_ELBOW, 4.0, 0.25, 0.08, 120.0)
    add(5, KIND_ELBOW, 4.0, 0.25, 0.08, 120.0)
    add(6, KIND_STRAIGHT, 5.5, 0.25, 0.08, 160.0)  # large straight
    add(7, KIND_LINK, 1.2, 0.3, 0.05)
    add(8, KIND_LINK, 1.2, 0.3, 0.05)
    add(9, KIND_LINK, 1.6, 0.4, 0.05)
    add(10, KIND_LINK, 1.6, 0.4, 0.05)
    add(11, KIND_LINK, 2.4, 0.6, 0.05)
    add(12, KIND_LINK, 2.4, 0.6, 0.05)
    add(13, KIND_LINK, 1.6, 0.4, 0.05)
    add(14, KIND_LINK, 2.4, 0.6, 0.05)
    add(15, KIND_EE, 1.0, 0.15, 0.05)
    return Catalog(modules=mods)
