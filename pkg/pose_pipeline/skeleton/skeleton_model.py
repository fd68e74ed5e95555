import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Mapping, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError

from pose_pipeline.errors import SchemaError, SkeletonError

DEFAULT_SKELETON_PATH = Path(__file__).resolve().parents[2] / "skeletons" / "itop15.yaml"


class SkeletonDefinition(BaseModel):
    """On-disk skeleton schema (names are resolved to indices on load)."""

    name: str = Field(default="skeleton")
    landmarks: List[str] = Field(..., min_length=2)
    limbs: List[Tuple[str, str]]
    limb_parents: List[Tuple[int, int]] = Field(default_factory=list)
    root_limb: int = Field(..., ge=0)
    trunk: List[str]


@dataclass(frozen=True)
class SkeletonModel:
    """Landmark set plus the limb tree rooted at the spine limb.

    ``limbs[i] = (child, parent)`` landmark indices; the limb vector of limb
    ``i`` is ``pose[child] - pose[parent]``. ``limb_parents`` maps every
    non-root limb to the limb sharing its parent landmark.
    """

    landmarks: Tuple[str, ...]
    limbs: Tuple[Tuple[int, int], ...]
    limb_parents: Mapping[int, int]
    root_limb: int
    trunk_landmarks: FrozenSet[int]
    name: str = "skeleton"
    _children: Mapping[int, Tuple[int, ...]] = field(
        default_factory=dict, repr=False, compare=False
    )

    @property
    def num_landmarks(self) -> int:
        return len(self.landmarks)

    @property
    def num_limbs(self) -> int:
        return len(self.limbs)

    @property
    def non_root_limbs(self) -> List[int]:
        return [i for i in range(self.num_limbs) if i != self.root_limb]

    @property
    def root_landmarks(self) -> Tuple[int, int]:
        return self.limbs[self.root_limb]

    def index(self, name: str) -> int:
        try:
            return self.landmarks.index(name)
        except ValueError:
            raise SchemaError(f"Unknown landmark: {name}") from None

    def child_limbs(self, limb: int) -> Tuple[int, ...]:
        return self._children.get(limb, ())

    def limb_vectors(self, pose: np.ndarray) -> np.ndarray:
        """Limb vectors of one (J, 3) pose or a (N, J, 3) batch."""
        pose = np.asarray(pose, dtype=np.float64)
        child = np.array([c for c, _ in self.limbs])
        parent = np.array([p for _, p in self.limbs])
        return pose[..., child, :] - pose[..., parent, :]

    @property
    def checksum(self) -> str:
        canonical = {
            "landmarks": list(self.landmarks),
            "limbs": [list(limb) for limb in self.limbs],
            "limb_parents": sorted([k, v] for k, v in self.limb_parents.items()),
            "root_limb": self.root_limb,
            "trunk": sorted(self.trunk_landmarks),
        }
        payload = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def skeleton_from_definition(definition: Mapping[str, Any]) -> SkeletonModel:
    """Validate a skeleton definition mapping and build the model."""
    try:
        spec = SkeletonDefinition.model_validate(definition)
    except ValidationError as e:
        raise SchemaError(f"Invalid skeleton definition: {e}") from e

    if len(set(spec.landmarks)) != len(spec.landmarks):
        raise SchemaError("Landmark names must be unique")
    name_to_index = {name: i for i, name in enumerate(spec.landmarks)}

    def resolve(name: str) -> int:
        if name not in name_to_index:
            raise SchemaError(f"Unknown landmark in skeleton definition: {name}")
        return name_to_index[name]

    limbs = tuple((resolve(c), resolve(p)) for c, p in spec.limbs)
    trunk = frozenset(resolve(n) for n in spec.trunk)
    limb_parents: Dict[int, int] = {}
    for limb, parent in spec.limb_parents:
        if limb in limb_parents:
            raise SkeletonError(f"Limb {limb} has more than one parent limb")
        limb_parents[limb] = parent

    _validate(spec.landmarks, limbs, limb_parents, spec.root_limb, trunk)

    children: Dict[int, List[int]] = {}
    for limb, parent in sorted(limb_parents.items()):
        children.setdefault(parent, []).append(limb)

    return SkeletonModel(
        landmarks=tuple(spec.landmarks),
        limbs=limbs,
        limb_parents=dict(limb_parents),
        root_limb=spec.root_limb,
        trunk_landmarks=trunk,
        name=spec.name,
        _children={k: tuple(v) for k, v in children.items()},
    )


def _validate(
    landmarks: List[str],
    limbs: Tuple[Tuple[int, int], ...],
    limb_parents: Dict[int, int],
    root_limb: int,
    trunk: FrozenSet[int],
) -> None:
    n = len(landmarks)
    if len(limbs) != n - 1:
        raise SkeletonError(f"Expected {n - 1} limbs for {n} landmarks, got {len(limbs)}")

    # Undirected landmark graph must be a tree
    root_of = list(range(n))

    def find(i: int) -> int:
        while root_of[i] != i:
            root_of[i] = root_of[root_of[i]]
            i = root_of[i]
        return i

    for i, (c, p) in enumerate(limbs):
        if c == p:
            raise SkeletonError(f"Limb {i} joins landmark {landmarks[c]} to itself")
        rc, rp = find(c), find(p)
        if rc == rp:
            raise SkeletonError(f"Limb {i} ({landmarks[c]}-{landmarks[p]}) closes a cycle")
        root_of[rc] = rp
    if len({find(i) for i in range(n)}) != 1:
        raise SkeletonError("Limb graph is disconnected")

    if not 0 <= root_limb < len(limbs):
        raise SkeletonError(f"root_limb {root_limb} out of range")
    if not set(limbs[root_limb]) <= trunk:
        raise SkeletonError("Both landmarks of the root limb must be trunk landmarks")

    expected = set(range(len(limbs))) - {root_limb}
    if set(limb_parents) != expected:
        missing = sorted(expected - set(limb_parents))
        extra = sorted(set(limb_parents) - expected)
        raise SkeletonError(
            f"limb_parents must cover every non-root limb once (missing={missing}, extra={extra})"
        )

    for limb, parent in limb_parents.items():
        if not 0 <= parent < len(limbs) or parent == limb:
            raise SkeletonError(f"Invalid parent limb {parent} for limb {limb}")
        child_lm, shared_lm = limbs[limb]
        if shared_lm not in limbs[parent] or child_lm in limbs[parent]:
            raise SkeletonError(
                f"Limb {limb} must share exactly its parent landmark with limb {parent}"
            )

    # Every parent chain must terminate at the root limb
    for limb in limb_parents:
        seen = {limb}
        current = limb
        while current != root_limb:
            current = limb_parents[current]
            if current in seen:
                raise SkeletonError(f"Limb parent relation has a cycle through limb {limb}")
            seen.add(current)


def load_skeleton(source: Union[str, Path, Mapping[str, Any]] = DEFAULT_SKELETON_PATH) -> SkeletonModel:
    """Load a skeleton from a YAML file path or an already parsed mapping."""
    if isinstance(source, Mapping):
        return skeleton_from_definition(source)

    path = Path(source)
    if not path.exists():
        raise SchemaError(f"Skeleton file not found: {path}")
    try:
        definition = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise SchemaError(f"Skeleton file {path} is not valid YAML: {e}") from e
    if not isinstance(definition, Mapping):
        raise SchemaError(f"Skeleton file {path} must contain a mapping")
    return skeleton_from_definition(definition)


def recovery_order(model: SkeletonModel) -> List[int]:
    """Breadth-first limb order from the spine root; parents precede children."""
    order: List[int] = []
    queue = deque([model.root_limb])
    while queue:
        limb = queue.popleft()
        order.append(limb)
        queue.extend(model.child_limbs(limb))
    return order
