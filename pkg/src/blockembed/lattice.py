"""Lattice-animal geometry, neighborhoods, and cell/buffer geometry.

All geometry is stored in integer units of level-0 cells; level-0 cells are
unit squares of the block index lattice.  Rectangles are half-open in cell
units: ``Rect(x0, y0, x1, y1)`` covers cells with x0 <= x < x1 and
y0 <= y < y1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

from .errors import CapExceeded, ConfigError
from .params import ParameterSet

Point = tuple[int, int]

SHAPE_SIZE_CAP = 10

_EUCLIDEAN_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_CLOSE_PACKED_STEPS = _EUCLIDEAN_STEPS + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def neighbors(u: Point, mode: str = "euclidean") -> frozenset[Point]:
    """Neighbors of a lattice point: 4 euclidean or 8 close-packed."""
    if mode == "euclidean":
        steps = _EUCLIDEAN_STEPS
    elif mode == "close_packed":
        steps = _CLOSE_PACKED_STEPS
    else:
        raise ConfigError(f"unknown neighborhood mode {mode!r}")
    return frozenset((u[0] + dx, u[1] + dy) for dx, dy in steps)


def is_connected(sites: Iterable[Point]) -> bool:
    """Whether a finite site set is connected under the 4-neighborhood."""
    sites = set(sites)
    if not sites:
        return False
    stack = [next(iter(sites))]
    seen = {stack[0]}
    while stack:
        x, y = stack.pop()
        for dx, dy in _EUCLIDEAN_STEPS:
            q = (x + dx, y + dy)
            if q in sites and q not in seen:
                seen.add(q)
                stack.append(q)
    return len(seen) == len(sites)


@dataclass(frozen=True)
class LatticeAnimal:
    """A nonempty finite subset of the lattice, connected by lattice edges."""

    sites: frozenset[Point]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sites", frozenset(self.sites))
        if not self.sites:
            raise ConfigError("a lattice animal must be nonempty")
        if not is_connected(self.sites):
            raise ConfigError("a lattice animal must be connected")

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, p: Point) -> bool:
        return p in self.sites

    def __iter__(self):
        return iter(sorted(self.sites))

    def translate(self, t: Point) -> "LatticeAnimal":
        return LatticeAnimal(frozenset((x + t[0], y + t[1]) for x, y in self.sites))

    def bounding_box(self) -> tuple[int, int, int, int]:
        xs = [p[0] for p in self.sites]
        ys = [p[1] for p in self.sites]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class Shape:
    """Translation class of a lattice animal.

    Canonical form: the animal translated so its lexicographically least
    site sits at the origin.
    """

    canonical_sites: frozenset[Point]

    @classmethod
    def of(cls, animal: LatticeAnimal) -> "Shape":
        ax, ay = min(animal.sites)
        return cls(frozenset((x - ax, y - ay) for x, y in animal.sites))

    def animal_at(self, anchor: Point) -> LatticeAnimal:
        """The representative whose least site sits at ``anchor``."""
        return LatticeAnimal(
            frozenset((x + anchor[0], y + anchor[1]) for x, y in self.canonical_sites)
        )

    def __len__(self) -> int:
        return len(self.canonical_sites)

    def bounding_dims(self) -> tuple[int, int]:
        xs = [p[0] for p in self.canonical_sites]
        ys = [p[1] for p in self.canonical_sites]
        return max(xs) - min(xs) + 1, max(ys) - min(ys) + 1

    def serialize(self) -> str:
        """Line-oriented text form: sorted coordinate pairs."""
        return " ".join(f"{x},{y}" for x, y in sorted(self.canonical_sites))

    @classmethod
    def deserialize(cls, line: str) -> "Shape":
        sites = []
        for token in line.split():
            x, y = token.split(",")
            sites.append((int(x), int(y)))
        return cls.of(LatticeAnimal(frozenset(sites)))


def same_shape(a: LatticeAnimal, b: LatticeAnimal) -> Optional[Point]:
    """The unique translation taking a onto b, or None if shapes differ."""
    if len(a) != len(b):
        return None
    ax, ay = min(a.sites)
    bx, by = min(b.sites)
    t = (bx - ax, by - ay)
    if all((x + t[0], y + t[1]) in b.sites for x, y in a.sites):
        return t
    return None


def enumerate_shapes(
    size: int, containing_origin: bool = False, cap: int = SHAPE_SIZE_CAP
) -> list:
    """All fixed polyomino shapes of the given size, each exactly once.

    With ``containing_origin`` set, returns instead every animal of that
    size that contains the origin.
    """
    if size < 1:
        raise ConfigError("size must be at least 1")
    if size > cap:
        raise CapExceeded(f"shape size {size} exceeds cap {cap}")
    shapes = {Shape.of(LatticeAnimal(frozenset([(0, 0)])))}
    for _ in range(size - 1):
        grown = set()
        for shape in shapes:
            sites = shape.canonical_sites
            frontier = set()
            for x, y in sites:
                for dx, dy in _EUCLIDEAN_STEPS:
                    q = (x + dx, y + dy)
                    if q not in sites:
                        frontier.add(q)
            for q in frontier:
                grown.add(Shape.of(LatticeAnimal(sites | {q})))
        shapes = grown
    result = sorted(shapes, key=lambda s: sorted(s.canonical_sites))
    if not containing_origin:
        return result
    animals = set()
    for shape in result:
        for x, y in shape.canonical_sites:
            animals.add(
                LatticeAnimal(
                    frozenset((sx - x, sy - y) for sx, sy in shape.canonical_sites)
                )
            )
    return sorted(animals, key=lambda a: sorted(a.sites))


class Rect(NamedTuple):
    """Half-open axis-aligned rectangle in level-0 cell units."""

    x0: int
    y0: int
    x1: int
    y1: int

    def contains_cell(self, p: Point) -> bool:
        return self.x0 <= p[0] < self.x1 and self.y0 <= p[1] < self.y1

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def intersects(self, other: "Rect") -> bool:
        return (
            self.x0 < other.x1
            and other.x0 < self.x1
            and self.y0 < other.y1
            and other.y0 < self.y1
        )

    def intersection(self, other: "Rect") -> Optional["Rect"]:
        x0, y0 = max(self.x0, other.x0), max(self.y0, other.y0)
        x1, y1 = min(self.x1, other.x1), min(self.y1, other.y1)
        if x0 < x1 and y0 < y1:
            return Rect(x0, y0, x1, y1)
        return None

    def inset(self, margin: int) -> "Rect":
        return Rect(self.x0 + margin, self.y0 + margin, self.x1 - margin, self.y1 - margin)

    def outset(self, margin: int) -> "Rect":
        return self.inset(-margin)

    def cells(self) -> Iterable[Point]:
        for y in range(self.y0, self.y1):
            for x in range(self.x0, self.x1):
                yield (x, y)


@dataclass(frozen=True)
class CellGeometry:
    """Region, interior, and blow-up squares of one cell."""

    level: int
    index: Point
    region: Rect
    interior: Rect
    blowup: Rect
    margin: int


def cell_geometry(
    j: int, u: Point, params: ParameterSet, margin: int | None = None
) -> CellGeometry:
    """Geometry of the level-j cell at index u, in level-0 cell units.

    The interior and blow-up are inset/outset from the region by the
    buffer margin (level 0 has no buffers and uses margin 0).
    """
    side = params.cell_side(j)
    if margin is None:
        margin = params.margins(j).buffer if j >= 1 else 0
    if j >= 1 and 2 * margin >= side:
        raise ConfigError("margin too large for the cell side")
    region = Rect(u[0] * side, u[1] * side, (u[0] + 1) * side, (u[1] + 1) * side)
    return CellGeometry(j, u, region, region.inset(margin), region.outset(margin), margin)


_SIDE_STEPS = {"T": (0, 1), "B": (0, -1), "L": (-1, 0), "R": (1, 0)}
_OPPOSITE_SIDE = {"T": "B", "B": "T", "L": "R", "R": "L"}


@dataclass(frozen=True)
class BufferZone:
    """The shared buffer rectangle on one side of a cell.

    The rectangle is the intersection of the two adjacent cells' buffer
    annuli: a strip of half-width ``margin`` centered on the shared edge,
    extended ``margin`` beyond both corners.
    """

    level: int
    owner: Point
    side: str
    rect: Rect
    shared_with: Point


def buffer_zone(
    j: int, u: Point, side: str, params: ParameterSet, margin: int | None = None
) -> BufferZone:
    """The buffer of the level-j cell at u on the given side (T/L/B/R)."""
    if side not in _SIDE_STEPS:
        raise ConfigError(f"unknown side {side!r}")
    geo = cell_geometry(j, u, params, margin)
    m = geo.margin
    r = geo.region
    if side == "T":
        rect = Rect(r.x0 - m, r.y1 - m, r.x1 + m, r.y1 + m)
    elif side == "B":
        rect = Rect(r.x0 - m, r.y0 - m, r.x1 + m, r.y0 + m)
    elif side == "L":
        rect = Rect(r.x0 - m, r.y0 - m, r.x0 + m, r.y1 + m)
    else:
        rect = Rect(r.x1 - m, r.y0 - m, r.x1 + m, r.y1 + m)
    dx, dy = _SIDE_STEPS[side]
    return BufferZone(j, u, side, rect, (u[0] + dx, u[1] + dy))


def outer_buffers(
    animal: LatticeAnimal, j: int, params: ParameterSet, margin: int | None = None
) -> list[BufferZone]:
    """Side buffers shared with cells outside the animal, in sorted order."""
    out = []
    for u in animal:
        for side in ("B", "L", "R", "T"):
            zone = buffer_zone(j, u, side, params, margin)
            if zone.shared_with not in animal:
                out.append(zone)
    return out
