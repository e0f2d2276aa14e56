"""Structured cell-centered grids with MAC face staggering.

Scalars, the deformation tensor and the magnetization live at cell centers;
velocity components live on the faces normal to their direction. Two domain
kinds are supported: an axis-aligned box with no-slip walls, and a spherical
shell carved out of a box by a cell mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import GridError

BOX = "box_noslip"
SHELL = "shell_masked"
DOMAIN_KINDS = (BOX, SHELL)


@dataclass(frozen=True, eq=False)
class Grid:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    domain_kind: str
    cell_mask: np.ndarray
    radii: tuple[float, float] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_box(self) -> bool:
        return self.domain_kind == BOX

    @property
    def cell_volume(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    @property
    def n_active(self) -> int:
        return int(self.cell_mask.sum())

    @property
    def lengths(self) -> tuple[float, float, float]:
        return tuple(n * h for n, h in zip(self.dims, self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        n, h, o = self.dims[axis], self.spacing[axis], self.origin[axis]
        return o + h * (np.arange(n) + 0.5)

    def axis_nodes(self, axis: int) -> np.ndarray:
        n, h, o = self.dims[axis], self.spacing[axis], self.origin[axis]
        return o + h * np.arange(n + 1)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays of cell centers."""
        return tuple(
            np.meshgrid(*(self.axis_centers(a) for a in range(3)), indexing="ij")
        )

    def face_centers(self, axis: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinates of the faces normal to ``axis`` (MAC velocity points)."""
        coords = [
            self.axis_nodes(a) if a == axis else self.axis_centers(a) for a in range(3)
        ]
        return tuple(np.meshgrid(*coords, indexing="ij"))

    def face_shape(self, axis: int) -> tuple[int, int, int]:
        shape = list(self.dims)
        shape[axis] += 1
        return tuple(shape)

    def link_mask(self, axis: int, step: int) -> np.ndarray:
        """True where the cell and its neighbour in direction ``step*e_axis`` are both active."""
        key = ("link", axis, step)
        if key not in self._cache:
            m = self.cell_mask
            nb = np.zeros_like(m)
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            if step > 0:
                dst[axis], src[axis] = slice(0, -1), slice(1, None)
            else:
                dst[axis], src[axis] = slice(1, None), slice(0, -1)
            nb[tuple(dst)] = m[tuple(src)]
            self._cache[key] = m & nb
        return self._cache[key]

    @cached_property
    def interior_mask(self) -> np.ndarray:
        """Active cells whose six neighbours are all active."""
        out = self.cell_mask.copy()
        for axis in range(3):
            for step in (1, -1):
                out &= self.link_mask(axis, step)
        return out

    def boundary_faces(self) -> list[tuple[tuple[int, int, int], int, int, tuple[float, float, float]]]:
        """All faces separating an active cell from an inactive cell or the outside.

        Each entry is ``(cell_index, axis, side, outward_normal)``; normals are
        axis-aligned by construction.
        """
        faces = []
        for axis in range(3):
            for step in (1, -1):
                open_side = self.cell_mask & ~self.link_mask(axis, step)
                normal = [0.0, 0.0, 0.0]
                normal[axis] = float(step)
                for idx in zip(*np.nonzero(open_side)):
                    faces.append((tuple(int(i) for i in idx), axis, step, tuple(normal)))
        return faces

    @cached_property
    def cell_normals(self) -> np.ndarray:
        """Aggregated outward normal at active cells touching the boundary.

        Box cells get the normalized sum of their wall normals; shell cells get
        the radial direction (outward on the outer sphere, inward on the inner).
        Zero at cells not touching the boundary.
        """
        normals = np.zeros((3,) + self.dims)
        touching = self.cell_mask & ~self.interior_mask
        if self.is_box:
            for axis in range(3):
                normals[axis] += (~self.link_mask(axis, 1)).astype(float)
                normals[axis] -= (~self.link_mask(axis, -1)).astype(float)
        else:
            x = np.array(self.cell_centers())
            r = np.sqrt((x**2).sum(axis=0))
            r_in, r_out = self.radii
            sign = np.where(r > 0.5 * (r_in + r_out), 1.0, -1.0)
            normals = sign * x / np.where(r > 0, r, 1.0)
        normals *= touching
        norm = np.sqrt((normals**2).sum(axis=0))
        return np.where(norm > 0, normals / np.where(norm > 0, norm, 1.0), 0.0)

    def spec(self) -> dict:
        """Plain-data description, enough to rebuild an identical grid."""
        out = {
            "kind": self.domain_kind,
            "dims": list(self.dims),
            "spacing": list(self.spacing),
            "origin": list(self.origin),
        }
        if self.radii is not None:
            out["radii"] = list(self.radii)
        return out


def make_grid(spec: dict) -> Grid:
    """Build a grid from a plain spec.

    Box spec: ``{"kind": "box_noslip", "dims": (nx, ny, nz), "spacing": h or (hx, hy, hz)}``
    with optional ``"origin"``; ``"length"`` may replace ``"spacing"``.

    Shell spec: ``{"kind": "shell_masked", "n": n, "inner_radius": r1,
    "outer_radius": r2, "half_width": a}`` -- an n^3 grid on ``[-a, a]^3`` whose
    active cells are those with center radius in ``[r1, r2]``.
    """
    kind = spec.get("kind", BOX)
    if kind not in DOMAIN_KINDS:
        raise GridError(f"unknown domain kind {kind!r}")
    if kind == BOX:
        dims = _triple(spec.get("dims", spec.get("n")), int, "dims")
        if "spacing" in spec:
            spacing = _triple(spec["spacing"], float, "spacing")
        else:
            length = _triple(spec.get("length", 1.0), float, "length")
            spacing = tuple(L / n for L, n in zip(length, dims))
        origin = _triple(spec.get("origin", 0.0), float, "origin")
        _check_dims_spacing(dims, spacing)
        mask = np.ones(dims, dtype=bool)
        return Grid(dims, spacing, origin, BOX, mask)

    n = int(spec.get("n", 16))
    r1 = float(spec.get("inner_radius", 0.5))
    r2 = float(spec.get("outer_radius", 1.0))
    a = float(spec.get("half_width", 1.0))
    dims = (n, n, n)
    h = 2.0 * a / n
    spacing = (h, h, h)
    _check_dims_spacing(dims, spacing)
    if not (0.0 <= r1 < r2):
        raise GridError(f"need 0 <= inner radius < outer radius, got {r1}, {r2}")
    if r2 > a:
        raise GridError(f"outer radius {r2} does not fit in the box of half width {a}")
    origin = (-a, -a, -a)
    c = -a + h * (np.arange(n) + 0.5)
    X, Y, Z = np.meshgrid(c, c, c, indexing="ij")
    r = np.sqrt(X**2 + Y**2 + Z**2)
    mask = (r >= r1) & (r <= r2)
    grid = Grid(dims, spacing, origin, SHELL, mask, radii=(r1, r2))
    if grid.interior_mask.sum() < 1:
        raise GridError("shell radii leave no active interior cell at this resolution")
    _, ncomp = ndimage.label(mask)
    if ncomp != 1:
        raise GridError(f"active region has {ncomp} connected components, expected 1")
    touching = mask & ~grid.interior_mask
    if np.any(np.abs(grid.cell_normals[:, touching]).sum(axis=0) == 0):
        raise GridError("boundary cell without a well-defined normal")
    return grid


def _triple(value, cast, name):
    if value is None:
        raise GridError(f"missing {name}")
    if np.isscalar(value):
        return (cast(value),) * 3
    vals = tuple(cast(v) for v in value)
    if len(vals) != 3:
        raise GridError(f"{name} must have three entries, got {len(vals)}")
    return vals


def _check_dims_spacing(dims, spacing):
    if any(n < 3 for n in dims):
        raise GridError(f"all dims must be >= 3, got {dims}")
    if any(not np.isfinite(h) or h <= 0 for h in spacing):
        raise GridError(f"spacings must be positive, got {spacing}")


def grid_from_spec(spec: dict) -> Grid:
    """Inverse of :meth:`Grid.spec`."""
    if spec["kind"] == BOX:
        return make_grid({"kind": BOX, "dims": spec["dims"], "spacing": spec["spacing"], "origin": spec["origin"]})
    r1, r2 = spec["radii"]
    return make_grid({"kind": SHELL, "n": spec["dims"][0], "inner_radius": r1, "outer_radius": r2,
                      "half_width": -spec["origin"][0]})
