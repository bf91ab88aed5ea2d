"""Regular grids, scalar/vector fields, and first-order difference operators.

Fields live on isotropic node-centred grids in one or two dimensions; each
node owns a cell of measure ``h**ndim``.  The gradient uses forward
differences and the divergence is its exact negative adjoint for the
cell-weighted inner products, a pairing the solver modules rely on.

A grid is either free (Neumann: the one-sided difference at the last node
along each axis is zero) or fixed-boundary (Dirichlet: the difference at the
last node reaches into a ghost layer supplied by a donor field).  Ghost
values extend the donor linearly beyond the far face, so a field that is
affine along an axis keeps a constant difference all the way to the edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "dirichlet_grid",
    "coordinates",
    "gradient",
    "divergence",
    "raw_gradient",
    "raw_divergence",
    "magnitude",
    "total_variation",
    "inner",
    "norm_l1",
    "norm_l2",
    "constant_field",
    "step_field",
    "ramp_field",
    "smoothstep_field",
    "random_lipschitz_field",
    "read_field_csv",
    "write_field_csv",
    "read_pgm",
    "write_pgm",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Isotropic node-centred grid in one or two dimensions.

    Parameters
    ----------
    shape :
        Node count per axis; every extent must be at least 2.
    h :
        Positive node spacing, shared by all axes.
    ghost :
        Optional far-face ghost values, one array per axis with the shape of
        the orthogonal slice.  Present exactly on Dirichlet grids.
    """

    shape: tuple[int, ...]
    h: float
    ghost: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "h", float(self.h))
        if len(shape) not in (1, 2):
            raise ValueError("grids must be one- or two-dimensional")
        if any(n < 2 for n in shape):
            raise ValueError("every grid extent must be at least 2")
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError("grid spacing must be positive and finite")
        if self.ghost is not None:
            if len(self.ghost) != len(shape):
                raise ValueError("one ghost slice per axis is required")
            slabs = []
            for axis, g in enumerate(self.ghost):
                g = np.array(g, dtype=float)
                want = shape[:axis] + shape[axis + 1:]
                if g.shape != want:
                    raise ValueError(
                        f"ghost slice for axis {axis} must have shape {want}, "
                        f"got {g.shape}")
                if not np.all(np.isfinite(g)):
                    raise ValueError("ghost values must be finite")
                g.flags.writeable = False
                slabs.append(g)
            object.__setattr__(self, "ghost", tuple(slabs))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def boundary_mode(self) -> str:
        return "neumann" if self.ghost is None else "dirichlet"

    @property
    def cell_measure(self) -> float:
        return self.h ** self.ndim

    @property
    def measure(self) -> float:
        return self.cell_measure * self.size

    def compatible(self, other: "Grid") -> bool:
        """True when shapes and spacings agree (boundary mode is ignored)."""
        return self.shape == other.shape and self.h == other.h


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One value per grid node; values are finite and treated as immutable."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(
                f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class VectorField:
    """One n-vector per node of an n-dimensional grid, components first."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        want = (self.grid.ndim,) + self.grid.shape
        if v.shape != want:
            raise ValueError(
                f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def dirichlet_grid(donor: ScalarField) -> Grid:
    """Fixed-boundary grid whose ghost layer linearly extends ``donor``.

    Along each axis the ghost value one node past the far face is
    ``2*donor[-1] - donor[-2]``, the linear extrapolation of the donor's
    last two nodes.
    """
    ghost = []
    for axis in range(donor.grid.ndim):
        last = _axis_slice(donor.grid.ndim, axis, -1)
        prev = _axis_slice(donor.grid.ndim, axis, -2)
        ghost.append(2.0 * donor.values[last] - donor.values[prev])
    return Grid(donor.grid.shape, donor.grid.h, ghost=tuple(ghost))


def coordinates(grid: Grid) -> tuple[np.ndarray, ...]:
    """Cell-centre coordinates per axis: node i sits at ``(i + 1/2) * h``."""
    return tuple((np.arange(n) + 0.5) * grid.h for n in grid.shape)


def _axis_slice(ndim: int, axis: int, index) -> tuple:
    return tuple(index if k == axis else slice(None) for k in range(ndim))


def raw_gradient(values: np.ndarray, h: float,
                 ghost: tuple[np.ndarray, ...] | None) -> np.ndarray:
    """Array-level forward differences; see :func:`gradient`."""
    ndim = values.ndim
    out = np.zeros((ndim,) + values.shape)
    for axis in range(ndim):
        head = _axis_slice(ndim, axis, slice(None, -1))
        tail = _axis_slice(ndim, axis, slice(1, None))
        comp = out[axis]
        comp[head] = (values[tail] - values[head]) / h
        if ghost is not None:
            last = _axis_slice(ndim, axis, -1)
            comp[last] = (ghost[axis] - values[last]) / h
    return out


def raw_divergence(components: np.ndarray, h: float, dirichlet: bool) -> np.ndarray:
    """Array-level negative adjoint of :func:`raw_gradient`."""
    ndim = components.shape[0]
    out = np.zeros(components.shape[1:])
    for axis in range(ndim):
        comp = components[axis]
        if not dirichlet:
            # the gradient's last entry per axis is structurally zero, so the
            # adjoint must ignore the matching dual component
            comp = comp.copy()
            comp[_axis_slice(ndim, axis, -1)] = 0.0
        first = _axis_slice(ndim, axis, 0)
        head = _axis_slice(ndim, axis, slice(None, -1))
        tail = _axis_slice(ndim, axis, slice(1, None))
        out[first] += comp[first] / h
        out[tail] += (comp[tail] - comp[head]) / h
    return out


def gradient(u: ScalarField) -> VectorField:
    """Forward-difference gradient of a scalar field.

    Component ``axis`` at an interior node i is ``(u[i+1] - u[i]) / h``; at
    the last node along the axis it is zero on Neumann grids and
    ``(ghost - u[i]) / h`` on Dirichlet grids.
    """
    return VectorField(u.grid, raw_gradient(u.values, u.grid.h, u.grid.ghost))


def divergence(v: VectorField) -> ScalarField:
    """Negative adjoint of :func:`gradient` on the same grid.

    For all fields u, w: ``inner(gradient(u), w) == -inner(u, divergence(w))``
    exactly, where on Dirichlet grids ``gradient`` stands for its linear part
    (the ghost contribution is an additive constant).
    """
    return ScalarField(v.grid, raw_divergence(v.values, v.grid.h,
                                              v.grid.ghost is not None))


def magnitude(v: VectorField) -> ScalarField:
    """Pointwise Euclidean length of a vector field."""
    return ScalarField(v.grid, np.sqrt(np.sum(v.values ** 2, axis=0)))


def total_variation(u: ScalarField) -> float:
    """Isotropic discrete total variation ``h**n * sum |grad u|``."""
    g = gradient(u)
    return u.grid.cell_measure * float(np.sum(np.sqrt(np.sum(g.values ** 2, axis=0))))


def inner(a, b) -> float:
    """Cell-weighted inner product of two fields of the same kind."""
    if not a.grid.compatible(b.grid):
        raise ValueError("fields live on incompatible grids")
    return a.grid.cell_measure * float(np.vdot(a.values, b.values))


def norm_l1(a) -> float:
    """Cell-weighted L1 norm; vector fields use pointwise Euclidean length."""
    if isinstance(a, VectorField):
        return a.grid.cell_measure * float(
            np.sum(np.sqrt(np.sum(a.values ** 2, axis=0))))
    return a.grid.cell_measure * float(np.sum(np.abs(a.values)))


def norm_l2(a) -> float:
    """Cell-weighted L2 norm."""
    return float(np.sqrt(a.grid.cell_measure * np.sum(a.values ** 2)))


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def step_field(grid: Grid, low: float, high: float, position: float = 0.5,
               axis: int = 0) -> ScalarField:
    """Two-level field: ``low`` where the axis coordinate is below
    ``position`` (a fraction of the axis length), ``high`` elsewhere."""
    x = coordinates(grid)[axis]
    edge = position * grid.shape[axis] * grid.h
    line = np.where(x < edge, float(low), float(high))
    return ScalarField(grid, _along_axis(line, grid, axis))


def ramp_field(grid: Grid, start: float, stop: float, axis: int = 0) -> ScalarField:
    """Affine field running from ``start`` to ``stop`` along one axis."""
    n = grid.shape[axis]
    x = coordinates(grid)[axis]
    line = start + (stop - start) * (x - x[0]) / (x[-1] - x[0]) if n > 1 else \
        np.full(n, float(start))
    return ScalarField(grid, _along_axis(line, grid, axis))


def smoothstep_field(grid: Grid, low: float, high: float, start: float,
                     width: float, axis: int = 0) -> ScalarField:
    """C1 ramp from ``low`` to ``high`` over ``[start, start + width]``.

    Coordinates are physical (axis length is ``shape[axis] * h``).  The
    profile is the cubic smoothstep, flat on both sides of the transition.
    """
    x = coordinates(grid)[axis]
    s = np.clip((x - start) / width, 0.0, 1.0)
    line = low + (high - low) * s * s * (3.0 - 2.0 * s)
    return ScalarField(grid, _along_axis(line, grid, axis))


def random_lipschitz_field(grid: Grid, low: float, high: float,
                           seed: int = 0, knots: int = 8) -> ScalarField:
    """Random Lipschitz field with values in ``[low, high]``.

    Draws uniform values at ``knots`` control points per axis and joins them
    by linear interpolation, so the slope never exceeds
    ``(high - low) * (knots - 1) / axis_length``.  In two dimensions the
    field is the mean of two one-dimensional profiles.
    """
    rng = np.random.default_rng(seed)

    def profile(axis: int) -> np.ndarray:
        x = coordinates(grid)[axis]
        length = grid.shape[axis] * grid.h
        cx = np.linspace(0.0, length, knots)
        cv = rng.uniform(low, high, size=knots)
        return np.interp(x, cx, cv)

    if grid.ndim == 1:
        return ScalarField(grid, profile(0))
    a = _along_axis(profile(0), grid, 0)
    b = _along_axis(profile(1), grid, 1)
    return ScalarField(grid, 0.5 * (a + b))


def _along_axis(line: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Broadcast a one-axis profile across the remaining axes."""
    if grid.ndim == 1:
        return np.asarray(line, dtype=float)
    shape = [1, 1]
    shape[axis] = grid.shape[axis]
    return np.broadcast_to(np.asarray(line, dtype=float).reshape(shape),
                           grid.shape).copy()


# --- plain-text field serialization --------------------------------------

def write_field_csv(field: ScalarField, path) -> None:
    """Write a field as CSV: header ``dims,h``, then one value per line.

    The first data row holds the extents joined by ``x`` and the spacing;
    values follow in row-major order with full round-trip precision.
    """
    dims = "x".join(str(n) for n in field.grid.shape)
    lines = ["dims,h", f"{dims},{field.grid.h!r}"]
    lines.extend(repr(float(v)) for v in field.values.ravel())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_csv(path) -> ScalarField:
    """Read a field written by :func:`write_field_csv` (Neumann grid)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2 or lines[0].replace(" ", "") != "dims,h":
        raise ValueError(f"{path}: missing 'dims,h' header")
    head = lines[1].split(",")
    if len(head) != 2:
        raise ValueError(f"{path}: malformed dimension row {lines[1]!r}")
    try:
        shape = tuple(int(tok) for tok in head[0].split("x"))
        h = float(head[1])
        values = np.array([float(tok) for tok in lines[2:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    grid = Grid(shape, h)
    if values.size != grid.size:
        raise ValueError(
            f"{path}: expected {grid.size} values, found {values.size}")
    return ScalarField(grid, values.reshape(grid.shape))


# --- PGM image I/O ---------------------------------------------------------

def write_pgm(field: ScalarField, path, bits: int = 16, binary: bool = True,
              value_range: tuple[float, float] | None = None) -> None:
    """Write a field as a portable graymap (P5 by default, P2 when ascii).

    Gray levels map linearly onto ``value_range`` (default: the field's own
    min/max), which is recorded in a ``# range`` header comment together
    with the grid spacing so that :func:`read_pgm` can invert the mapping.
    One-dimensional fields are stored as single-row images.
    """
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    vals = field.values if field.grid.ndim == 2 else field.values[None, :]
    lo, hi = value_range if value_range is not None else \
        (float(field.values.min()), float(field.values.max()))
    if not (np.isfinite(lo) and np.isfinite(hi) and hi >= lo):
        raise ValueError("value range must be finite with max >= min")
    maxval = (1 << bits) - 1
    if hi > lo:
        gray = np.rint(np.clip((vals - lo) / (hi - lo), 0.0, 1.0) * maxval)
    else:
        gray = np.zeros_like(vals)
    gray = gray.astype(np.uint16 if bits == 16 else np.uint8)
    dims = "x".join(str(n) for n in field.grid.shape)
    header = (f"{'P5' if binary else 'P2'}\n"
              f"# range {lo!r} {hi!r}\n"
              f"# h {field.grid.h!r}\n"
              f"# dims {dims}\n"
              f"{vals.shape[1]} {vals.shape[0]}\n{maxval}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(gray.astype(">u2" if bits == 16 else "u1").tobytes())
        else:
            body = "\n".join(" ".join(str(int(g)) for g in row) for row in gray)
            fh.write((body + "\n").encode("ascii"))


def read_pgm(path) -> ScalarField:
    """Read a P2/P5 graymap back into a field.

    Header comments written by :func:`write_pgm` restore the value range,
    spacing, and flat (1d) layout; absent those, gray levels map onto
    ``[0, 1]`` on a unit-spaced grid.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a P2/P5 graymap")
    binary = data[:2] == b"P5"

    tokens: list[int] = []
    comments: list[str] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos + 1:end].decode("ascii", "replace").strip())
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            try:
                tokens.append(int(data[pos:end]))
            except ValueError:
                raise ValueError(f"{path}: malformed header token "
                                 f"{data[pos:end]!r}") from None
            pos = end
    width, height, maxval = tokens
    if width < 1 or height < 1 or maxval < 1 or maxval > 65535:
        raise ValueError(f"{path}: bad dimensions or depth")

    if binary:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2" if maxval > 255 else "u1")
        count = width * height
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        if raw.size != count:
            raise ValueError(f"{path}: truncated pixel data")
        gray = raw.astype(float).reshape(height, width)
    else:
        body = data[pos:].split(b"#")[0]  # comments after header are rare; drop
        flat = np.array([int(t) for t in body.split()], dtype=float)
        if flat.size != width * height:
            raise ValueError(f"{path}: expected {width * height} pixels, "
                             f"found {flat.size}")
        gray = flat.reshape(height, width)

    lo, hi, h, dims = 0.0, 1.0, 1.0, None
    for c in comments:
        parts = c.split()
        try:
            if parts[:1] == ["range"] and len(parts) == 3:
                lo, hi = float(parts[1]), float(parts[2])
            elif parts[:1] == ["h"] and len(parts) == 2:
                h = float(parts[1])
            elif parts[:1] == ["dims"] and len(parts) == 2:
                dims = tuple(int(n) for n in parts[1].split("x"))
        except ValueError:
            raise ValueError(f"{path}: malformed header comment {c!r}") from None

    values = lo + gray / maxval * (hi - lo)
    if dims is not None:
        if int(np.prod(dims)) != values.size:
            raise ValueError(f"{path}: dims comment does not match pixel count")
        values = values.reshape(dims)
    elif height == 1:
        values = values[0]
    return ScalarField(Grid(values.shape, h), values)
