"""Structured grids, dense differential forms and 4th-order exterior calculus.

Forms are stored component-first: a q-form on an n-dimensional grid keeps an
array of shape ``(C(n, q), *node_shape)``; a matrix-valued form appends two
trailing axes ``(m, m)``.  Components are ordered by increasing multi-index
``i1 < ... < iq`` (0-based), i.e. ``itertools.combinations(range(n), q)``.
"""
from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

TORUS = "torus"
TORUS_INTERVAL = "torus×interval"
_TOPOLOGY_ALIASES = {
    "torus": TORUS,
    "torus×interval": TORUS_INTERVAL,
    "torus-interval": TORUS_INTERVAL,
    "torus_x_interval": TORUS_INTERVAL,
    "torusxinterval": TORUS_INTERVAL,
}


class GridError(ValueError):
    pass


class FormDegreeError(ValueError):
    pass


@dataclass(frozen=True)
class GridManifold:
    """Uniform structured grid on a flat torus, optionally with one interval axis.

    Periodic axis ``i`` has nodes ``x = j * L_i / N_i``; the interval axis has
    ``N`` nodes spanning ``[0, 1]`` inclusive.
    """

    node_counts: tuple[int, ...]
    periods: tuple[float, ...]
    orientation: int = 1
    interval_axis: int | None = None

    def __post_init__(self):
        if len(self.node_counts) != len(self.periods):
            raise GridError("node_counts and periods differ in length")
        if len(self.node_counts) < 1:
            raise GridError("dimension must be >= 1")
        if any(int(n) < 4 for n in self.node_counts):
            raise GridError(f"every axis needs at least 4 nodes, got {list(self.node_counts)}")
        if self.orientation not in (1, -1):
            raise GridError("orientation must be +1 or -1")
        for axis, length in enumerate(self.periods):
            if axis != self.interval_axis and not length > 0:
                raise GridError(f"period of axis {axis} must be positive")
        if self.interval_axis is not None:
            if not 0 <= self.interval_axis < self.dim:
                raise GridError("interval axis out of range")
            if self.node_counts[self.interval_axis] < 5:
                raise GridError("interval axis needs at least 5 nodes for one-sided stencils")

    @property
    def dim(self) -> int:
        return len(self.node_counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.node_counts)

    @property
    def topology(self) -> str:
        return TORUS if self.interval_axis is None else TORUS_INTERVAL

    def is_periodic(self, axis: int) -> bool:
        return axis != self.interval_axis

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            self.periods[i] / self.node_counts[i] if self.is_periodic(i) else 1.0 / (self.node_counts[i] - 1)
            for i in range(self.dim)
        )

    def axis_coords(self, axis: int) -> np.ndarray:
        n = self.node_counts[axis]
        if self.is_periodic(axis):
            return np.arange(n) * (self.periods[axis] / n)
        return np.linspace(0.0, 1.0, n)

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, dim)``."""
        axes = np.meshgrid(*[self.axis_coords(i) for i in range(self.dim)], indexing="ij")
        return np.stack(axes, axis=-1)

    def points(self) -> np.ndarray:
        """Node coordinates flattened to ``(num_nodes, dim)`` in C order."""
        return self.mesh().reshape(-1, self.dim)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def with_orientation(self, sign: int) -> "GridManifold":
        return GridManifold(self.node_counts, self.periods, sign, self.interval_axis)

    def refined(self, factor: int = 2) -> "GridManifold":
        counts = tuple(
            n * factor if self.is_periodic(i) else (n - 1) * factor + 1 for i, n in enumerate(self.node_counts)
        )
        return GridManifold(counts, self.periods, self.orientation, self.interval_axis)

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "node_counts": list(self.shape),
            "periods": [float(p) for p in self.periods],
            "orientation": self.orientation,
            "topology": self.topology,
            "interval_axis": self.interval_axis,
        }


def build_grid(dim, node_counts, periods, orientation=1, topology=TORUS, interval_axis=None) -> GridManifold:
    """Construct a :class:`GridManifold`.

    For ``torus×interval`` the interval axis defaults to the last one and its
    period entry is ignored (the interval is always ``[0, 1]``).
    """
    if isinstance(node_counts, int):
        node_counts = [node_counts] * dim
    if isinstance(periods, (int, float)):
        periods = [periods] * dim
    node_counts = [int(n) for n in node_counts]
    periods = [1.0 if p is None else float(p) for p in periods]
    if len(node_counts) != dim or len(periods) != dim:
        raise GridError(f"expected {dim} node counts and periods")
    kind = _TOPOLOGY_ALIASES.get(str(topology).lower())
    if kind is None:
        raise GridError(f"unknown topology {topology!r}")
    if kind == TORUS:
        if interval_axis is not None:
            raise GridError("a torus has no interval axis")
        return GridManifold(tuple(node_counts), tuple(periods), int(orientation), None)
    if isinstance(interval_axis, (list, tuple)):
        if len(interval_axis) != 1:
            raise GridError("torus×interval admits exactly one interval axis")
        interval_axis = interval_axis[0]
    axis = dim - 1 if interval_axis is None else int(interval_axis)
    periods[axis] = 1.0
    return GridManifold(tuple(node_counts), tuple(periods), int(orientation), axis)


# -- multi-index bookkeeping -------------------------------------------------


@lru_cache(maxsize=None)
def multi_indices(n: int, q: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(n), q))


@lru_cache(maxsize=None)
def _index_of(n: int, q: int) -> dict:
    return {idx: k for k, idx in enumerate(multi_indices(n, q))}


def component_index(n: int, idx: Sequence[int]) -> int:
    return _index_of(n, len(idx))[tuple(idx)]


@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int):
    """Entries ``(k_out, i_left, i_right, sign)`` of the graded product table."""
    out = _index_of(n, p + q)
    table = []
    for a, left in enumerate(multi_indices(n, p)):
        for b, right in enumerate(multi_indices(n, q)):
            if set(left) & set(right):
                continue
            merged = left + right
            # parity of the sorting permutation = number of inversions
            inversions = sum(1 for i in range(len(merged)) for j in range(i + 1, len(merged)) if merged[i] > merged[j])
            table.append((out[tuple(sorted(merged))], a, b, -1 if inversions % 2 else 1))
    return tuple(table)


@lru_cache(maxsize=None)
def _d_table(n: int, q: int):
    """For each (q+1)-index K: list of (axis, component of K minus axis, sign)."""
    src = _index_of(n, q)
    rows = []
    for big in multi_indices(n, q + 1):
        terms = []
        for j, axis in enumerate(big):
            rest = big[:j] + big[j + 1 :]
            terms.append((axis, src[rest], -1 if j % 2 else 1))
        rows.append(tuple(terms))
    return tuple(rows)


# -- forms --------------------------------------------------------------------


def _frozen(arr) -> np.ndarray:
    view = np.asarray(arr, dtype=float).view()
    view.setflags(write=False)
    return view


@dataclass(frozen=True, eq=False)
class FormField:
    """Real-valued q-form sampled at every node."""

    base: GridManifold
    degree: int
    data: np.ndarray = field(repr=False)

    matrix_valued = False

    def __post_init__(self):
        n = self.base.dim
        if not 0 <= self.degree <= n:
            raise FormDegreeError(f"degree {self.degree} not in [0, {n}]")
        expected = (len(multi_indices(n, self.degree)), *self.base.shape) + self._slot_shape()
        data = _frozen(self.data)
        if data.shape != expected:
            raise ValueError(f"component array has shape {data.shape}, expected {expected}")
        object.__setattr__(self, "data", data)

    def _slot_shape(self) -> tuple[int, ...]:
        return ()

    @classmethod
    def zeros(cls, base: GridManifold, degree: int, *slot) -> "FormField":
        comps = len(multi_indices(base.dim, degree))
        return cls(base, degree, np.zeros((comps, *base.shape, *slot)))

    def component(self, idx: Sequence[int]) -> np.ndarray:
        return self.data[component_index(self.base.dim, idx)]

    def _like(self, data) -> "FormField":
        return type(self)(self.base, self.degree, data)

    def _check_compatible(self, other):
        if not isinstance(other, FormField) or other.base != self.base or other.degree != self.degree:
            raise ValueError("forms live on different grids or have different degrees")
        if other.matrix_valued != self.matrix_valued:
            raise ValueError("cannot add scalar and matrix-valued forms")

    def __add__(self, other):
        self._check_compatible(other)
        return self._like(self.data + other.data)

    def __sub__(self, other):
        self._check_compatible(other)
        return self._like(self.data - other.data)

    def __neg__(self):
        return self._like(-self.data)

    def __mul__(self, scalar):
        return self._like(self.data * float(scalar))

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


@dataclass(frozen=True, eq=False)
class MatrixFormField(FormField):
    """Form with values in ``m x m`` matrices (connection and curvature forms)."""

    matrix_valued = True

    def _slot_shape(self) -> tuple[int, ...]:
        return tuple(np.shape(self.data)[-2:])

    def __post_init__(self):
        if np.ndim(self.data) < 3 or np.shape(self.data)[-1] != np.shape(self.data)[-2]:
            raise ValueError("matrix form needs trailing square (m, m) axes")
        super().__post_init__()

    @property
    def matrix_size(self) -> int:
        return self.data.shape[-1]


def scalar_form(base: GridManifold, degree: int, components: dict) -> FormField:
    """Build a scalar form from ``{multi-index: nodal array or constant}``."""
    out = np.zeros((len(multi_indices(base.dim, degree)), *base.shape))
    for idx, values in components.items():
        out[component_index(base.dim, idx)] = values
    return FormField(base, degree, out)


def function(base: GridManifold, values) -> FormField:
    return FormField(base, 0, np.asarray(values, dtype=float)[None, ...])


# -- differentiation ---------------------------------------------------------

_ONE_SIDED_0 = (-25.0, 48.0, -36.0, 16.0, -3.0)
_ONE_SIDED_1 = (-3.0, -10.0, 18.0, -6.0, 1.0)


def _diff_array(arr: np.ndarray, data_axis: int, h: float, periodic: bool) -> np.ndarray:
    # written as differences so that constants differentiate to exactly zero
    if periodic:
        def shift(k):
            return np.roll(arr, -k, axis=data_axis)

        out = (shift(-2) - shift(2)) + 8.0 * (shift(1) - shift(-1))
        return out / (12.0 * h)
    a = np.moveaxis(arr, data_axis, 0)
    n = a.shape[0]
    out = np.empty_like(a)
    out[2 : n - 2] = ((a[:-4] - a[4:]) + 8.0 * (a[3:-1] - a[1:-3])) / 12.0
    out[0] = sum(w * (a[j] - a[0]) for j, w in enumerate(_ONE_SIDED_0) if j) / 12.0
    out[1] = sum(w * (a[j] - a[1]) for j, w in enumerate(_ONE_SIDED_1) if j != 1) / 12.0
    out[n - 1] = -sum(w * (a[n - 1 - j] - a[n - 1]) for j, w in enumerate(_ONE_SIDED_0) if j) / 12.0
    out[n - 2] = -sum(w * (a[n - 1 - j] - a[n - 2]) for j, w in enumerate(_ONE_SIDED_1) if j != 1) / 12.0
    return np.moveaxis(out / h, 0, data_axis)


def nodal_derivative(values: np.ndarray, base: GridManifold, axis: int, lead: int = 0) -> np.ndarray:
    """4th-order derivative of a nodal array whose grid axes start at ``lead``."""
    if not 0 <= axis < base.dim:
        raise ValueError(f"axis {axis} out of range for a {base.dim}-dimensional grid")
    return _diff_array(np.asarray(values, dtype=float), lead + axis, base.spacing[axis], base.is_periodic(axis))


def partial_derivative(f: FormField, axis: int) -> FormField:
    """Componentwise ∂/∂x^axis with the 4th-order stencils of the grid."""
    return f._like(nodal_derivative(f.data, f.base, axis, lead=1))


def exterior_derivative(alpha: FormField) -> FormField:
    n = alpha.base.dim
    q = alpha.degree
    if q >= n:
        raise FormDegreeError("top-degree form")
    partials = {}

    def partial(axis, comp):
        key = (axis, comp)
        if key not in partials:
            partials[key] = nodal_derivative(alpha.data[comp], alpha.base, axis)
        return partials[key]

    rows = _d_table(n, q)
    out = np.zeros((len(rows), *alpha.data.shape[1:]))
    for k, terms in enumerate(rows):
        for axis, comp, sign in terms:
            if sign > 0:
                out[k] += partial(axis, comp)
            else:
                out[k] -= partial(axis, comp)
    return type(alpha)(alpha.base, q + 1, out)


def wedge(alpha: FormField, beta: FormField) -> FormField:
    """Graded pointwise product; matrix slots are multiplied in order."""
    if alpha.base != beta.base:
        raise ValueError("forms live on different grids")
    n = alpha.base.dim
    p, q = alpha.degree, beta.degree
    if p + q > n:
        raise FormDegreeError(f"wedge degree {p}+{q} exceeds dimension {n}")
    a, b = alpha.data, beta.data
    if alpha.matrix_valued and beta.matrix_valued:
        slot = (a.shape[-2], b.shape[-1])

        def prod(x, y):
            return np.matmul(x, y)

        cls = MatrixFormField
    elif alpha.matrix_valued:
        slot = a.shape[-2:]

        def prod(x, y):
            return x * y[..., None, None]

        cls = MatrixFormField
    elif beta.matrix_valued:
        slot = b.shape[-2:]

        def prod(x, y):
            return x[..., None, None] * y

        cls = MatrixFormField
    else:
        slot = ()

        def prod(x, y):
            return x * y

        cls = FormField
    out = np.zeros((len(multi_indices(n, p + q)), *alpha.base.shape, *slot))
    for k, i, j, sign in _wedge_table(n, p, q):
        term = prod(a[i], b[j])
        if sign > 0:
            out[k] += term
        else:
            out[k] -= term
    return cls(alpha.base, p + q, out)


def trace(A: MatrixFormField) -> FormField:
    return FormField(A.base, A.degree, np.trace(A.data, axis1=-2, axis2=-1))


# -- integration -------------------------------------------------------------


def pairwise_sum(values: np.ndarray) -> float:
    """Sum with a fixed binary reduction tree (independent of threading)."""
    v = np.ascontiguousarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.concatenate([v, [0.0]])
        v = v[0::2] + v[1::2]
    return float(v[0])


# composite rule of 4th order with corrected end weights (needs >= 8 nodes)
_END_WEIGHTS = np.array([17.0, 59.0, 43.0, 49.0]) / 48.0


def axis_weights(base: GridManifold, axis: int) -> np.ndarray:
    n = base.node_counts[axis]
    h = base.spacing[axis]
    if base.is_periodic(axis):
        return np.full(n, h)
    w = np.ones(n)
    if n >= 8:
        w[:4] = _END_WEIGHTS
        w[-4:] = _END_WEIGHTS[::-1]
    else:
        w[0] = w[-1] = 0.5
    return w * h


def quadrature_weights(base: GridManifold) -> np.ndarray:
    w = np.ones(base.shape)
    for axis in range(base.dim):
        shape = [1] * base.dim
        shape[axis] = -1
        w = w * axis_weights(base, axis).reshape(shape)
    return w


def integrate_nodal(values: np.ndarray, base: GridManifold) -> float:
    """Quadrature of a nodal density (no orientation sign)."""
    return pairwise_sum(np.asarray(values, dtype=float) * quadrature_weights(base))


def integrate_top(alpha: FormField, orientation: int | None = None) -> float:
    """Integrate an n-form over the grid, signed by the orientation.

    ``orientation`` overrides the grid's own sign when given.
    """
    if alpha.matrix_valued:
        raise FormDegreeError("cannot integrate a matrix-valued form")
    if alpha.degree != alpha.base.dim:
        raise FormDegreeError(f"integrate_top needs a {alpha.base.dim}-form, got degree {alpha.degree}")
    sign = alpha.base.orientation if orientation is None else int(orientation)
    return sign * integrate_nodal(alpha.data[0], alpha.base)


# -- binary dumps --------------------------------------------------------------

_MAGIC = b"GAFD"


def dump_form(form: FormField, path) -> None:
    """Write ``form`` as little-endian float64 with a small header."""
    base = form.base
    m = form.data.shape[-1] if form.matrix_valued else 0
    header = struct.pack("<4sIII", _MAGIC, base.dim, form.degree, m)
    header += struct.pack(f"<{base.dim}I", *base.shape)
    header += struct.pack(f"<{base.dim}d", *base.periods)
    header += struct.pack("<ii", base.orientation, -1 if base.interval_axis is None else base.interval_axis)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(form.data, dtype="<f8").tobytes())


def load_form(path) -> FormField:
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, dim, degree, m = struct.unpack_from("<4sIII", blob, 0)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a form dump")
    off = struct.calcsize("<4sIII")
    shape = struct.unpack_from(f"<{dim}I", blob, off)
    off += struct.calcsize(f"<{dim}I")
    periods = struct.unpack_from(f"<{dim}d", blob, off)
    off += struct.calcsize(f"<{dim}d")
    orientation, interval = struct.unpack_from("<ii", blob, off)
    off += struct.calcsize("<ii")
    base = GridManifold(tuple(shape), tuple(periods), orientation, None if interval < 0 else interval)
    comps = len(multi_indices(dim, degree))
    slot = (m, m) if m else ()
    data = np.frombuffer(blob, dtype="<f8", offset=off).reshape((comps, *shape, *slot))
    cls = MatrixFormField if m else FormField
    return cls(base, degree, data.astype(float))
