"""Pixel microstructures: reading, writing and synthetic generation.

Grids are stored row-major with y as the outer (row) index and the origin at
the top-left pixel, matching image conventions.
"""
from dataclasses import dataclass, field

import numpy as np

from .material import MaterialParams

PGM_THRESHOLD = 128


class MicrostructureError(ValueError):
    pass


class MalformedHeaderError(MicrostructureError):
    pass


class DimensionMismatchError(MicrostructureError):
    pass


class UnknownPhaseError(MicrostructureError):
    pass


@dataclass(frozen=True)
class PhaseGrid:
    """Periodic 2-D map of phase ids, shape ``(ny, nx)``."""

    phases: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.phases, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DimensionMismatchError(f"phase grid must be a non-empty 2-D array, got shape {a.shape}")
        object.__setattr__(self, "phases", a)

    @property
    def ny(self):
        return self.phases.shape[0]

    @property
    def nx(self):
        return self.phases.shape[1]

    @property
    def shape(self):
        return self.phases.shape

    def fraction(self, phase=1):
        return np.count_nonzero(self.phases == phase) / self.phases.size

    def crop(self, nx, ny=None):
        """Top-left ``ny x nx`` section."""
        ny = nx if ny is None else ny
        if nx > self.nx or ny > self.ny:
            raise DimensionMismatchError(f"cannot crop {ny}x{nx} from {self.ny}x{self.nx}")
        return PhaseGrid(self.phases[:ny, :nx].copy())

    def __eq__(self, other):
        return isinstance(other, PhaseGrid) and np.array_equal(self.phases, other.phases)


@dataclass
class PhaseCatalog:
    """Material parameters and labels per phase id."""

    params: dict
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.params:
            raise MicrostructureError("phase catalog is empty")

    def check(self, grid):
        missing = sorted(set(np.unique(grid.phases).tolist()) - set(self.params))
        if missing:
            raise UnknownPhaseError(f"phase ids {missing} have no catalog entry")

    def per_pixel(self, grid):
        """Flat per-pixel :class:`MaterialParams` for ``grid``."""
        self.check(grid)
        ids = sorted(self.params)
        lookup = np.searchsorted(ids, grid.phases.ravel())
        return MaterialParams.per_point([self.params[i] for i in ids], lookup)


def _tokens(text):
    return text.split()


def load_grid(source, format="ascii-grid"):
    """Read a phase grid from a byte stream (or bytes/str).

    ``ascii-grid``: header ``nx ny`` then ``ny`` rows of ``nx`` integers.
    ``pgm``: ASCII (P2) or binary (P5) graymap; pixels ``>= 128`` become
    phase 1, the rest phase 0.
    """
    data = source if isinstance(source, (bytes, str)) else source.read()
    if isinstance(data, str):
        data = data.encode()
    if format == "ascii-grid":
        return _load_ascii(data)
    if format == "pgm":
        return _load_pgm(data)
    raise MicrostructureError(f"unknown grid format {format!r}")


def _load_ascii(data):
    lines = data.decode().splitlines()
    try:
        nx, ny = (int(v) for v in lines[0].split())
    except (IndexError, ValueError):
        raise MalformedHeaderError("ascii-grid header must be 'nx ny'") from None
    if nx < 1 or ny < 1:
        raise MalformedHeaderError(f"invalid dimensions {nx} x {ny}")
    rows = [ln.split() for ln in lines[1:] if ln.strip()]
    if len(rows) != ny or any(len(r) != nx for r in rows):
        raise DimensionMismatchError(f"expected {ny} rows of {nx} values")
    try:
        phases = np.array(rows, dtype=np.int64)
    except ValueError:
        raise UnknownPhaseError("phase ids must be integers") from None
    if np.any(phases < 0):
        raise UnknownPhaseError("phase ids must be non-negative")
    return PhaseGrid(phases)


def _pgm_header(data):
    # magic, width, height, maxval separated by whitespace and '#' comments
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedHeaderError("truncated PGM header")
        fields.append(data[start:pos])
    return fields, pos + 1


def _load_pgm(data):
    fields, offset = _pgm_header(data)
    magic = fields[0]
    if magic not in (b"P2", b"P5"):
        raise MalformedHeaderError(f"unsupported PGM magic {magic!r}")
    try:
        nx, ny, maxval = (int(v) for v in fields[1:])
    except ValueError:
        raise MalformedHeaderError("non-integer PGM header field") from None
    if nx < 1 or ny < 1 or not 0 < maxval < 65536:
        raise MalformedHeaderError("invalid PGM dimensions or maxval")
    if magic == b"P2":
        values = np.array(data[offset:].split(), dtype=np.int64)
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        values = np.frombuffer(data, dtype=dtype, offset=offset, count=-1)
    if values.size != nx * ny:
        raise DimensionMismatchError(f"expected {nx * ny} pixels, found {values.size}")
    return PhaseGrid((values.reshape(ny, nx) >= PGM_THRESHOLD).astype(np.int64))


def emit_grid(grid):
    """Serialise ``grid`` in ascii-grid form."""
    lines = [f"{grid.nx} {grid.ny}"]
    lines += [" ".join(str(v) for v in row) for row in grid.phases]
    return "\n".join(lines) + "\n"


def emit_pgm(grid, binary=True):
    """Serialise a two-phase grid as a PGM (phase 1 white)."""
    pix = np.where(grid.phases > 0, 255, 0).astype(np.uint8)
    if binary:
        return f"P5\n{grid.nx} {grid.ny}\n255\n".encode() + pix.tobytes()
    body = "\n".join(" ".join(str(v) for v in row) for row in pix)
    return f"P2\n{grid.nx} {grid.ny}\n255\n{body}\n".encode()


def synth_inclusion(nx, ny, volume_fraction, shape="disc"):
    """Centered inclusion of phase 1 with ``round(vf * nx * ny)`` pixels.

    Pixels are ranked by distance to the grid center (Euclidean for a disc,
    Chebyshev for a square; ties broken by flat index) and the nearest ones
    become phase 1, so the count is the closest achievable to the target.
    """
    if not 0.0 <= volume_fraction <= 1.0:
        raise ValueError("volume_fraction must lie in [0, 1]")
    y, x = np.mgrid[0:ny, 0:nx]
    dx = x - (nx - 1) / 2.0
    dy = y - (ny - 1) / 2.0
    if shape == "disc":
        dist = np.hypot(dx, dy)
    elif shape == "square":
        dist = np.maximum(np.abs(dx), np.abs(dy))
    else:
        raise ValueError(f"unknown inclusion shape {shape!r}")
    count = int(round(volume_fraction * nx * ny))
    order = np.argsort(dist.ravel(), kind="stable")
    phases = np.zeros(nx * ny, dtype=np.int64)
    phases[order[:count]] = 1
    return PhaseGrid(phases.reshape(ny, nx))
