# homogenization/engine/microgeom.py
"""
Periodic two-phase microstructures on the unit torus.

A microstructure is an n x n raster of the characteristic function χ of
the inclusion (1 = phase 1, 0 = phase 2 / matrix) together with the two
isotropic phase moduli. Array axis 0 is x1, axis 1 is x2; index arithmetic
wraps modulo n. Rasters approximate Lipschitz inclusions; the boundary
regularity itself is not verified.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import networkx as nx
import numpy as np

from .errors import InvalidGeometryError, RasterFormatError
from .tensor2d import IsotropicModuli, Tensor4, isotropic

logger = logging.getLogger(__name__)

EQUALITY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Microstructure:
    chi: np.ndarray
    phase1: IsotropicModuli
    phase2: IsotropicModuli

    def __post_init__(self):
        chi = np.asarray(self.chi)
        if chi.ndim != 2 or chi.shape[0] != chi.shape[1]:
            raise InvalidGeometryError(f"chi must be a square 2D raster, got shape {chi.shape}")
        if chi.shape[0] < 2:
            raise InvalidGeometryError("resolution must be at least 2")
        if not np.isin(chi, (0, 1)).all():
            raise InvalidGeometryError("chi may only contain 0 and 1")
        chi = chi.astype(np.uint8)
        chi.setflags(write=False)
        object.__setattr__(self, 'chi', chi)

    @property
    def n(self) -> int:
        return int(self.chi.shape[0])

    @property
    def volume_fraction(self) -> float:
        """θ = Σχ / n²."""
        return float(self.chi.sum()) / self.n ** 2

    def phase_tensors(self) -> Tuple[Tensor4, Tensor4]:
        return isotropic(self.phase1), isotropic(self.phase2)

    def present_phases(self) -> List[IsotropicModuli]:
        """Moduli of the phases that occupy at least one cell."""
        phases = []
        if self.chi.any():
            phases.append(self.phase1)
        if not self.chi.all():
            phases.append(self.phase2)
        return phases

    def scaled(self, factor: float) -> 'Microstructure':
        return Microstructure(self.chi, self.phase1.scaled(factor), self.phase2.scaled(factor))

    def describe(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'volume_fraction': self.volume_fraction,
            'phase1': self.phase1.to_json(),
            'phase2': self.phase2.to_json(),
        }


@dataclass(frozen=True)
class AdmissibilityReport:
    clauses: Dict[str, bool]
    matrix_connected: bool
    volume_fraction: float
    matrix_components: int = field(default=0)

    @property
    def cond_eq3(self) -> bool:
        return all(self.clauses.values())

    @property
    def admissible(self) -> bool:
        return self.cond_eq3 and self.matrix_connected

    def failures(self) -> List[str]:
        """Names of the failing hypotheses, phase conditions first."""
        failed = [name for name, ok in self.clauses.items() if not ok]
        if not self.matrix_connected:
            failed.append('matrix_connected')
        return failed

    def to_json(self) -> Dict[str, Any]:
        return {
            'cond_eq3': self.cond_eq3,
            'clauses': dict(self.clauses),
            'matrix_connected': self.matrix_connected,
            'matrix_components': self.matrix_components,
            'volume_fraction': self.volume_fraction,
            'admissible': self.admissible,
        }


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def homogeneous(n: int, phase1: IsotropicModuli, phase2: Optional[IsotropicModuli] = None) -> Microstructure:
    """chi ≡ 1; phase 2 defaults to phase 1."""
    return Microstructure(np.ones((n, n), dtype=np.uint8), phase1, phase2 or phase1)


def laminate(
    n: int,
    theta: float,
    normal_axis: int,
    phase1: IsotropicModuli,
    phase2: IsotropicModuli,
) -> Microstructure:
    """
    Slab of phase 1 of width round(θn)/n perpendicular to `normal_axis`.

    Rounding is half away from zero, so n=5, θ=0.5 gives 3 cells.
    """
    if n < 2:
        raise InvalidGeometryError(f"laminate resolution must be ≥ 2, got {n}")
    if not 0.0 <= theta <= 1.0:
        raise InvalidGeometryError(f"volume fraction must lie in [0, 1], got {theta}")
    if normal_axis not in (1, 2):
        raise InvalidGeometryError(f"normal_axis must be 1 or 2, got {normal_axis}")

    width = min(_round_half_away(theta * n), n)
    chi = np.zeros((n, n), dtype=np.uint8)
    if normal_axis == 1:
        chi[:width, :] = 1
    else:
        chi[:, :width] = 1
    m = Microstructure(chi, phase1, phase2)
    if m.volume_fraction != theta:
        logger.info(f"Laminate volume fraction rounded {theta} → {m.volume_fraction}")
    return m


def torus_distance(points: np.ndarray, center: Tuple[float, float]) -> np.ndarray:
    """Distance on the unit torus from `points` (..., 2) to `center`."""
    d = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    d -= np.round(d)
    return np.hypot(d[..., 0], d[..., 1])


def disk(
    n: int,
    radius: float,
    phase1: IsotropicModuli,
    phase2: IsotropicModuli,
    center: Tuple[float, float] = (0.5, 0.5),
) -> Microstructure:
    """Disk inclusion: chi = 1 where the cell centre lies within `radius` of `center`."""
    if not 0.0 < radius < 0.5:
        raise InvalidGeometryError(
            f"disk radius must satisfy 0 < r < 0.5 to keep the matrix connected, got {radius}"
        )
    c1, c2 = center
    if not (0.0 <= c1 < 1.0 and 0.0 <= c2 < 1.0):
        raise InvalidGeometryError(f"disk center must lie in [0,1)², got {center}")

    coords = (np.arange(n) + 0.5) / n
    points = np.stack(np.meshgrid(coords, coords, indexing='ij'), axis=-1)
    chi = (torus_distance(points, center) < radius).astype(np.uint8)
    return Microstructure(chi, phase1, phase2)


def refine(m: Microstructure, factor: int = 2) -> Microstructure:
    """
    Same geometry on a finer raster (each cell split factor x factor).

    Cells are centred on the lattice, so the refined pixel function is the
    coarse one translated by a fraction of a cell; homogenized tensors do
    not see the translation.
    """
    chi = np.kron(m.chi, np.ones((factor, factor), dtype=np.uint8))
    return Microstructure(chi, m.phase1, m.phase2)


def shift(m: Microstructure, s1: int, s2: int) -> Microstructure:
    """Cyclic translation by (s1, s2) cells."""
    return Microstructure(np.roll(m.chi, (s1, s2), axis=(0, 1)), m.phase1, m.phase2)


def rotate90(m: Microstructure) -> Microstructure:
    """
    Rotate the material by +90° about the origin of the torus.

    χ'(x) = χ(R⁻¹x) with R⁻¹(x1, x2) = (x2, −x1), exact on the lattice.
    """
    n = m.n
    i, j = np.indices((n, n))
    return Microstructure(m.chi[j, (-i) % n], m.phase1, m.phase2)


# ---------------------------------------------------------------------------
# Raster I/O (PGM P2/P5)
# ---------------------------------------------------------------------------

def _pgm_tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """Read `count` header tokens, skipping '#' comments; return tokens and data offset."""
    tokens, pos, size = [], 0, len(data)
    while len(tokens) < count:
        while pos < size and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= size:
            raise RasterFormatError("malformed PGM header: unexpected end of file")
        if data[pos:pos + 1] == b'#':
            while pos < size and data[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
            continue
        start = pos
        while pos < size and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path: Union[str, Path]) -> Tuple[np.ndarray, int]:
    """Pixel array and maxval of a P2 or P5 PGM file."""
    data = Path(path).read_bytes()
    tokens, pos = _pgm_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b'P2', b'P5'):
        raise RasterFormatError(f"malformed PGM header: unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as e:
        raise RasterFormatError(f"malformed PGM header: {e}") from e
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise RasterFormatError(f"malformed PGM header: {width}x{height}, maxval {maxval}")

    if magic == b'P2':
        try:
            values = [int(t) for t in data[pos:].split()]
        except ValueError as e:
            raise RasterFormatError(f"malformed PGM data: {e}") from e
        if len(values) != width * height:
            raise RasterFormatError(f"expected {width * height} pixels, found {len(values)}")
        pixels = np.array(values, dtype=np.int64).reshape(height, width)
    else:
        dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
        raw = data[pos + 1:]
        expected = width * height * dtype.itemsize
        if len(raw) < expected:
            raise RasterFormatError(f"truncated PGM data: {len(raw)} of {expected} bytes")
        pixels = np.frombuffer(raw[:expected], dtype=dtype).reshape(height, width).astype(np.int64)

    if (pixels > maxval).any() or (pixels < 0).any():
        raise RasterFormatError("pixel values outside [0, maxval]")
    return pixels, maxval


def write_pgm(path: Union[str, Path], pixels: np.ndarray, maxval: int, binary: bool = False):
    pixels = np.asarray(pixels, dtype=np.int64)
    height, width = pixels.shape
    header = f"{'P5' if binary else 'P2'}\n{width} {height}\n{maxval}\n".encode('ascii')
    if binary:
        dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
        body = pixels.astype(dtype).tobytes()
    else:
        body = ''.join(' '.join(str(v) for v in row) + '\n' for row in pixels).encode('ascii')
    Path(path).write_bytes(header + body)


def from_raster(path: Union[str, Path], phase1: IsotropicModuli, phase2: IsotropicModuli) -> Microstructure:
    """
    Load χ from a PGM image: pixel 0 → phase 2, pixel maxval → phase 1.

    Raises:
        RasterFormatError: non-square image, intermediate gray values,
            malformed header.
    """
    pixels, maxval = read_pgm(path)
    if pixels.shape[0] != pixels.shape[1]:
        raise RasterFormatError(f"raster must be square, got {pixels.shape[1]}x{pixels.shape[0]}")
    gray = (pixels != 0) & (pixels != maxval)
    if gray.any():
        r, c = np.argwhere(gray)[0]
        raise RasterFormatError(
            f"ambiguous phase: pixel ({r}, {c}) has value {pixels[r, c]} (maxval {maxval})"
        )
    logger.info(f"📋 Loaded raster {Path(path).name}: {pixels.shape[0]}x{pixels.shape[0]}")
    return Microstructure((pixels == maxval).astype(np.uint8), phase1, phase2)


def to_raster(m: Microstructure, path: Union[str, Path], binary: bool = False, maxval: int = 1):
    write_pgm(path, m.chi.astype(np.int64) * maxval, maxval, binary=binary)


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------

def matrix_components(chi: np.ndarray) -> int:
    """Number of 4-connected components of {chi = 0} on the torus."""
    n = chi.shape[0]
    graph = nx.grid_2d_graph(n, n, periodic=True)
    matrix = [node for node in graph.nodes if chi[node] == 0]
    return nx.number_connected_components(graph.subgraph(matrix)) if matrix else 0


def check_admissibility(m: Microstructure) -> AdmissibilityReport:
    """
    Evaluate the phase conditions 0 < μ1 = −(λ2+μ2) < μ2, K1 > 0 and the
    connectivity of the matrix {χ = 0} (4-adjacency, periodic wrap).
    """
    p1, p2 = m.phase1, m.phase2
    scale = max(abs(p1.mu), abs(p2.lam), abs(p2.mu), np.finfo(float).tiny)
    clauses = {
        'mu1_positive': p1.mu > 0,
        'mu1_equals_minus_K2': abs(p1.mu + p2.bulk) <= EQUALITY_RTOL * scale,
        'mu1_below_mu2': p1.mu < p2.mu,
        'K1_positive': p1.bulk > 0,
    }
    components = matrix_components(m.chi)
    return AdmissibilityReport(
        clauses={k: bool(v) for k, v in clauses.items()},
        matrix_connected=components == 1,
        volume_fraction=m.volume_fraction,
        matrix_components=components,
    )


# ---------------------------------------------------------------------------
# Descriptor
# ---------------------------------------------------------------------------

def from_descriptor(descriptor: Dict[str, Any], base_dir: Union[str, Path, None] = None) -> Microstructure:
    """
    Build a microstructure from its JSON descriptor:
    {"n", "generator": {"kind": "laminate"|"disk"|"raster"|"homogeneous", ...},
     "phase1": {"lambda", "mu"}, "phase2": {"lambda", "mu"}}.
    """
    phase1 = IsotropicModuli.from_json(descriptor['phase1'])
    phase2 = IsotropicModuli.from_json(descriptor['phase2'])
    generator = dict(descriptor['generator'])
    kind = generator.pop('kind')
    n = descriptor.get('n')
    if n is None and kind != 'raster':
        raise InvalidGeometryError(f"generator '{kind}' needs a resolution n")

    if kind == 'laminate':
        return laminate(n, generator['theta'], generator.get('normal_axis', 1), phase1, phase2)
    if kind == 'disk':
        center = tuple(generator.get('center', (0.5, 0.5)))
        return disk(n, generator['radius'], phase1, phase2, center=center)
    if kind == 'homogeneous':
        return homogeneous(n, phase1, phase2)
    if kind == 'raster':
        path = Path(generator['path'])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        m = from_raster(path, phase1, phase2)
        if n is not None and m.n != n:
            raise RasterFormatError(f"raster is {m.n}x{m.n} but descriptor says n={n}")
        return m
    raise InvalidGeometryError(f"unknown generator kind '{kind}'")
