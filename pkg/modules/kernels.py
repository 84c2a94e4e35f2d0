"""
Módulo de núcleos
Mollifier ψ_α, núcleos de bola y de cono recortado, densidades de nudos,
rasterizado, extracción de subniveles y funcionales de volumen
"""

import math
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from modules.config import DEFAULT_ALPHA
from modules.errors import FormatError, GridMismatchError, MeshIOError, ValidationError
from modules.solids import ScalarField, UniformGrid

logger = logging.getLogger(__name__)

KNOT_CSV_HEADER = "x,y,z,r,c"


@dataclass(frozen=True)
class MollifierParams:
    """Exponente α del mollifier (math.inf = indicatriz)"""

    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValidationError(f"alpha debe ser > 0: {self.alpha}")

    @property
    def sharp(self) -> bool:
        return math.isinf(self.alpha)


def mollifier(x, p: MollifierParams = MollifierParams()):
    """
    ψ_α(x) = exp((1 − |x|^−α)^−1) en 0 < |x| < 1, 1 en 0 y 0 fuera

    Acepta escalares o arrays.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    inside = ax < 1.0
    if p.sharp:
        out = inside.astype(float)
    else:
        out = np.zeros_like(ax)
        interior = inside & (ax > 0)
        with np.errstate(over="ignore", divide="ignore"):
            out[interior] = np.exp(1.0 / (1.0 - ax[interior] ** (-p.alpha)))
        out[ax == 0] = 1.0
    if out.ndim == 0:
        return float(out)
    return out


def ball_bump(x, center, radius: float, p: MollifierParams = MollifierParams()):
    """ψ_α(‖x − center‖ / radius)"""
    if radius <= 0:
        raise ValidationError(f"El radio debe ser > 0: {radius}")
    diff = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    return mollifier(np.linalg.norm(diff, axis=-1) / radius, p)


def cone_bump(a, apex, L: float, p: MollifierParams = MollifierParams()):
    """
    Cono recortado hacia abajo de altura L bajo el ápice

    Con (x', r') = a − apex: ψ_α(‖x'‖/r')·ψ_α(1 + 2r'/L) si r' < 0, y 0 si r' ≥ 0.
    """
    if L <= 0:
        raise ValidationError(f"La altura del cono debe ser > 0: {L}")
    diff = np.asarray(a, dtype=float) - np.asarray(apex, dtype=float)
    spatial = np.linalg.norm(diff[..., :3], axis=-1)
    level = diff[..., 3]
    below = level < 0
    safe_level = np.where(below, level, -1.0)
    value = mollifier(spatial / safe_level, p) * mollifier(1.0 + 2.0 * safe_level / L, p)
    value = np.where(below, value, 0.0)
    if np.ndim(value) == 0:
        return float(value)
    return value


# === CONJUNTOS DE NUDOS ===

@dataclass(frozen=True, eq=False)
class KnotSet3:
    """Centros de bolas de radio común con pesos (densidad ρ_P)"""

    points: np.ndarray
    radius: float
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValidationError("Los centros deben ser finitos")
        if not (self.radius > 0):
            raise ValidationError(f"El radio común debe ser > 0: {self.radius}")
        weights = _weights(self.weights, len(points))
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def centers(self) -> np.ndarray:
        return self.points

    @property
    def radii(self) -> np.ndarray:
        return np.full(len(self.points), self.radius)


@dataclass(frozen=True, eq=False)
class KnotSet4:
    """Pares (centro, radio) con pesos y altura de recorte L (densidad ρ_A)"""

    centers: np.ndarray
    radii: np.ndarray
    weights: Optional[np.ndarray] = None
    L: float = 1.0
    mirrored: bool = False

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, 3)
        radii = np.array(self.radii, dtype=float).ravel()
        if len(radii) != len(centers):
            raise ValidationError(f"{len(centers)} centros y {len(radii)} radios")
        if not (np.all(np.isfinite(centers)) and np.all(np.isfinite(radii))):
            raise ValidationError("Los nudos deben ser finitos")
        if not (self.L > 0):
            raise ValidationError(f"La altura de recorte debe ser > 0: {self.L}")
        # r = 0 sólo aparece en nodos situados sobre la frontera
        if np.any(radii < 0) or np.any(radii >= self.L):
            raise ValidationError(f"Los radios deben cumplir 0 ≤ r < L={self.L}")
        weights = _weights(self.weights, len(centers))
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "L", float(self.L))

    def __len__(self) -> int:
        return len(self.centers)

    def knots(self) -> np.ndarray:
        """Array (n, 4) de nudos (x, y, z, r) con el signo de r según el espejo"""
        sign = -1.0 if self.mirrored else 1.0
        return np.column_stack([self.centers, sign * self.radii])

    def subset(self, indices: Sequence[int]) -> "KnotSet4":
        indices = np.asarray(indices, dtype=np.int64)
        return KnotSet4(self.centers[indices], self.radii[indices],
                        self.weights[indices], self.L, self.mirrored)


def _weights(weights: Optional[np.ndarray], count: int) -> np.ndarray:
    if weights is None:
        out = np.ones(count)
    else:
        out = np.array(weights, dtype=float).ravel()
        if len(out) != count:
            raise ValidationError(f"Se esperaban {count} pesos, hay {len(out)}")
        if np.any(out <= 0) or not np.all(np.isfinite(out)):
            raise ValidationError("Los pesos deben ser > 0")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class OccupancyBitmap:
    """Un bit por nodo: subnivel estricto de un campo"""

    grid: UniformGrid
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.size != self.grid.m:
            raise ValidationError(f"{bits.size} bits para {self.grid.m} nodos")
        if bits.shape != self.grid.shape:
            bits = bits.reshape(self.grid.shape, order="F")
        object.__setattr__(self, "bits", bits)

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


# === RASTERIZADO ===

def rasterize_balls(centers: np.ndarray, radii: np.ndarray, weights: np.ndarray,
                    g: UniformGrid, p: MollifierParams = MollifierParams()) -> ScalarField:
    """
    Σ_i w_i·ψ_α(‖x − c_i‖/r_i) sobre los nodos de una malla 3D

    Cada bola sólo se evalúa en la ventana de nodos que la contiene.
    """
    if g.dim != 3:
        raise ValidationError("rasterize_balls requiere una malla 3D")
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (len(centers),))
    values = np.zeros(g.shape)
    axis = g.axis_coords()
    clipped = 0

    for c, r, w in zip(centers, radii, weights):
        if r <= 0:
            continue
        if np.any(c - r < axis[0]) or np.any(c + r > axis[-1]):
            clipped += 1
        windows = [g.index_window(c[k] - r, c[k] + r) for k in range(3)]
        if any(i0 >= i1 for i0, i1 in windows):
            continue
        xs, ys, zs = [axis[i0:i1] - c[k] for k, (i0, i1) in enumerate(windows)]
        dist = np.sqrt(xs[:, None, None] ** 2 + ys[None, :, None] ** 2 + zs[None, None, :] ** 2)
        (x0, x1), (y0, y1), (z0, z1) = windows
        values[x0:x1, y0:y1, z0:z1] += w * mollifier(dist / r, p)

    if clipped:
        logger.warning(f"⚠️ {clipped} bolas sobresalen de la malla: soporte recortado")
    return ScalarField(g, values)


def rasterize_bumps3(k: KnotSet3, g: UniformGrid, p: MollifierParams = MollifierParams()) -> ScalarField:
    """Campo ρ_P ∗ f_{B0} evaluado en cascada sobre la malla"""
    return rasterize_balls(k.points, k.radius, k.weights, g, p)


def rasterize_bumps4(k: KnotSet4, g: UniformGrid, p: MollifierParams = MollifierParams()) -> ScalarField:
    """
    Campo 4D Σ_i c_i·cone_bump(·, (x_i, ±r_i), L) sobre una malla 4D

    Args:
        k: Nudos 4D (el espejo invierte el signo de r)
        g: Malla 4D
        p: Parámetros del mollifier

    Returns:
        ScalarField 4D
    """
    if g.dim != 4:
        raise ValidationError("rasterize_bumps4 requiere una malla 4D")
    values = np.zeros(g.shape)
    axis = g.axis_coords()
    apexes = k.knots()
    clipped = 0

    # El espejo refleja cada cono: abre hacia arriba desde (x_i, −r_i)
    orientation = -1.0 if k.mirrored else 1.0

    for apex, w in zip(apexes, k.weights):
        r_low, r_high = (apex[3], apex[3] + k.L) if k.mirrored else (apex[3] - k.L, apex[3])
        lower = np.append(apex[:3] - k.L, r_low)
        upper = np.append(apex[:3] + k.L, r_high)
        if np.any(lower < axis[0]) or np.any(upper > axis[-1]):
            clipped += 1
        windows = [g.index_window(lower[d], upper[d]) for d in range(4)]
        if any(i0 >= i1 for i0, i1 in windows):
            continue
        xs, ys, zs, rs = [axis[i0:i1] - apex[d] for d, (i0, i1) in enumerate(windows)]
        spatial = np.sqrt(xs[:, None, None, None] ** 2 + ys[None, :, None, None] ** 2
                          + zs[None, None, :, None] ** 2)
        spatial, level = np.broadcast_arrays(spatial, orientation * rs[None, None, None, :])
        below = level < 0
        safe = np.where(below, level, -1.0)
        block = mollifier(spatial / safe, p) * mollifier(1.0 + 2.0 * safe / k.L, p)
        block = np.where(below, block, 0.0)
        slices = tuple(slice(i0, i1) for i0, i1 in windows)
        values[slices] += w * block

    if clipped:
        logger.warning(f"⚠️ {clipped} conos sobresalen de la malla 4D: soporte recortado")
    return ScalarField(g, values)


def slice_field4(f: ScalarField, index: Optional[int] = None) -> ScalarField:
    """Corte 3D de un campo 4D en un índice del eje r (por defecto r = 0)"""
    g = f.grid
    if g.dim != 4:
        raise ValidationError("slice_field4 requiere un campo 4D")
    if index is None:
        index = g.n // 2
    return ScalarField(UniformGrid(g.L, g.n, 3), f.values[..., index])


# === SUBNIVELES Y FUNCIONALES ===

def sublevel_extract(f: ScalarField, tau: Optional[float] = None) -> OccupancyBitmap:
    """
    Bits de los nodos con valor > tau

    Args:
        f: Campo
        tau: Umbral ≥ 0 (por defecto 1e−9·max)

    Returns:
        OccupancyBitmap
    """
    values = np.real(f.values)
    if tau is None:
        peak = float(values.max()) if values.size else 0.0
        tau = 1e-9 * max(peak, 0.0)
    if tau < 0:
        raise ValidationError(f"tau debe ser ≥ 0: {tau}")
    return OccupancyBitmap(f.grid, values > tau)


def volume_functional(f: ScalarField):
    """Suma de Riemann Σ valores·h^D"""
    return f.values.sum() * f.grid.cell_volume


def inner_product(f1: ScalarField, f2: ScalarField):
    """⟨f1, f2⟩ = Σ f1·conj(f2)·h^D"""
    if f1.grid != f2.grid:
        raise GridMismatchError(f"Mallas distintas: {f1.grid} y {f2.grid}")
    product = np.vdot(f2.values, f1.values) * f1.grid.cell_volume
    if not (f1.is_complex or f2.is_complex):
        return float(np.real(product))
    return complex(product)


def union_membership(points: np.ndarray, centers: np.ndarray, radii: np.ndarray,
                     closed: bool = False) -> np.ndarray:
    """Pertenencia de puntos a una unión de bolas (abiertas por defecto)"""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
    inside = np.zeros(len(points), dtype=bool)
    chunk = max(1, 200_000 // max(1, len(centers)))
    for start in range(0, len(points), chunk):
        block = points[start:start + chunk]
        dist = np.linalg.norm(block[:, None, :] - centers[None], axis=2)
        test = dist <= radii[None] if closed else dist < radii[None]
        inside[start:start + chunk] = np.any(test, axis=1)
    return inside


# === CSV DE NUDOS ===

def write_knots(path: Union[str, Path], k: Union[KnotSet3, KnotSet4]) -> Path:
    """Guardar nudos como CSV "x,y,z,r,c" (KnotSet3 repite su radio por fila)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = np.column_stack([k.centers, k.radii, k.weights]) if len(k) else np.zeros((0, 5))
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=KNOT_CSV_HEADER, comments="")
    return path


def read_knots(path: Union[str, Path], trim: Optional[float] = None,
               kind: str = "auto") -> Union[KnotSet3, KnotSet4]:
    """
    Leer un CSV de nudos

    Args:
        path: Ruta del CSV
        trim: Altura de recorte L para KnotSet4 (por defecto 2·max r)
        kind: "3", "4" o "auto" (KnotSet3 si todos los radios coinciden)

    Returns:
        KnotSet3 o KnotSet4
    """
    path = Path(path)
    if not path.is_file():
        raise MeshIOError(f"No existe el archivo de nudos: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip().replace(" ", "")
    if header != KNOT_CSV_HEADER:
        raise FormatError(f"{path.name}: cabecera inesperada '{header}'")
    try:
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        raise FormatError(f"{path.name}: valores inválidos ({e})") from e
    if rows.size == 0:
        rows = np.zeros((0, 5))
    if rows.shape[1] != 5:
        raise FormatError(f"{path.name}: se esperaban 5 columnas")

    centers, radii, weights = rows[:, :3], rows[:, 3], rows[:, 4]
    uniform = len(radii) > 0 and np.all(radii == radii[0])
    if kind == "3" or (kind == "auto" and uniform):
        if not uniform:
            raise FormatError(f"{path.name}: radios distintos en un KnotSet3")
        return KnotSet3(centers, radii[0], weights)
    if trim is None:
        trim = 2.0 * float(radii.max()) if len(radii) and radii.max() > 0 else 1.0
    zero = int(np.count_nonzero(radii == 0))
    if zero:
        logger.warning(f"⚠️ {path.name}: {zero} nudos de radio 0 (bolas vacías, sin volumen)")
    return KnotSet4(centers, radii, weights, trim)
