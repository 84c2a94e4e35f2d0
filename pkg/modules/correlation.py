"""
Módulo de correlaciones discretas
Álgebra de Minkowski sobre nudos: obstáculos, espejo en r, cortes con offset,
oráculo combinatorio de colisión y campo de huecos en el dominio espacial
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from modules.config import get_pair_cap
from modules.errors import ResourceLimitError, ValidationError
from modules.kernels import (
    KNOT_CSV_HEADER,
    KnotSet3,
    KnotSet4,
    MollifierParams,
    mollifier,
    rasterize_balls,
)
from modules.motions import RigidMotion
from modules.solids import ScalarField, UniformGrid

logger = logging.getLogger(__name__)

Knots = Union[KnotSet3, KnotSet4]
CHUNK_PAIRS = 500_000


@dataclass(frozen=True, eq=False)
class ObstacleKnots:
    """Sumas por pares (x_i − R·x_j, r_i + r_j) con pesos c_i·c_j"""

    centers: np.ndarray
    radii: np.ndarray
    weights: np.ndarray
    rotation: np.ndarray
    n1: int
    n2: int
    height: float

    def __len__(self) -> int:
        return len(self.centers)

    def as_knotset4(self) -> KnotSet4:
        """El obstáculo como conjunto de nudos 4D (conos de altura suma)"""
        return KnotSet4(self.centers, self.radii, self.weights, self.height)


@dataclass(frozen=True, eq=False)
class BallList:
    """Bolas B(c_k, ρ_k) con pesos"""

    centers: np.ndarray
    radii: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.centers)


@dataclass(frozen=True, eq=False)
class GapField:
    """Campo de huecos g(t) sobre una malla de traslaciones"""

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        peak = float(np.max(np.abs(values))) if values.size else 0.0
        if values.size and values.min() < -1e-9 * peak:
            raise ValidationError("Campo de huecos con valores negativos")
        object.__setattr__(self, "values", values)

    def field(self) -> ScalarField:
        return ScalarField(self.grid, self.values)


def _check_kinds(k1: Knots, k2: Knots) -> None:
    if type(k1) is not type(k2):
        raise ValidationError(
            f"Tipos de nudos incompatibles: {type(k1).__name__} y {type(k2).__name__}")


def mirror_r(k: KnotSet4) -> KnotSet4:
    """Reflejo (x, r) ↦ (x, −r), sólo como marca"""
    if not isinstance(k, KnotSet4):
        raise ValidationError("mirror_r requiere un KnotSet4")
    return replace(k, mirrored=not k.mirrored)


def obstacle_knots(k1: Knots, k2: Knots, R: Optional[np.ndarray] = None,
                   pair_cap: Optional[int] = None) -> ObstacleKnots:
    """
    Nudos del obstáculo para una rotación fija

    Args:
        k1: Nudos del primer sólido
        k2: Nudos del segundo sólido (mismo tipo)
        R: Rotación del segundo sólido
        pair_cap: Máximo de pares (por defecto SPHERECONV_PAIR_CAP o 1e8)

    Returns:
        ObstacleKnots con n1·n2 nudos, i exterior y j interior
    """
    _check_kinds(k1, k2)
    R = np.eye(3) if R is None else np.asarray(R, dtype=float)
    cap = get_pair_cap() if pair_cap is None else int(pair_cap)
    n1, n2 = len(k1), len(k2)
    if n1 * n2 > cap:
        raise ResourceLimitError(f"{n1}·{n2} = {n1 * n2} pares superan el límite {cap}")

    rotated = k2.centers @ R.T
    centers = (k1.centers[:, None, :] - rotated[None, :, :]).reshape(-1, 3)
    radii = (k1.radii[:, None] + k2.radii[None, :]).ravel()
    weights = (k1.weights[:, None] * k2.weights[None, :]).ravel()
    if isinstance(k1, KnotSet4):
        height = k1.L + k2.L
    else:
        height = 2.0 * (k1.radius + k2.radius)
    logger.debug(f"Obstáculo: {n1}×{n2} = {len(radii)} nudos")
    return ObstacleKnots(centers, radii, weights, R.copy(), n1, n2, height)


def slice_at(o: ObstacleKnots, level: float) -> BallList:
    """Bolas B(c_k, ρ_k − level); desaparecen las de radio ≤ 0"""
    radii = o.radii - level
    keep = radii > 0
    return BallList(o.centers[keep], radii[keep], o.weights[keep])


def write_ball_list(path: Union[str, Path], balls: BallList) -> Path:
    """Guardar bolas con el mismo formato CSV "x,y,z,r,c" que los nudos"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = np.column_stack([balls.centers, balls.radii, balls.weights]) if len(balls) else np.zeros((0, 5))
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=KNOT_CSV_HEADER, comments="")
    return path


def collide(k1: Knots, k2: Knots, M: RigidMotion) -> Tuple[bool, Optional[Tuple[int, int]]]:
    """
    Oráculo exacto: ∃(i, j) con ‖(R·x_j + t) − x_i‖ ≤ r_i + r_j

    Returns:
        (colisión, primer testigo (i, j) en orden lexicográfico o None)
    """
    moved = k2.centers @ M.R.T + M.t
    witness = _first_overlap(k1.centers, k1.radii, moved, k2.radii)
    return witness is not None, witness


def _first_overlap(c1: np.ndarray, r1: np.ndarray, c2: np.ndarray,
                   r2: np.ndarray) -> Optional[Tuple[int, int]]:
    """Primer par (i, j) con ‖c2_j − c1_i‖ ≤ r1_i + r2_j"""
    if len(c1) == 0 or len(c2) == 0:
        return None
    rows = max(1, CHUNK_PAIRS // len(c2))
    for start in range(0, len(c1), rows):
        block = c1[start:start + rows]
        dist = np.linalg.norm(c2[None, :, :] - block[:, None, :], axis=2)
        hits = dist <= r1[start:start + rows, None] + r2[None, :]
        if hits.any():
            i, j = np.unravel_index(int(np.argmax(hits)), hits.shape)
            return start + int(i), int(j)
    return None


def collide_balls(a: BallList, b: BallList) -> bool:
    """Intersección de dos listas de bolas cerradas"""
    return _first_overlap(a.centers, a.radii, b.centers, b.radii) is not None


def cone_trim_weights(radii: np.ndarray, height: Optional[float],
                      p: MollifierParams = MollifierParams()) -> np.ndarray:
    """Factor de recorte ψ(1 − 2ρ/h) del corte de un cono de altura h a radio ρ"""
    if height is None:
        return np.ones_like(radii)
    return mollifier(1.0 - 2.0 * np.asarray(radii) / height, p)


def gap_field_spatial(k1: Knots, k2: Knots, R: Optional[np.ndarray], g: UniformGrid,
                      p: MollifierParams = MollifierParams(), level: float = 0.0,
                      cone_height: Optional[float] = None) -> GapField:
    """
    g(t) = Σ w_ij·ψ_α(‖t − (x_i − R·x_j)‖ / (r_i + r_j − level))

    Args:
        k1, k2: Nudos
        R: Rotación del segundo sólido
        g: Malla de traslaciones
        p: Mollifier
        level: Nivel r del corte (negativo = offset)
        cone_height: Si se da, pondera cada bola por el recorte del cono del obstáculo

    Returns:
        GapField
    """
    o = obstacle_knots(k1, k2, R)
    balls = slice_at(o, level)
    weights = balls.weights * cone_trim_weights(balls.radii, cone_height, p)
    raster = rasterize_balls(balls.centers, balls.radii, weights, g, p)
    return GapField(g, raster.values)


def gap_value(k1: Knots, k2: Knots, M: RigidMotion, p: MollifierParams = MollifierParams(),
              level: float = 0.0, cone_height: Optional[float] = None) -> float:
    """Evaluación en cascada de g en una sola traslación M.t"""
    o = obstacle_knots(k1, k2, M.R)
    balls = slice_at(o, level)
    if len(balls) == 0:
        return 0.0
    dist = np.linalg.norm(balls.centers - M.t, axis=1)
    values = mollifier(dist / balls.radii, p)
    weights = balls.weights * cone_trim_weights(balls.radii, cone_height, p)
    return float(np.sum(weights * values))


# === PREDICADO 4D DE CONOS ===

@dataclass(frozen=True)
class TrimmedCone:
    """Semicono cerrado de pendiente 1 y altura `height` con ápice (center, apex_r)"""

    center: Tuple[float, float, float]
    apex_r: float
    height: float
    upward: bool = False

    def level_range(self) -> Tuple[float, float]:
        if self.upward:
            return self.apex_r, self.apex_r + self.height
        return self.apex_r - self.height, self.apex_r

    def radius_at(self, level: float) -> float:
        return level - self.apex_r if self.upward else self.apex_r - level

    def mirrored(self) -> "TrimmedCone":
        return TrimmedCone(self.center, -self.apex_r, self.height, not self.upward)


def cones_intersect(c1: TrimmedCone, c2: TrimmedCone) -> bool:
    """
    Intersección de dos semiconos 4D cerrados

    Los cortes a nivel s son bolas de radio afín en s; basta comprobar los
    extremos del rango de niveles común.
    """
    lo = max(c1.level_range()[0], c2.level_range()[0])
    hi = min(c1.level_range()[1], c2.level_range()[1])
    if lo > hi:
        return False
    distance = float(np.linalg.norm(np.subtract(c1.center, c2.center)))
    reach = max(c1.radius_at(lo) + c2.radius_at(lo), c1.radius_at(hi) + c2.radius_at(hi))
    return distance <= reach
