"""
Módulo de sólidos
Maneja mallas triangulares cerradas, mallas uniformes de nodos, campos escalares
y la estimación de distancias de Hausdorff
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from modules.config import (
    ACCELERATOR_MIN_TRIANGLES,
    NORMALIZED_EXTENT,
    get_thread_count,
)
from modules.errors import (
    DegenerateRayError,
    FormatError,
    InconsistentOrientationError,
    MeshIOError,
    MeshParseError,
    NotWatertightError,
    ValidationError,
)

logger = logging.getLogger(__name__)

try:
    import trimesh
    HAS_TRIMESH = True
except ImportError:
    logger.warning("trimesh no está instalado. Instala con: pip install trimesh")
    HAS_TRIMESH = False

try:
    from PIL import Image
    HAS_PIL = True
except ImportError:
    HAS_PIL = False

# Tolerancias de los predicados geométricos
BARYCENTRIC_TOLERANCE = 1e-10
BOUNDARY_TOLERANCE = 1e-12          # relativa a L
MAX_RAY_RESTARTS = 64
CHUNK_PAIRS = 200_000               # puntos × triángulos por bloque


@dataclass(frozen=True)
class UniformGrid:
    """Malla cúbica de nodos sobre [−L, L)^D"""

    L: float
    n: int
    dim: int = 3

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValidationError(f"L debe ser positivo y finito: {self.L}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"Número de nodos por eje inválido: {self.n}")
        if self.dim not in (3, 4):
            raise ValidationError(f"Dimensión no soportada: {self.dim}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_node_count(cls, L: float, m: int, dim: int = 3) -> "UniformGrid":
        """
        Crear una malla a partir del número total de nodos

        Args:
            L: Semiextensión de la caja
            m: Número de nodos (potencia D-ésima perfecta)
            dim: Dimensión (3 o 4)

        Returns:
            UniformGrid con m nodos
        """
        n = perfect_root(m, dim)
        if n is None:
            raise ValidationError(f"m={m} no es una potencia {dim}-ésima perfecta")
        return cls(L, n, dim)

    @property
    def m(self) -> int:
        return self.n ** self.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def epsilon(self) -> float:
        """Media diagonal de una celda: √D·L/n"""
        return math.sqrt(self.dim) * self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def axis_coords(self) -> np.ndarray:
        return self.spacing * (np.arange(self.n) - self.n // 2)

    def node_coords(self, indices: Optional[np.ndarray] = None) -> np.ndarray:
        """Coordenadas de nodos dados por índice plano (x más rápido)"""
        if indices is None:
            indices = np.arange(self.m)
        multi = np.unravel_index(np.asarray(indices, dtype=np.int64), self.shape, order="F")
        return np.stack([self.spacing * (i - self.n // 2) for i in multi], axis=-1)

    def mesh(self) -> List[np.ndarray]:
        """Coordenadas de todos los nodos como arrays indexados [ix, iy, iz(, ir)]"""
        axis = self.axis_coords()
        return np.meshgrid(*([axis] * self.dim), indexing="ij")

    def index_window(self, lower: float, upper: float) -> Tuple[int, int]:
        """Rango [i0, i1) de índices de eje cuyas coordenadas caen en [lower, upper]"""
        h = self.spacing
        i0 = int(math.ceil(lower / h - 1e-9)) + self.n // 2
        i1 = int(math.floor(upper / h + 1e-9)) + self.n // 2 + 1
        return max(i0, 0), min(i1, self.n)

    def covers(self, lower: np.ndarray, upper: np.ndarray) -> bool:
        """Indica si la caja [lower, upper] cae dentro de los nodos de la malla"""
        axis = self.axis_coords()
        return bool(np.all(np.asarray(lower) >= axis[0]) and np.all(np.asarray(upper) <= axis[-1]))


def perfect_root(m: int, dim: int = 3) -> Optional[int]:
    """Raíz entera D-ésima de m, o None si no es exacta"""
    if int(m) != m or m < 1:
        return None
    m = int(m)
    guess = int(round(m ** (1.0 / dim)))
    for candidate in (guess - 1, guess, guess + 1):
        if candidate >= 1 and candidate ** dim == m:
            return candidate
    return None


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Valores reales (o complejos) sobre los nodos de una malla"""

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.size != self.grid.m:
            raise ValidationError(
                f"El campo tiene {values.size} valores para {self.grid.m} nodos")
        if values.shape != self.grid.shape:
            values = values.reshape(self.grid.shape, order="F")
        else:
            values = values.view()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def flat(self) -> np.ndarray:
        """Valores en orden x más rápido"""
        return self.values.ravel(order="F")

    def section(self, axis: int = 2, index: Optional[int] = None) -> np.ndarray:
        """Corte 2D del campo (3D) por un plano de nodos"""
        if index is None:
            index = self.grid.n // 2
        return np.take(self.values, index, axis=axis)


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Índices planos (estrictamente crecientes) de nodos de una malla"""

    grid: UniformGrid
    indices: np.ndarray

    def __post_init__(self):
        indices = np.array(self.indices, dtype=np.int64).ravel()
        if indices.size and (indices[0] < 0 or indices[-1] >= self.grid.m):
            raise ValidationError("Índice de nodo fuera de la malla")
        if indices.size > 1 and np.any(np.diff(indices) <= 0):
            raise ValidationError("Los índices de NodeSet deben ser estrictamente crecientes")
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    def __len__(self) -> int:
        return int(self.indices.size)

    def coords(self) -> np.ndarray:
        return self.grid.node_coords(self.indices)

    def to_mask(self) -> np.ndarray:
        mask = np.zeros(self.grid.m, dtype=bool)
        mask[self.indices] = True
        return mask.reshape(self.grid.shape, order="F")


class Solid:
    """Sólido cerrado descrito por una malla triangular estanca y orientada"""

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray, L: float):
        """
        Crear y validar un sólido

        Args:
            vertices: Array (V, 3) de vértices
            triangles: Array (T, 3) de índices de vértices
            L: Semiextensión de la caja que contiene al sólido
        """
        self.L = float(L)
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)

        if self.triangles.size == 0:
            raise MeshParseError("La malla no contiene triángulos")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshParseError("Índice de vértice fuera de rango")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshParseError("La malla contiene coordenadas no finitas")
        if np.any(self.vertices < -self.L) or np.any(self.vertices >= self.L):
            raise ValidationError(f"Hay vértices fuera de [−L, L)^3 con L={self.L}")

        check_closed_and_oriented(self.triangles)

        # Datos precalculados por triángulo
        self._a = self.vertices[self.triangles[:, 0]]
        self._b = self.vertices[self.triangles[:, 1]]
        self._c = self.vertices[self.triangles[:, 2]]
        self._e1 = self._b - self._a
        self._e2 = self._c - self._a
        self.areas = 0.5 * np.linalg.norm(np.cross(self._e1, self._e2), axis=1)
        self._tree = None
        self._centroid_radius = 0.0

        for array in (self.vertices, self.triangles, self._a, self._b, self._c,
                      self._e1, self._e2, self.areas):
            array.setflags(write=False)

        if len(self.triangles) >= ACCELERATOR_MIN_TRIANGLES:
            centroids = (self._a + self._b + self._c) / 3.0
            self._tree = cKDTree(centroids)
            self._centroid_radius = float(np.max(np.linalg.norm(
                np.stack([self._a, self._b, self._c]) - centroids[None], axis=2)))
            logger.debug(f"Acelerador de triángulos activado ({len(self.triangles)} triángulos)")

    def __repr__(self) -> str:
        return f"Solid(vertices={len(self.vertices)}, triangles={len(self.triangles)}, L={self.L})"

    @property
    def tolerance(self) -> float:
        return BOUNDARY_TOLERANCE * self.L

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    # === INCLUSIÓN ===

    def contains(self, x: Sequence[float], seed: int = 0) -> bool:
        """
        Test de inclusión en el sólido cerrado por paridad de cruces de un rayo

        Args:
            x: Punto 3D
            seed: Semilla de las direcciones de rayo

        Returns:
            True si x está en el sólido (borde incluido)
        """
        x = np.asarray(x, dtype=float)
        rng = np.random.default_rng(seed)
        for _ in range(MAX_RAY_RESTARTS):
            direction = _random_direction(rng)
            verdict = self._ray_parity(x[None, :], direction)[0]
            if verdict >= 0:
                return bool(verdict)
            logger.debug("Rayo degenerado, se perturba la dirección")
        raise DegenerateRayError(
            f"No se encontró un rayo no degenerado para {x} tras {MAX_RAY_RESTARTS} intentos")

    def contains_points(self, points: np.ndarray, seed: int = 0) -> np.ndarray:
        """Inclusión vectorizada; los puntos con rayo degenerado se repiten uno a uno"""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        result = np.zeros(len(points), dtype=bool)
        if len(points) == 0:
            return result
        direction = _random_direction(np.random.default_rng(seed))
        chunk = max(1, CHUNK_PAIRS // len(self.triangles))
        for start in range(0, len(points), chunk):
            verdicts = self._ray_parity(points[start:start + chunk], direction)
            block = result[start:start + chunk]
            block[:] = verdicts == 1
            for k in np.nonzero(verdicts < 0)[0]:
                block[k] = self.contains(points[start + k], seed=seed + 1)
        return result

    def _ray_parity(self, points: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """
        Paridad de cruces (Möller–Trumbore) para un bloque de puntos

        Returns:
            Por punto: 1 dentro, 0 fuera, −1 rayo degenerado
        """
        pvec = np.cross(direction, self._e2)
        det = np.einsum("ij,ij->i", self._e1, pvec)
        scale = np.linalg.norm(self._e1, axis=1) * np.linalg.norm(self._e2, axis=1)
        parallel = np.abs(det) <= 1e-12 * scale
        safe_det = np.where(parallel, 1.0, det)

        tvec = points[:, None, :] - self._a[None, :, :]
        u = np.einsum("ptk,tk->pt", tvec, pvec) / safe_det
        qvec = np.cross(tvec, self._e1[None, :, :])
        v = np.einsum("ptk,k->pt", qvec, direction) / safe_det
        t = np.einsum("ptk,tk->pt", qvec, self._e2) / safe_det

        tol = BARYCENTRIC_TOLERANCE
        tol_t = self.tolerance
        w = 1.0 - u - v
        inside_loose = (u >= -tol) & (v >= -tol) & (w >= -tol) & ~parallel[None, :]
        inside_strict = (u > tol) & (v > tol) & (w > tol) & ~parallel[None, :]

        on_surface = np.any(inside_loose & (np.abs(t) <= tol_t), axis=1)
        grazing = np.any(inside_loose & ~inside_strict & (t > tol_t), axis=1)

        # Rayo contenido en el plano de un triángulo
        normals = np.cross(self._e1, self._e2)
        plane_dist = np.abs(np.einsum("ptk,tk->pt", tvec, normals)) / np.maximum(
            np.linalg.norm(normals, axis=1), 1e-300)
        in_plane = np.any(parallel[None, :] & (plane_dist <= tol_t), axis=1)

        crossings = np.count_nonzero(inside_strict & (t > tol_t), axis=1)
        verdict = (crossings % 2).astype(np.int8)
        verdict[grazing | in_plane] = -1
        verdict[on_surface] = 1
        return verdict

    # === DISTANCIA ===

    def distance_to_boundary(self, x: Sequence[float]) -> float:
        """Distancia exacta de x a la superficie (mínimo sobre triángulos)"""
        return float(self.distances_to_boundary(np.asarray(x, dtype=float)[None, :])[0])

    def distances_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """
        Distancias exactas punto–superficie para un conjunto de puntos

        Args:
            points: Array (P, 3)

        Returns:
            Array (P,) de distancias ≥ 0
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(points) == 0:
            return np.zeros(0)
        if self._tree is not None:
            return self._distances_accelerated(points)

        chunk = max(1, CHUNK_PAIRS // len(self.triangles))
        blocks = [points[i:i + chunk] for i in range(0, len(points), chunk)]
        threads = min(get_thread_count(), len(blocks))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                results = list(executor.map(self._block_distances, blocks))
        else:
            results = [self._block_distances(block) for block in blocks]
        return np.concatenate(results)

    def _block_distances(self, block: np.ndarray) -> np.ndarray:
        closest = closest_points_on_triangles(
            block[:, None, :], self._a[None], self._b[None], self._c[None])
        dist = np.linalg.norm(closest - block[:, None, :], axis=2)
        return dist.min(axis=1)

    def _distances_accelerated(self, points: np.ndarray) -> np.ndarray:
        """Distancias con cubetas de triángulos (KD-tree de centroides)"""
        out = np.empty(len(points))
        _, nearest = self._tree.query(points)
        for k, p in enumerate(points):
            j = nearest[k]
            upper = np.linalg.norm(closest_points_on_triangles(
                p, self._a[j], self._b[j], self._c[j]) - p)
            candidates = np.asarray(
                self._tree.query_ball_point(p, upper + self._centroid_radius), dtype=np.int64)
            closest = closest_points_on_triangles(
                p[None, :], self._a[candidates], self._b[candidates], self._c[candidates])
            out[k] = min(upper, float(np.min(np.linalg.norm(closest - p, axis=1))))
        return out

    # === MUESTREO ===

    def sample_boundary(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Puntos aleatorios sobre la superficie, ponderados por área"""
        if count <= 0:
            return np.zeros((0, 3))
        probabilities = self.areas / self.areas.sum()
        chosen = rng.choice(len(self.triangles), size=count, p=probabilities)
        r1 = rng.random(count)
        r2 = rng.random(count)
        flip = r1 + r2 > 1.0
        r1[flip] = 1.0 - r1[flip]
        r2[flip] = 1.0 - r2[flip]
        return (self._a[chosen] + r1[:, None] * self._e1[chosen]
                + r2[:, None] * self._e2[chosen])

    def sample_interior(self, count: int, rng: np.random.Generator,
                        max_rounds: int = 50) -> np.ndarray:
        """Puntos uniformes dentro del sólido por rechazo en su caja"""
        lower, upper = self.bounding_box()
        accepted: List[np.ndarray] = []
        total = 0
        for round_index in range(max_rounds):
            if total >= count:
                break
            candidates = lower + (upper - lower) * rng.random((2 * (count - total) + 16, 3))
            kept = candidates[self.contains_points(candidates, seed=round_index)]
            accepted.append(kept)
            total += len(kept)
        if not accepted:
            return np.zeros((0, 3))
        return np.concatenate(accepted)[:count]


def closest_points_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray,
                                c: np.ndarray) -> np.ndarray:
    """
    Punto más cercano de cada triángulo (a, b, c) a p por regiones de Voronoi

    Los argumentos se difunden (broadcast) entre sí; la última dimensión es 3.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    bp = p - b
    cp = p - c

    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    def _ratio(num, den):
        return num / np.where(den == 0, 1.0, den)

    with np.errstate(invalid="ignore", divide="ignore"):
        denom = va + vb + vc
        v_in = _ratio(vb, denom)
        w_in = _ratio(vc, denom)
        v_ab = _ratio(d1, d1 - d3)
        w_ac = _ratio(d2, d2 - d6)
        w_bc = _ratio(d4 - d3, (d4 - d3) + (d5 - d6))

    result = a + ab * v_in[..., None] + ac * w_in[..., None]

    region_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    result = np.where(region_bc[..., None], b + (c - b) * w_bc[..., None], result)
    region_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    result = np.where(region_ac[..., None], a + ac * w_ac[..., None], result)
    region_c = (d6 >= 0) & (d5 <= d6)
    result = np.where(region_c[..., None], np.broadcast_to(c, result.shape), result)
    region_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    result = np.where(region_ab[..., None], a + ab * v_ab[..., None], result)
    region_b = (d3 >= 0) & (d4 <= d3)
    result = np.where(region_b[..., None], np.broadcast_to(b, result.shape), result)
    region_a = (d1 <= 0) & (d2 <= 0)
    result = np.where(region_a[..., None], np.broadcast_to(a, result.shape), result)
    return result


def check_closed_and_oriented(triangles: np.ndarray) -> None:
    """Comprobar estanqueidad y orientación consistente de una malla"""
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    undirected = np.sort(directed, axis=1)
    _, counts = np.unique(undirected, axis=0, return_counts=True)
    if np.any(counts != 2):
        open_edges = int(np.count_nonzero(counts == 1))
        raise NotWatertightError(
            f"La malla no es estanca: {open_edges} aristas abiertas, "
            f"{int(np.count_nonzero(counts > 2))} aristas no variedad")
    _, directed_counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(directed_counts > 1):
        raise InconsistentOrientationError(
            f"Orientación inconsistente en {int(np.count_nonzero(directed_counts > 1))} aristas")


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    direction = rng.normal(size=3)
    return direction / np.linalg.norm(direction)


# === OPERACIONES DEL MÓDULO ===

def load_mesh(path: Union[str, Path], L: float) -> Solid:
    """
    Cargar una malla OBJ o STL ASCII y normalizarla a [−0.9L, 0.9L]^3

    Args:
        path: Ruta del archivo
        L: Semiextensión de la caja

    Returns:
        Solid validado
    """
    path = Path(path)
    if not path.is_file():
        raise MeshIOError(f"No existe el archivo de malla: {path}")
    if not HAS_TRIMESH:
        raise MeshParseError("trimesh es necesario para leer mallas")

    try:
        mesh = trimesh.load(str(path), force="mesh", process=True)
    except Exception as e:
        raise MeshParseError(f"No se pudo interpretar {path.name}: {e}") from e

    vertices = np.asarray(getattr(mesh, "vertices", np.zeros((0, 3))), dtype=float)
    faces = np.asarray(getattr(mesh, "faces", np.zeros((0, 3))), dtype=np.int64)
    if len(faces) == 0:
        raise MeshParseError(f"{path.name} no contiene triángulos")

    lower, upper = vertices.min(axis=0), vertices.max(axis=0)
    center = 0.5 * (lower + upper)
    half_extent = float(np.max(upper - lower)) / 2.0
    if half_extent <= 0:
        raise MeshParseError(f"{path.name} es degenerada (extensión nula)")
    scale = NORMALIZED_EXTENT * L / half_extent
    solid = Solid((vertices - center) * scale, faces, L)
    logger.info(f"Malla cargada: {path.name} ({len(solid.vertices)} vértices, "
                f"{len(solid.triangles)} triángulos)")
    return solid


def contains(s: Solid, x: Sequence[float]) -> bool:
    """Inclusión de x en el sólido cerrado"""
    return s.contains(x)


def distance_to_boundary(s: Solid, x: Sequence[float]) -> float:
    """Distancia de x a la frontera del sólido"""
    return s.distance_to_boundary(x)


def interior_nodes(g: UniformGrid, s: Solid) -> NodeSet:
    """
    Nodos de la malla contenidos en el sólido (X = G ∩ S)

    Lanza un rayo +x por cada fila (y, z) de nodos; las filas que rozan una
    arista o un vértice se resuelven nodo a nodo con contains().

    Args:
        g: Malla 3D
        s: Sólido

    Returns:
        NodeSet con los nodos interiores
    """
    if g.dim != 3:
        raise ValidationError("interior_nodes requiere una malla 3D")
    axis = g.axis_coords()
    n = g.n
    yy, zz = np.meshgrid(axis, axis, indexing="ij")
    rows = np.stack([yy.ravel(), zz.ravel()], axis=1)          # fila k = n·iy + iz
    rows_iy = np.repeat(np.arange(n), n)
    rows_iz = np.tile(np.arange(n), n)

    a2, b2, c2 = s._a[:, 1:], s._b[:, 1:], s._c[:, 1:]
    area = _edge(a2, b2, c2)
    tiny = 1e-14 * np.maximum(np.abs(area).max(), 1e-300)

    mask = np.zeros(g.shape, dtype=bool)
    degenerate_rows = np.zeros(len(rows), dtype=bool)
    hits_per_row: List[List[np.ndarray]] = [[] for _ in range(len(rows))]
    chunk = max(1, CHUNK_PAIRS // len(s.triangles))
    tol = BARYCENTRIC_TOLERANCE

    for start in range(0, len(rows), chunk):
        p = rows[start:start + chunk, None, :]
        w0 = _edge(b2[None], c2[None], p)
        w1 = _edge(c2[None], a2[None], p)
        w2 = _edge(a2[None], b2[None], p)
        flat = np.abs(area)[None, :] <= tiny
        safe = np.where(flat, 1.0, area)[None, :]
        l0, l1, l2 = w0 / safe, w1 / safe, w2 / safe
        loose = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol) & ~flat
        strict = (l0 > tol) & (l1 > tol) & (l2 > tol) & ~flat

        # Triángulos paralelos al eje x cuya proyección (un segmento) toca la fila
        lo = np.minimum(np.minimum(a2, b2), c2)[None]
        hi = np.maximum(np.maximum(a2, b2), c2)[None]
        touches_flat = flat & np.all((p >= lo - 1e-12 * s.L) & (p <= hi + 1e-12 * s.L), axis=2)

        degenerate_rows[start:start + chunk] = np.any((loose & ~strict) | touches_flat, axis=1)
        x_hit = l0 * s._a[None, :, 0] + l1 * s._b[None, :, 0] + l2 * s._c[None, :, 0]
        for k in np.nonzero(np.any(strict, axis=1))[0]:
            hits_per_row[start + k].append(x_hit[k, strict[k]])

    tol_x = s.tolerance
    for k in range(len(rows)):
        iy, iz = rows_iy[k], rows_iz[k]
        if degenerate_rows[k]:
            points = np.column_stack([axis, np.full(n, rows[k, 0]), np.full(n, rows[k, 1])])
            mask[:, iy, iz] = s.contains_points(points)
            continue
        if not hits_per_row[k]:
            continue
        hits = np.sort(np.concatenate(hits_per_row[k]))
        after = len(hits) - np.searchsorted(hits, axis, side="right")
        inside = (after % 2) == 1
        on_surface = np.any(np.abs(hits[None, :] - axis[:, None]) <= tol_x, axis=1)
        mask[:, iy, iz] = inside | on_surface

    indices = np.nonzero(mask.ravel(order="F"))[0]
    logger.debug(f"{len(indices)} nodos interiores de {g.m}")
    return NodeSet(g, indices)


def _edge(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Función de arista 2D (doble del área con signo de a, b, p)"""
    return ((b[..., 0] - a[..., 0]) * (p[..., 1] - a[..., 1])
            - (b[..., 1] - a[..., 1]) * (p[..., 0] - a[..., 0]))


# === MUESTREADORES PARA HAUSDORFF ===

class PointSampler:
    """Conjunto que se puede muestrear y que responde distancias al conjunto"""

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def distance(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SolidSampler(PointSampler):
    """Muestras de un sólido: mitad en la frontera (por área), mitad en el volumen"""

    def __init__(self, solid: Solid, boundary_fraction: float = 0.5):
        self.solid = solid
        self.boundary_fraction = boundary_fraction

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        on_boundary = int(round(count * self.boundary_fraction))
        parts = [self.solid.sample_boundary(on_boundary, rng)]
        if count - on_boundary > 0:
            parts.append(self.solid.sample_interior(count - on_boundary, rng))
        return np.concatenate(parts)

    def distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        dist = self.solid.distances_to_boundary(points)
        dist[self.solid.contains_points(points)] = 0.0
        return dist


class BallUnionSampler(PointSampler):
    """Muestras de una unión de bolas cerradas"""

    def __init__(self, centers: np.ndarray, radii: np.ndarray, boundary_fraction: float = 0.5):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        self.radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(self.centers),)).copy()
        self.boundary_fraction = boundary_fraction

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        on_boundary = int(round(count * self.boundary_fraction))
        parts = [self._sample_boundary(on_boundary, rng)]
        if count - on_boundary > 0:
            parts.append(self._sample_volume(count - on_boundary, rng))
        return np.concatenate(parts)

    def _sample_boundary(self, count: int, rng: np.random.Generator,
                         max_rounds: int = 50) -> np.ndarray:
        kept: List[np.ndarray] = []
        total = 0
        weights = self.radii ** 2
        if count <= 0 or weights.sum() <= 0:
            return np.zeros((0, 3))
        for _ in range(max_rounds):
            if total >= count:
                break
            chosen = rng.choice(len(self.centers), size=2 * (count - total) + 16,
                                p=weights / weights.sum())
            directions = rng.normal(size=(len(chosen), 3))
            directions /= np.linalg.norm(directions, axis=1)[:, None]
            points = self.centers[chosen] + self.radii[chosen, None] * directions
            exposed = self._depth(points) >= -1e-12 * max(1.0, float(self.radii.max()))
            kept.append(points[exposed])
            total += int(np.count_nonzero(exposed))
        return np.concatenate(kept)[:count] if kept else np.zeros((0, 3))

    def _sample_volume(self, count: int, rng: np.random.Generator) -> np.ndarray:
        weights = self.radii ** 3
        if weights.sum() <= 0:
            return np.zeros((0, 3))
        chosen = rng.choice(len(self.centers), size=count, p=weights / weights.sum())
        directions = rng.normal(size=(count, 3))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        radial = self.radii[chosen] * rng.random(count) ** (1.0 / 3.0)
        return self.centers[chosen] + radial[:, None] * directions

    def _depth(self, points: np.ndarray) -> np.ndarray:
        """min_i(‖p − c_i‖ − r_i): negativo dentro de la unión"""
        out = np.empty(len(points))
        chunk = max(1, CHUNK_PAIRS // max(1, len(self.centers)))
        for start in range(0, len(points), chunk):
            block = points[start:start + chunk]
            d = np.linalg.norm(block[:, None, :] - self.centers[None], axis=2) - self.radii[None]
            out[start:start + chunk] = d.min(axis=1)
        return out

    def distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.maximum(self._depth(points), 0.0)


class PointSetSampler(PointSampler):
    """Conjunto finito de puntos (por ejemplo, nodos de malla)"""

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(self.points) == 0:
            raise ValidationError("PointSetSampler requiere al menos un punto")
        self._tree = cKDTree(self.points)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if count >= len(self.points):
            return self.points.copy()
        return self.points[rng.choice(len(self.points), size=count, replace=False)]

    def distance(self, points: np.ndarray) -> np.ndarray:
        dist, _ = self._tree.query(np.asarray(points, dtype=float).reshape(-1, 3))
        return dist


def hausdorff_estimate(A: PointSampler, B: PointSampler, n_samples: int, seed: int = 0) -> float:
    """
    Distancia de Hausdorff simétrica estimada por muestreo

    Args:
        A: Primer conjunto
        B: Segundo conjunto
        n_samples: Muestras por lado
        seed: Semilla

    Returns:
        max(sup_a d(a, B), sup_b d(b, A)) sobre las muestras
    """
    if n_samples <= 0:
        raise ValidationError("hausdorff_estimate requiere n_samples > 0")
    rng = np.random.default_rng(seed)
    from_a = A.sample(n_samples, rng)
    from_b = B.sample(n_samples, rng)
    forward = float(np.max(B.distance(from_a))) if len(from_a) else 0.0
    backward = float(np.max(A.distance(from_b))) if len(from_b) else 0.0
    return max(forward, backward)


# === ARCHIVOS DE CAMPOS ===

def write_scalar_field(path: Union[str, Path], f: ScalarField) -> None:
    """Guardar un campo: cabecera "D NX NY NZ [NR] L" y valores con x más rápido"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = " ".join([str(f.grid.dim)] + [str(f.grid.n)] * f.grid.dim + [repr(float(f.grid.L))])
    flat = f.flat()
    if f.is_complex:
        body = np.column_stack([flat.real, flat.imag])
        np.savetxt(path, body, fmt="%.17g", header=header, comments="")
    else:
        np.savetxt(path, flat, fmt="%.17g", header=header, comments="")


def read_scalar_field(path: Union[str, Path]) -> ScalarField:
    """Leer un campo escrito por write_scalar_field"""
    path = Path(path)
    if not path.is_file():
        raise MeshIOError(f"No existe el archivo de campo: {path}")
    dim, counts, L, body = read_lattice_file(path)
    values = body[:, 0] + 1j * body[:, 1] if body.shape[1] == 2 else body[:, 0]
    grid = UniformGrid(L, counts[0], dim)
    if values.size != grid.m:
        raise FormatError(f"{path.name}: se esperaban {grid.m} valores, hay {values.size}")
    return ScalarField(grid, values.reshape(grid.shape, order="F"))


def read_lattice_file(path: Path) -> Tuple[int, List[int], float, np.ndarray]:
    """Cabecera y cuerpo numérico de un archivo de campo o espectro"""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            header = handle.readline().split()
        dim = int(header[0])
        counts = [int(v) for v in header[1:-1]]
        L = float(header[-1])
        body = np.loadtxt(path, skiprows=1, ndmin=2)
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path.name}: cabecera o valores inválidos ({e})") from e
    if len(counts) == 1:
        counts = counts * dim
    if len(counts) != dim or len(set(counts)) != 1:
        raise FormatError(f"{path.name}: sólo se admiten mallas cúbicas de dimensión {dim}")
    return dim, counts, L, body


def save_field_png(f: ScalarField, path: Union[str, Path], axis: int = 2,
                   index: Optional[int] = None, min_size: int = 256) -> Path:
    """
    Exportar un corte del campo como imagen en escala de grises

    Args:
        f: Campo 3D
        path: Ruta del PNG
        axis: Eje normal al corte
        index: Índice del plano (por defecto el central)
        min_size: Tamaño mínimo en píxeles

    Returns:
        Ruta escrita
    """
    if not HAS_PIL:
        raise ImportError("Pillow no está instalado. Instala con: pip install Pillow")
    section = np.abs(f.section(axis, index)).astype(float)
    peak = section.max()
    pixels = np.zeros_like(section) if peak <= 0 else section / peak
    image = Image.fromarray(np.round(255 * pixels.T[::-1]).astype(np.uint8))
    factor = max(1, int(math.ceil(min_size / max(image.size))))
    image = image.resize((image.size[0] * factor, image.size[1] * factor), Image.NEAREST)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path)
    return path
