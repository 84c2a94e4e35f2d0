"""
Módulo de descomposición esférica
Muestreo voraz de bolas guiado por distancia o por un proxy de SDF,
expansión por ε y reducción de bolas englobadas (A1, A2, A3)
"""

import time
import logging
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from modules.config import DEFAULT_MU, SAMPLES_PER_FACE_AREA
from modules.errors import PartialDecompositionError, ValidationError
from modules.kernels import KnotSet4
from modules.solids import NodeSet, Solid, UniformGrid, interior_nodes

logger = logging.getLogger(__name__)

# Los radios de A2 llegan a 0.9L + ε: los nudos usan altura de recorte 2L
TRIM_FACTOR = 2.0

STATS_HEADER = "m,epsilon,mu,n12,n3,t0_ms,t1_ms,t2_ms,t3_ms"


class Criterion(Enum):
    DISTANCE = "distance"
    SDF_PROXY = "sdf_proxy"

    @classmethod
    def parse(cls, name: Union[str, "Criterion"]) -> "Criterion":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower().replace("-", "_"))
        except ValueError:
            raise ValidationError(
                f"Criterio desconocido '{name}' (opciones: distance, sdf_proxy)") from None


@dataclass(frozen=True)
class DecompositionParams:
    """Parámetros del muestreo voraz"""

    mu: float = DEFAULT_MU
    criterion: Criterion = Criterion.SDF_PROXY
    max_balls: Optional[int] = None
    boundary_sample_count: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.mu <= 1.0):
            raise ValidationError(f"mu debe estar en [0, 1]: {self.mu}")
        if self.max_balls is not None and self.max_balls < 1:
            raise ValidationError("max_balls debe ser ≥ 1")
        object.__setattr__(self, "criterion", Criterion.parse(self.criterion))

    def sample_count(self, g: UniformGrid) -> int:
        if self.boundary_sample_count is not None:
            return int(self.boundary_sample_count)
        return int(SAMPLES_PER_FACE_AREA * g.n ** 2)


@dataclass
class DecompositionStats:
    """Recuentos y tiempos por paso"""

    m: int
    epsilon: float
    mu: float
    n12: int = 0
    n3: int = 0
    t0_ms: float = 0.0
    t1_ms: float = 0.0
    t2_ms: float = 0.0
    t3_ms: float = 0.0

    def to_csv_row(self) -> str:
        return ",".join(f"{getattr(self, f.name):.9g}" if isinstance(getattr(self, f.name), float)
                        else str(getattr(self, f.name)) for f in fields(self))


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    """Salida del algoritmo: A1, A2, A3, ε y estadísticas"""

    A1: KnotSet4
    A2: KnotSet4
    A3: KnotSet4
    epsilon: float
    stats: DecompositionStats
    nodes: Optional[NodeSet] = None


# === PASO 0 ===

def compute_distance_field(X: NodeSet, s: Solid) -> np.ndarray:
    """r[x] = distancia de cada nodo a la frontera"""
    if len(X) == 0:
        return np.zeros(0)
    return s.distances_to_boundary(X.coords())


def compute_sdf_proxy(X: NodeSet, radii: np.ndarray, boundary_samples: np.ndarray,
                      delta: Optional[float] = None) -> np.ndarray:
    """
    Proxy de SDF: r(x) · #{muestras de frontera y con ‖x − y‖ ≤ r(x) + δ}

    Args:
        X: Nodos interiores
        radii: Distancias a la frontera por nodo
        boundary_samples: Muestras de ∂S ponderadas por área
        delta: Holgura (por defecto la diagonal de celda)

    Returns:
        Puntuación por nodo
    """
    boundary_samples = np.asarray(boundary_samples, dtype=float).reshape(-1, 3)
    if len(boundary_samples) == 0:
        raise ValidationError("El proxy de SDF necesita muestras de frontera")
    if len(X) == 0:
        return np.zeros(0)
    if delta is None:
        delta = np.sqrt(3.0) * X.grid.spacing
    tree = cKDTree(boundary_samples)
    counts = tree.query_ball_point(X.coords(), np.asarray(radii) + delta, return_length=True)
    return np.asarray(radii) * np.asarray(counts, dtype=float)


# === PASO 1 ===

def greedy_decompose(s: Solid, g: UniformGrid, params: DecompositionParams = DecompositionParams(),
                     X: Optional[NodeSet] = None, radii: Optional[np.ndarray] = None,
                     scores: Optional[np.ndarray] = None) -> KnotSet4:
    """
    Selección voraz de bolas con eliminación por factor de protrusión

    Args:
        s: Sólido
        g: Malla
        params: Parámetros (μ, criterio, maxBalls)
        X, radii, scores: Campos precalculados (se calculan si faltan)

    Returns:
        A1 como KnotSet4
    """
    if X is None:
        X = interior_nodes(g, s)
    if radii is None:
        radii = compute_distance_field(X, s)
    if params.criterion is Criterion.SDF_PROXY and scores is None:
        samples = s.sample_boundary(params.sample_count(g), np.random.default_rng(params.seed))
        scores = compute_sdf_proxy(X, radii, samples)
    criterion = radii if params.criterion is Criterion.DISTANCE else scores

    trim = TRIM_FACTOR * g.L
    coords = X.coords()
    count = len(coords)
    if count == 0:
        return KnotSet4(np.zeros((0, 3)), np.zeros(0), None, trim)

    # Mayor criterio primero; empates por menor índice de nodo
    order = np.lexsort((np.arange(count), -np.asarray(criterion)))
    popped = np.zeros(count, dtype=bool)
    covered = np.zeros(count, dtype=bool)
    selected = []
    cursor = 0
    mu = params.mu

    while not covered.all():
        if params.max_balls is not None and len(selected) >= params.max_balls:
            partial = KnotSet4(coords[selected], radii[selected], None, trim)
            raise PartialDecompositionError(
                f"Se alcanzó maxBalls={params.max_balls} con "
                f"{int(np.count_nonzero(~covered))} nodos sin cubrir", partial=partial)
        while cursor < count and popped[order[cursor]]:
            cursor += 1
        if cursor < count:
            i = order[cursor]
        else:
            # Cola vacía con nodos sin cubrir: se sigue por orden de criterio
            i = order[~covered[order]][0]

        dist = np.linalg.norm(coords - coords[i], axis=1)
        covered |= dist <= radii[i]
        covered[i] = True
        popped |= dist - np.abs(radii[i] - radii) <= mu * radii
        popped[i] = True
        selected.append(i)

    logger.debug(f"Paso 1: {len(selected)} bolas para {count} nodos")
    return KnotSet4(coords[selected], radii[selected], None, trim)


# === PASOS 2 Y 3 ===

def expand(A1: KnotSet4, epsilon: float) -> KnotSet4:
    """A2 = {(x_i, r_i + ε)}"""
    if epsilon < 0:
        raise ValidationError(f"epsilon debe ser ≥ 0: {epsilon}")
    return KnotSet4(A1.centers, A1.radii + epsilon, A1.weights, A1.L, A1.mirrored)


def reduce(A1: KnotSet4, A2: KnotSet4) -> KnotSet4:
    """
    A3: elimina las bolas originales englobadas por una bola expandida superviviente

    Se recorren los nudos por radio decreciente (empates por índice); el nudo i
    cae si ‖x_j − x_i‖ ≤ (r_j + ε) − r_i para algún j ya conservado.

    Sólo se compara con nudos conservados, no con todo A2: una bola englobada
    sólo por bolas eliminadas se conserva. Así toda bola eliminada queda dentro
    de una bola de A3 y se cumple S(A1) ⊆ S(A3) ⊆ S(A2).
    """
    if len(A1) != len(A2) or not np.array_equal(A1.centers, A2.centers):
        raise ValidationError("A1 y A2 no están alineados por índice")
    if np.any(A2.radii < A1.radii):
        raise ValidationError("A2 no es una expansión de A1")

    count = len(A1)
    order = np.lexsort((np.arange(count), -A1.radii))
    kept = []
    for i in order:
        if kept:
            kept_arr = np.asarray(kept)
            gap = np.linalg.norm(A2.centers[kept_arr] - A1.centers[i], axis=1)
            if np.any(gap <= A2.radii[kept_arr] - A1.radii[i]):
                continue
        kept.append(i)
    return A2.subset(np.sort(np.asarray(kept, dtype=np.int64)))


def decompose(s: Solid, g: UniformGrid, params: DecompositionParams = DecompositionParams()) -> DecompositionResult:
    """
    Algoritmo completo: campos, selección voraz, expansión y reducción

    Args:
        s: Sólido
        g: Malla 3D
        params: Parámetros

    Returns:
        DecompositionResult con A1, A2, A3 y estadísticas
    """
    stats = DecompositionStats(m=g.m, epsilon=g.epsilon, mu=params.mu)

    start = time.perf_counter()
    X = interior_nodes(g, s)
    radii = compute_distance_field(X, s)
    scores = None
    if params.criterion is Criterion.SDF_PROXY and len(X):
        samples = s.sample_boundary(params.sample_count(g), np.random.default_rng(params.seed))
        scores = compute_sdf_proxy(X, radii, samples)
    stats.t0_ms = 1000.0 * (time.perf_counter() - start)

    start = time.perf_counter()
    A1 = greedy_decompose(s, g, params, X=X, radii=radii, scores=scores)
    stats.t1_ms = 1000.0 * (time.perf_counter() - start)

    start = time.perf_counter()
    A2 = expand(A1, g.epsilon)
    stats.t2_ms = 1000.0 * (time.perf_counter() - start)

    start = time.perf_counter()
    A3 = reduce(A1, A2)
    stats.t3_ms = 1000.0 * (time.perf_counter() - start)

    stats.n12 = len(A1)
    stats.n3 = len(A3)
    logger.info(f"Descomposición m={g.m}: {len(X)} nodos, n12={stats.n12}, n3={stats.n3}, "
                f"ε={g.epsilon:.4g}")
    return DecompositionResult(A1, A2, A3, g.epsilon, stats, X)


def write_stats(path: Union[str, Path], stats: DecompositionStats) -> Path:
    """CSV de una línea con cabecera "m,epsilon,mu,n12,n3,t0_ms,t1_ms,t2_ms,t3_ms" """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(STATS_HEADER + "\n")
        handle.write(stats.to_csv_row() + "\n")
    return path
