"""
Módulo de benchmark
Compara la suma de Minkowski por muestras uniformes con la de nudos y mide
el truncado espectral, el coste de una consulta y el error de Hausdorff
"""

import time
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from modules.config import get_pair_cap
from modules.correlation import obstacle_knots
from modules.decomposition import DecompositionParams, DecompositionResult, decompose
from modules.errors import ResourceLimitError
from modules.kernels import KnotSet4
from modules.solids import (
    BallUnionSampler,
    NodeSet,
    Solid,
    SolidSampler,
    UniformGrid,
    hausdorff_estimate,
)
from modules.spectral import (
    Knots,
    SpectralQuery,
    TruncationSpec,
    dft_inverse,
    reconstruct_truncated,
    shape_spectrum,
)

logger = logging.getLogger(__name__)

DEFAULT_SPECTRAL_N = 16             # nodos por eje de las redes espectrales
DEFAULT_QUERY_REPEATS = 200
DEFAULT_HAUSDORFF_SAMPLES = 2000
CHUNK_PAIRS = 2_000_000


@dataclass
class BenchRecord:
    """Una fila del informe de benchmark"""

    experiment: str
    m: int
    mu: float
    n12: int = 0
    n3: int = 0
    n_uniform: int = 0
    uniform_pairs: int = 0
    knot_pairs: int = 0
    ratio: float = 0.0
    occupancy: int = 0
    t_decompose_ms: float = 0.0
    t_uniform_ms: float = 0.0
    t_knots_ms: float = 0.0
    m_prime: int = 0
    error: float = 0.0
    t_ms: float = 0.0
    status: str = "ok"

    @classmethod
    def header(cls) -> str:
        return ",".join(f.name for f in fields(cls))

    def to_csv_row(self) -> str:
        values = []
        for f in fields(self):
            value = getattr(self, f.name)
            values.append(f"{value:.9g}" if isinstance(value, float) else str(value))
        return ",".join(values)


# === MINKOWSKI UNIFORME FRENTE A NUDOS ===

def uniform_minkowski_occupancy(X1: NodeSet, X2: NodeSet, pair_cap: Optional[int] = None) -> int:
    """
    Número de celdas ocupadas por las sumas x_i + x_j de nodos interiores

    Las sumas se ajustan a una malla de salida con el mismo paso y caja doble.

    Raises:
        ResourceLimitError: Si n1′·n2′ supera el límite de pares
    """
    cap = get_pair_cap() if pair_cap is None else int(pair_cap)
    pairs = len(X1) * len(X2)
    if pairs > cap:
        raise ResourceLimitError(f"{len(X1)}·{len(X2)} = {pairs} pares superan el límite {cap}")
    if pairs == 0:
        return 0

    spacing = X1.grid.spacing
    size = 2 * X1.grid.n + 1
    c1 = X1.coords()
    c2 = X2.coords()
    rows = max(1, CHUNK_PAIRS // len(c2))
    keys: List[np.ndarray] = []
    for start in range(0, len(c1), rows):
        sums = (c1[start:start + rows, None, :] + c2[None, :, :]).reshape(-1, 3)
        idx = np.rint(sums / spacing).astype(np.int64) + size // 2
        keys.append(np.unique(idx[:, 0] + size * (idx[:, 1] + size * idx[:, 2])))
    return int(len(np.unique(np.concatenate(keys))))


def compare_minkowski(s: Solid, g: UniformGrid, params: DecompositionParams,
                      pair_cap: Optional[int] = None) -> Tuple[BenchRecord, DecompositionResult]:
    """Descomposición más ambas sumas de Minkowski del sólido consigo mismo"""
    record = BenchRecord("minkowski", g.m, params.mu)

    start = time.perf_counter()
    result = decompose(s, g, params)
    record.t_decompose_ms = 1000.0 * (time.perf_counter() - start)
    record.n12 = len(result.A1)
    record.n3 = len(result.A3)
    X = result.nodes
    record.n_uniform = len(X)
    record.uniform_pairs = len(X) ** 2
    record.knot_pairs = record.n3 ** 2
    record.ratio = record.uniform_pairs / record.knot_pairs if record.knot_pairs else 0.0

    try:
        start = time.perf_counter()
        record.occupancy = uniform_minkowski_occupancy(X, X, pair_cap)
        record.t_uniform_ms = 1000.0 * (time.perf_counter() - start)
    except (ResourceLimitError, MemoryError) as e:
        logger.warning(f"⚠️ Base uniforme m={g.m} no terminada: {e}")
        record.status = "DNF"

    start = time.perf_counter()
    obstacle_knots(result.A3, result.A3)
    record.t_knots_ms = 1000.0 * (time.perf_counter() - start)
    logger.info(f"📊 m={g.m}: n′={record.n_uniform}, n3={record.n3}, ratio={record.ratio:.1f}")
    return record, result


# === BARRIDOS ESPECTRALES ===

def mprime_ladder(size: int, start: int = 64) -> List[int]:
    """Potencias de dos desde `start` hasta el tamaño de la red (incluido)"""
    values = []
    current = min(start, size)
    while current < size:
        values.append(current)
        current *= 2
    values.append(size)
    return values


def truncation_sweep(k: KnotSet4, lattice: UniformGrid, mu: float,
                     m_primes: Optional[Sequence[int]] = None) -> List[BenchRecord]:
    """Error L2 relativo de la reconstrucción truncada frente a la completa"""
    F = shape_spectrum(k, lattice)
    full = np.real(dft_inverse(F).values)
    norm = float(np.linalg.norm(full)) or 1.0
    records = []
    for m_prime in m_primes or mprime_ladder(F.coefficients.size):
        truncated = np.real(reconstruct_truncated(F, TruncationSpec(m_prime)).values)
        error = float(np.linalg.norm(truncated - full)) / norm
        records.append(BenchRecord("truncation", lattice.m, mu, m_prime=m_prime, error=error))
    return records


def query_time_sweep(k1: Knots, k2: Knots, lattice: UniformGrid, mu: float,
                     m_primes: Optional[Sequence[int]] = None,
                     repeats: int = DEFAULT_QUERY_REPEATS, seed: int = 0) -> List[BenchRecord]:
    """Tiempo medio de una consulta preparada en función de m′"""
    F1 = shape_spectrum(k1, lattice)
    F2 = shape_spectrum(k2, lattice)
    rng = np.random.default_rng(seed)
    translations = rng.uniform(-lattice.L, lattice.L, size=(repeats, 3))
    records = []
    for m_prime in m_primes or mprime_ladder(F1.coefficients.size):
        query = SpectralQuery(F1, F2, TruncationSpec(m_prime))
        start = time.perf_counter()
        for t in translations:
            query.evaluate(t)
        elapsed = 1000.0 * (time.perf_counter() - start) / repeats
        records.append(BenchRecord("query", lattice.m, mu, m_prime=m_prime, t_ms=elapsed,
                                   error=query.error_bound))
    return records


def linear_fit_r2(x: Sequence[float], y: Sequence[float]) -> float:
    """Coeficiente R² del ajuste lineal por mínimos cuadrados"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    total = float(np.sum((y - y.mean()) ** 2))
    return 1.0 if total == 0 else 1.0 - residual / total


def query_scaling_r2(records: Sequence[BenchRecord]) -> float:
    """R² del tiempo de consulta frente a m′ en filas "query" """
    query = [r for r in records if r.experiment == "query"]
    if len(query) < 2:
        return 1.0
    return linear_fit_r2([r.m_prime for r in query], [r.t_ms for r in query])


def ratios_increase(records: Sequence[BenchRecord]) -> bool:
    """El ratio n′/n de las filas "minkowski" crece estrictamente con m"""
    rows = sorted((r for r in records if r.experiment == "minkowski" and r.ratio > 0),
                  key=lambda r: r.m)
    return all(b.ratio > a.ratio for a, b in zip(rows, rows[1:]))


def spectrum_method_timing(k: KnotSet4, lattice: UniformGrid, mu: float) -> List[BenchRecord]:
    """NDFT directa 4D frente a rasterizado + FFT para el mismo conjunto de nudos"""
    timings = {}
    spectra = {}
    for method in ("ndft", "raster"):
        start = time.perf_counter()
        spectra[method] = shape_spectrum(k, lattice, method=method)
        timings[method] = 1000.0 * (time.perf_counter() - start)
    reference = spectra["ndft"].coefficients
    scale = float(np.linalg.norm(reference)) or 1.0
    difference = float(np.linalg.norm(spectra["raster"].coefficients - reference)) / scale
    return [BenchRecord(f"spectrum_{method}", lattice.m, mu, t_ms=timings[method],
                        error=difference if method == "raster" else 0.0)
            for method in ("ndft", "raster")]


def hausdorff_rows(s: Solid, result: DecompositionResult, g: UniformGrid, mu: float,
                   n_samples: int = DEFAULT_HAUSDORFF_SAMPLES, seed: int = 0) -> List[BenchRecord]:
    """Distancia de Hausdorff estimada entre S y cada etapa A1, A2, A3"""
    records = []
    solid = SolidSampler(s)
    for name in ("A1", "A2", "A3"):
        knots = getattr(result, name)
        if len(knots) == 0:
            continue
        distance = hausdorff_estimate(solid, BallUnionSampler(knots.centers, knots.radii),
                                      n_samples, seed)
        records.append(BenchRecord(f"hausdorff_{name}", g.m, mu, error=distance / g.epsilon))
    return records


# === ORQUESTACIÓN ===

def run_bench(s: Solid, grid_sizes: Iterable[int], mu: float, seed: int = 0,
              spectral_n: int = DEFAULT_SPECTRAL_N, pair_cap: Optional[int] = None,
              hausdorff_samples: int = DEFAULT_HAUSDORFF_SAMPLES,
              query_repeats: int = DEFAULT_QUERY_REPEATS) -> List[BenchRecord]:
    """
    Ejecutar el benchmark completo sobre un sólido

    Args:
        s: Sólido
        grid_sizes: Tamaños m (cubos perfectos)
        mu: Factor de protrusión
        seed: Semilla
        spectral_n: Nodos por eje de las redes espectrales (se limita al de la malla)
        pair_cap: Límite de pares de la base uniforme
        hausdorff_samples: Muestras por lado en la estimación de Hausdorff
        query_repeats: Consultas promediadas por valor de m′

    Returns:
        Lista de BenchRecord
    """
    params = DecompositionParams(mu=mu, seed=seed)
    records: List[BenchRecord] = []
    for m in grid_sizes:
        g = UniformGrid.from_node_count(s.L, m)
        try:
            record, result = compare_minkowski(s, g, params, pair_cap)
        except (ResourceLimitError, MemoryError) as e:
            logger.warning(f"⚠️ m={m} no terminado: {e}")
            records.append(BenchRecord("minkowski", m, mu, status="DNF"))
            continue
        records.append(record)
        records.extend(hausdorff_rows(s, result, g, mu, hausdorff_samples, seed))

        lattice = UniformGrid(s.L, min(g.n, spectral_n))
        A3 = result.A3
        if len(A3) == 0:
            continue
        records.extend(truncation_sweep(A3, lattice, mu))
        query = query_time_sweep(A3, A3, lattice, mu, repeats=query_repeats, seed=seed)
        records.extend(query)
        logger.info(f"📊 m={m}: tiempo de consulta frente a m′, R²={query_scaling_r2(query):.3f}")
        records.extend(spectrum_method_timing(A3, lattice, mu))

    if not ratios_increase(records):
        logger.warning("⚠️ El ratio n′/n no crece con el tamaño de malla")
    return records


def write_bench(path: Union[str, Path], records: Sequence[BenchRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(BenchRecord.header() + "\n")
        for record in records:
            handle.write(record.to_csv_row() + "\n")
    return path
