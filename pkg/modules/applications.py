"""
Módulo de aplicaciones
Maneja el predicado de colisión (combinatorio o espectral), la puntuación de
complementariedad de doble piel y los obstáculos con margen de seguridad
"""

import time
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from modules.config import DEFAULT_LAMBDA, DEFAULT_OVERSAMPLE
from modules.correlation import (
    BallList,
    Knots,
    collide,
    gap_field_spatial,
    gap_value,
    obstacle_knots,
    slice_at,
)
from modules.errors import ValidationError
from modules.kernels import KnotSet3, KnotSet4, MollifierParams
from modules.motions import RigidMotion, transform_knots
from modules.solids import UniformGrid
from modules.spectral import (
    BallKernel,
    SpectralField,
    SpectralQuery,
    TruncationSpec,
    dft_inverse,
    fourier_gap,
    kernel_spectrum,
    lattice_for,
    ndft_knots,
    shape_spectrum,
    spectral_slice,
)

logger = logging.getLogger(__name__)

# Umbral relativo τ_g = 1e−6·‖F1‖‖F2‖
SPECTRAL_THRESHOLD = 1e-6
SCORE_HEADER = "R_literal,tx,ty,tz,T1,T2,T3,G"


class Verdict(Enum):
    HIT = "HIT"
    MISS = "MISS"
    INDETERMINATE = "INDETERMINATE"


class PredicateMode(Enum):
    COMBINATORIAL = "combinatorial"
    SPECTRAL = "spectral"

    @classmethod
    def parse(cls, name: Union[str, "PredicateMode"]) -> "PredicateMode":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValidationError(
                f"Modo desconocido '{name}' (opciones: combinatorial, spectral)") from None


@dataclass(frozen=True)
class CollisionVerdict:
    """Resultado del predicado: veredicto más testigo (combinatorio) o g (espectral)"""

    verdict: Verdict
    mode: PredicateMode
    witness: Optional[Tuple[int, int]] = None
    g: Optional[float] = None
    error_bound: float = 0.0
    threshold: float = 0.0
    m_prime: Optional[int] = None
    elapsed_ms: float = 0.0

    @property
    def hit(self) -> bool:
        return self.verdict is Verdict.HIT


def prepare_spectra(k1: Knots, k2: Knots, R: Optional[np.ndarray], lattice: UniformGrid,
                    p: MollifierParams = MollifierParams(), method: str = "ndft",
                    oversample: int = DEFAULT_OVERSAMPLE) -> Tuple[SpectralField, SpectralField]:
    """
    Espectros de forma de ambos sólidos, el segundo ya rotado

    Args:
        k1, k2: Nudos
        R: Rotación del segundo sólido
        lattice: Red 3D de traslaciones
        p: Mollifier
        method: "ndft" (rotación exacta de nudos) o "raster" (rotación interpolada)
        oversample: Sobremuestreo de los núcleos

    Returns:
        (F1, F2)
    """
    F1 = shape_spectrum(k1, lattice, p, method, oversample)
    F2 = shape_spectrum(k2, lattice, p, method, oversample, rotate_by=R)
    return F1, F2


def collision_predicate(k1: Knots, k2: Knots, M: RigidMotion,
                        mode: Union[str, PredicateMode] = PredicateMode.COMBINATORIAL,
                        spec: Optional[TruncationSpec] = None,
                        spectra: Optional[Tuple[SpectralField, SpectralField]] = None,
                        lattice: Optional[UniformGrid] = None,
                        p: MollifierParams = MollifierParams()) -> CollisionVerdict:
    """
    ¿Colisionan S1 y M·S2?

    En modo combinatorio la respuesta es exacta y lleva el primer testigo (i, j).
    En modo espectral se evalúa g = ⟨f1, f2(· − t)⟩ sobre los m′ modos retenidos
    y se compara con τ_g teniendo en cuenta la cota del error de truncado.

    Args:
        k1, k2: Nudos
        M: Movimiento del segundo sólido
        mode: "combinatorial" o "spectral"
        spec: Truncado (None = espectro completo)
        spectra: (F1, F2) preparados para la rotación de M
        lattice: Red 3D con la que preparar los espectros si no se dan
        p: Mollifier

    Returns:
        CollisionVerdict
    """
    mode = PredicateMode.parse(mode)
    if mode is PredicateMode.COMBINATORIAL:
        start = time.perf_counter()
        hit, witness = collide(k1, k2, M)
        elapsed = 1000.0 * (time.perf_counter() - start)
        return CollisionVerdict(Verdict.HIT if hit else Verdict.MISS, mode,
                                witness=witness, elapsed_ms=elapsed)

    if spectra is None:
        if lattice is None:
            raise ValidationError("El modo espectral necesita espectros preparados o una red")
        spectra = prepare_spectra(k1, k2, M.R, lattice, p)
    query = SpectralQuery(spectra[0], spectra[1], spec)
    start = time.perf_counter()
    g = query.evaluate(M.t)
    elapsed = 1000.0 * (time.perf_counter() - start)

    tau = SPECTRAL_THRESHOLD * query.norm1 * query.norm2
    bound = query.error_bound
    if g - bound > tau:
        verdict = Verdict.HIT
    elif g + bound <= tau:
        verdict = Verdict.MISS
    else:
        verdict = Verdict.INDETERMINATE
    logger.debug(f"Consulta espectral m′={query.m_prime}: g={g:.6g}, τ={tau:.3g}, e={bound:.3g}")
    return CollisionVerdict(verdict, mode, g=g, error_bound=bound, threshold=tau,
                            m_prime=query.m_prime, elapsed_ms=elapsed)


# === COMPLEMENTARIEDAD DE DOBLE PIEL ===

@dataclass(frozen=True)
class SCParams:
    """Factor de penalización λ, grosor de piel r0 (None = ε de la malla) y mollifier"""

    lam: float = DEFAULT_LAMBDA
    r0: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValidationError(f"lambda debe ser > 0: {self.lam}")
        if self.r0 is not None and not (self.r0 > 0):
            raise ValidationError(f"r0 debe ser > 0: {self.r0}")

    @property
    def mollifier(self) -> MollifierParams:
        return MollifierParams() if self.alpha is None else MollifierParams(self.alpha)

    def skin(self, g: Optional[UniformGrid] = None) -> float:
        if self.r0 is not None:
            return float(self.r0)
        if g is None:
            raise ValidationError("r0 no indicado y sin malla de la que tomar ε")
        return g.epsilon


@dataclass(frozen=True, eq=False)
class SCResult:
    """
    Puntuación G = λ²·T1 − 2λ·T2 + T3 con su desglose

    T1 es el término núcleo-núcleo, T2 piel-núcleo y T3 piel-piel. En modo de
    malla los cuatro valores son arrays sobre `grid`.
    """

    T1: Union[float, np.ndarray]
    T2: Union[float, np.ndarray]
    T3: Union[float, np.ndarray]
    G: Union[float, np.ndarray]
    lam: float
    r0: float
    grid: Optional[UniformGrid] = None

    @property
    def score(self) -> Union[float, np.ndarray]:
        return self.G

    def recombine(self) -> Union[float, np.ndarray]:
        return self.lam ** 2 * self.T1 - 2.0 * self.lam * self.T2 + self.T3

    def identity_error(self) -> float:
        """|G − (λ²T1 − 2λT2 + T3)| relativo a la escala de los términos"""
        scale = np.max(self.lam ** 2 * np.abs(self.T1) + 2.0 * self.lam * np.abs(self.T2)
                       + np.abs(self.T3))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(np.asarray(self.G) - self.recombine())) / scale)


def _combine(terms: Sequence, lam: float, r0: float,
             grid: Optional[UniformGrid] = None) -> SCResult:
    T1, T2, T3 = terms
    G = lam ** 2 * T1 - 2.0 * lam * T2 + T3
    return SCResult(T1, T2, T3, G, lam, r0, grid)


def _check_skin_fits(r0: float, g: UniformGrid) -> None:
    # El corte de piel más profundo está a −2r0 y debe caer dentro de la caja
    if 2.0 * r0 >= g.L:
        raise ValidationError(
            f"r0={r0:.4g}: el corte a −2r0 queda fuera de la caja L={g.L:.4g} (recorte)")


def _cone_height(k1: Knots, k2: Knots, kernel: str) -> Optional[float]:
    if kernel == "ball":
        return None
    if kernel != "cone":
        raise ValidationError(f"Núcleo desconocido '{kernel}' (opciones: ball, cone)")
    if not isinstance(k1, KnotSet4):
        raise ValidationError("El núcleo de cono requiere nudos 4D")
    return k1.L + k2.L


def sc_score(k1: Knots, k2: Knots, R: Optional[np.ndarray] = None,
             t: Optional[Sequence[float]] = None, params: SCParams = SCParams(),
             grid: Optional[UniformGrid] = None, method: str = "cascade",
             kernel: str = "ball", oversample: int = DEFAULT_OVERSAMPLE) -> SCResult:
    """
    Puntuación de complementariedad de doble piel

    Los tres términos son huecos del mismo par de sólidos con offsets totales
    0, r0 y 2r0 (cortes del obstáculo a niveles 0, −r0 y −2r0).

    Args:
        k1, k2: Nudos del mismo tipo
        R: Rotación del segundo sólido
        t: Traslación (modo puntual)
        params: λ, r0 y α
        grid: Malla de traslaciones (modo de campo completo)
        method: "cascade" (suma directa) o "spectral" (sólo con malla)
        kernel: "ball" o "cone" (bolas ponderadas por el recorte del cono 4D)
        oversample: Sobremuestreo de los núcleos en modo espectral

    Returns:
        SCResult
    """
    if (t is None) == (grid is None):
        raise ValidationError("Indica una traslación t o una malla, no ambas")
    p = params.mollifier
    r0 = params.skin(grid)
    levels = (0.0, -r0, -2.0 * r0)
    if R is None:
        R = np.eye(3)

    if grid is None:
        if method != "cascade":
            raise ValidationError("El modo puntual sólo admite el método cascade")
        height = _cone_height(k1, k2, kernel)
        M = RigidMotion(R, t)
        terms = [gap_value(k1, k2, M, p, level, height) for level in levels]
        return _combine(terms, params.lam, r0)

    _check_skin_fits(r0, grid)
    if method == "cascade":
        height = _cone_height(k1, k2, kernel)
        terms = [gap_field_spatial(k1, k2, R, grid, p, level, height).values for level in levels]
    elif method == "spectral":
        terms = _spectral_terms(k1, k2, R, grid, p, r0, oversample)
    else:
        raise ValidationError(f"Método desconocido '{method}' (opciones: cascade, spectral)")
    result = _combine(terms, params.lam, r0, grid)
    logger.debug(f"SC λ={params.lam}, r0={r0:.4g}: max|G|={np.max(np.abs(result.G)):.4g}")
    return result


def _spectral_terms(k1: Knots, k2: Knots, R: np.ndarray, grid: UniformGrid,
                    p: MollifierParams, r0: float, oversample: int) -> List[np.ndarray]:
    """Los tres términos desde un único producto de densidades en frecuencia"""
    if isinstance(k1, KnotSet4):
        gap4 = fourier_gap(k1, k2, R, lattice_for(grid, 4), p, oversample=oversample)
        slices = [spectral_slice(gap4, level) for level in (0.0, -r0, -2.0 * r0)]
        return [np.real(dft_inverse(F).values) for F in slices]

    if not isinstance(k2, KnotSet3):
        raise ValidationError("sc_score requiere nudos del mismo tipo")
    moved = transform_knots(RigidMotion(R), k2)
    rho = ndft_knots(k1, grid).coefficients * np.conj(ndft_knots(moved, grid).coefficients)
    terms = []
    for offset in (0.0, r0, 2.0 * r0):
        K = kernel_spectrum(BallKernel(k1.radius + k2.radius + offset), p, grid, oversample)
        terms.append(np.real(dft_inverse(SpectralField(grid.L, rho * K.coefficients)).values))
    return terms


def sc_field_multiplier(gap: SpectralField, params: SCParams = SCParams(),
                        oversample: int = DEFAULT_OVERSAMPLE) -> SCResult:
    """
    Forma de convolución: Ĝ = ĝ·(λ − f̂_B0)²

    La piel de cada término se modela convolucionando con el bulto de la bola
    B(0, r0): T̂1 = ĝ, T̂2 = ĝ·f̂_B0, T̂3 = ĝ·f̂_B0².

    Args:
        gap: Espectro 3D del hueco (equirradio o corte de uno 4D)
        params: λ, r0 (None = ε de la red) y α
        oversample: Sobremuestreo del núcleo

    Returns:
        SCResult de campo completo
    """
    if gap.dim != 3:
        raise ValidationError("sc_field_multiplier trabaja sobre espectros 3D")
    grid = gap.grid
    r0 = params.skin(grid)
    _check_skin_fits(r0, grid)
    B0 = kernel_spectrum(BallKernel(r0), params.mollifier, grid, oversample).coefficients
    g_hat = gap.coefficients
    lam = params.lam

    def spatial(coefficients):
        return np.real(dft_inverse(SpectralField(gap.L, coefficients)).values)

    T1 = spatial(g_hat)
    T2 = spatial(g_hat * B0)
    T3 = spatial(g_hat * B0 ** 2)
    G = spatial(g_hat * (lam - B0) ** 2)
    return SCResult(T1, T2, T3, G, lam, r0, grid)


# === OBSTÁCULOS CON MARGEN ===

def offset_obstacle(k1: Knots, k2: Knots, R: Optional[np.ndarray], d: float) -> BallList:
    """Obstáculo de los sólidos engordados por d: corte a nivel −d"""
    return slice_at(obstacle_knots(k1, k2, R), -d)


# === INFORMES ===

def score_row(M: RigidMotion, result: SCResult) -> str:
    """Fila "R_literal,tx,ty,tz,T1,T2,T3,G" de un resultado puntual"""
    if result.grid is not None:
        raise ValidationError("Las filas de informe son de resultados puntuales")
    rotation = " ".join(M.to_literal().split()[:5])
    values = list(M.t) + [result.T1, result.T2, result.T3, result.G]
    return rotation + "," + ",".join(f"{float(v):.9g}" for v in values)


def write_score_report(path: Union[str, Path],
                       rows: Iterable[Tuple[RigidMotion, SCResult]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(SCORE_HEADER + "\n")
        for M, result in rows:
            handle.write(score_row(M, result) + "\n")
    return path
