"""
Módulo espectral
DFT uniforme (FFT), NDFT directa de densidades de nudos, espectros de núcleos,
ensamblado del hueco en frecuencia, reconstrucción truncada y consultas
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft
from scipy import ndimage

from modules.config import DEFAULT_OVERSAMPLE, get_thread_count
from modules.errors import GridMismatchError, MeshIOError, ValidationError, FormatError
from modules.kernels import (
    KnotSet3,
    KnotSet4,
    MollifierParams,
    rasterize_balls,
    rasterize_bumps4,
)
from modules.correlation import cone_trim_weights
from modules.motions import RigidMotion, transform_knots
from modules.solids import ScalarField, UniformGrid, read_lattice_file

logger = logging.getLogger(__name__)

Knots = Union[KnotSet3, KnotSet4]
NDFT_CHUNK = 4_000_000               # elementos complejos por bloque de nudos


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coeficientes complejos sobre la red de frecuencias ω = k/(2L), k centrado"""

    L: float
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=complex)
        if coefficients.ndim not in (3, 4) or len(set(coefficients.shape)) != 1:
            raise ValidationError(f"Red de frecuencias no cúbica: {coefficients.shape}")
        coefficients = coefficients.view()
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def dim(self) -> int:
        return self.coefficients.ndim

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.coefficients.shape

    @property
    def step(self) -> float:
        return 1.0 / (2.0 * self.L)

    @property
    def cell_measure(self) -> float:
        """Medida de celda (1/(2L))^D: hace exacta la identidad de Parseval"""
        return self.step ** self.dim

    @property
    def grid(self) -> UniformGrid:
        return UniformGrid(self.L, self.n, self.dim)

    def frequencies(self) -> np.ndarray:
        return frequency_axis(self.L, self.n)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.coefficients) ** 2)) * self.cell_measure)

    def same_lattice(self, other: "SpectralField") -> bool:
        return self.shape == other.shape and math.isclose(self.L, other.L)


@dataclass(frozen=True)
class TruncationSpec:
    """m′ modos retenidos por capas radiales de |ω| (lexicográfico dentro de la capa)"""

    m_prime: int
    order: str = "shells"

    def __post_init__(self):
        if self.m_prime < 1:
            raise ValidationError(f"m′ debe ser ≥ 1: {self.m_prime}")
        if self.order != "shells":
            raise ValidationError(f"Orden de truncado desconocido: {self.order}")


@dataclass(frozen=True)
class BallKernel:
    radius: float


@dataclass(frozen=True)
class ConeKernel:
    height: float


def frequency_axis(L: float, n: int) -> np.ndarray:
    return (np.arange(n) - n // 2) / (2.0 * L)


def lattice_for(g: UniformGrid, dim: Optional[int] = None) -> UniformGrid:
    """Misma red con otra dimensión"""
    return UniformGrid(g.L, g.n, dim or g.dim)


# === DFT UNIFORME ===

def dft_forward(f: ScalarField) -> SpectralField:
    """F = h^D·fftshift(fftn(ifftshift(f)))"""
    workers = get_thread_count()
    values = scipy.fft.ifftshift(f.values)
    spectrum = scipy.fft.fftshift(scipy.fft.fftn(values, workers=workers))
    return SpectralField(f.grid.L, spectrum * f.grid.cell_volume)


def dft_inverse(F: SpectralField, keep_complex: bool = False) -> ScalarField:
    """
    Inversa exacta de dft_forward

    Args:
        F: Espectro
        keep_complex: Conservar la parte imaginaria aunque sea despreciable

    Returns:
        ScalarField real si la parte imaginaria es despreciable
    """
    workers = get_thread_count()
    grid = F.grid
    values = scipy.fft.ifftn(scipy.fft.ifftshift(F.coefficients), workers=workers)
    values = scipy.fft.fftshift(values) / grid.cell_volume
    if not keep_complex:
        peak = float(np.max(np.abs(values))) if values.size else 0.0
        if float(np.max(np.abs(values.imag))) <= 1e-9 * max(peak, 1e-300):
            values = values.real
    return ScalarField(grid, values)


def dft_direct(f: ScalarField) -> SpectralField:
    """Definición directa Σ_x f(x)·exp(−2πi ω·x)·h^D, eje por eje"""
    g = f.grid
    omega = frequency_axis(g.L, g.n)
    kernel = np.exp(-2j * np.pi * np.outer(omega, g.axis_coords()))
    values = np.asarray(f.values, dtype=complex)
    for axis in range(g.dim):
        values = np.moveaxis(np.tensordot(kernel, values, axes=([1], [axis])), 0, axis)
    return SpectralField(g.L, values * g.cell_volume)


def frequency_inner_product(F1: SpectralField, F2: SpectralField) -> complex:
    """Σ F1·conj(F2)·(1/(2L))^D"""
    if not F1.same_lattice(F2):
        raise GridMismatchError("Espectros sobre redes distintas")
    return complex(np.vdot(F2.coefficients, F1.coefficients) * F1.cell_measure)


def hermitian_error(F: SpectralField) -> float:
    """max|F(−ω) − conj F(ω)| / max|F| sobre la parte simétrica de la red"""
    coefficients = F.coefficients
    if F.n % 2 == 0:
        coefficients = coefficients[(slice(1, None),) * F.dim]
    mirrored = np.flip(coefficients)
    peak = float(np.max(np.abs(coefficients))) if coefficients.size else 0.0
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(mirrored - np.conj(coefficients)))) / peak


# === NDFT ===

def ndft_knots(k: Knots, lattice: UniformGrid) -> SpectralField:
    """
    ρ̂(ω) = Σ_i c_i·exp(−2πi ω·x_i) (en 4D se añade η·r_i) por suma directa

    Args:
        k: Nudos (KnotSet4 en 4D usa −r_i si está reflejado)
        lattice: Red física asociada (fija L, n y la dimensión)

    Returns:
        SpectralField
    """
    if lattice.dim == 4:
        if not isinstance(k, KnotSet4):
            raise ValidationError("La NDFT 4D requiere un KnotSet4")
        points = k.knots()
    else:
        points = k.centers
    omega = frequency_axis(lattice.L, lattice.n)
    n = lattice.n
    dim = lattice.dim
    result = np.zeros(n ** dim, dtype=complex)
    if len(points) == 0:
        return SpectralField(lattice.L, result.reshape(lattice.shape))

    block = max(1, NDFT_CHUNK // (n ** (dim - 1)))
    for start in range(0, len(points), block):
        chunk = points[start:start + block]
        phases = [np.exp(-2j * np.pi * np.outer(chunk[:, d], omega)) for d in range(dim)]
        lead = k.weights[start:start + block, None] * phases[0]
        for E in phases[1:-1]:
            lead = (lead[:, :, None] * E[:, None, :]).reshape(len(chunk), -1)
        result += (lead.T @ phases[-1]).ravel()
    return SpectralField(lattice.L, result.reshape(lattice.shape))


# === ESPECTROS DE NÚCLEOS ===

def restrict(F: SpectralField, n: int) -> SpectralField:
    """Restricción a los n modos centrales (misma L)"""
    if n > F.n:
        raise ValidationError(f"No se puede restringir {F.n} modos a {n}")
    offset = F.n // 2 - n // 2
    window = (slice(offset, offset + n),) * F.dim
    return SpectralField(F.L, F.coefficients[window])


def kernel_spectrum(kind: Union[BallKernel, ConeKernel], p: MollifierParams,
                    lattice: UniformGrid, oversample: int = DEFAULT_OVERSAMPLE) -> SpectralField:
    """
    Espectro del núcleo primitivo por rasterizado sobremuestreado + DFT + restricción

    Args:
        kind: BallKernel(r) (3D) o ConeKernel(L) (4D)
        p: Mollifier
        lattice: Red objetivo
        oversample: Factor de sobremuestreo (≥ 2)

    Returns:
        SpectralField sobre la red objetivo
    """
    if oversample < 1:
        raise ValidationError("oversample debe ser ≥ 1")
    fine = UniformGrid(lattice.L, lattice.n * oversample, lattice.dim)
    if isinstance(kind, BallKernel):
        if lattice.dim != 3:
            raise ValidationError("El núcleo de bola es 3D")
        if kind.radius >= lattice.L:
            logger.warning("⚠️ El núcleo de bola no cabe en la caja física")
        field = rasterize_balls(np.zeros((1, 3)), kind.radius, 1.0, fine, p)
    elif isinstance(kind, ConeKernel):
        if lattice.dim != 4:
            raise ValidationError("El núcleo de cono es 4D")
        if kind.height > lattice.L:
            logger.debug(f"Cono de altura {kind.height:.4g} recortado en r = −{lattice.L:.4g}")
        apex = KnotSet4(np.zeros((1, 3)), [0.0], None, kind.height)
        field = rasterize_bumps4(apex, fine, p)
    else:
        raise ValidationError(f"Núcleo desconocido: {kind}")
    return restrict(dft_forward(field), lattice.n)


# === HUECO EN FRECUENCIA ===

def fourier_gap(k1: Knots, k2: Knots, R: Optional[np.ndarray], lattice: UniformGrid,
                p: MollifierParams = MollifierParams(), kernel: str = "substituted",
                oversample: int = DEFAULT_OVERSAMPLE) -> SpectralField:
    """
    ĝ = ρ̂1·conj(ρ̂_{R·2})·núcleo

    Equirradio: núcleo f̂_{B_O} con r_O = r1 + r2 ("substituted") o f̂_{B1}·f̂_{B2}
    ("convolved"). No equirradio: ensamblado 4D con el segundo conjunto reflejado
    y núcleo f̂_{D_O} (cono de altura L1 + L2) o f̂_{D1}·f̂_{D2}; con una red 3D
    se devuelve el corte r = 0.

    Args:
        k1, k2: Nudos del mismo tipo
        R: Rotación del segundo sólido (se aplica a los nudos antes de la NDFT)
        lattice: Red física de traslaciones
        p: Mollifier
        kernel: "substituted" o "convolved"
        oversample: Sobremuestreo de los espectros de núcleo

    Returns:
        SpectralField
    """
    if type(k1) is not type(k2):
        raise ValidationError("fourier_gap requiere nudos del mismo tipo")
    if kernel not in ("substituted", "convolved"):
        raise ValidationError(f"Núcleo desconocido: {kernel}")
    motion = RigidMotion(np.eye(3) if R is None else R)
    moved = transform_knots(motion, k2)

    if isinstance(k1, KnotSet3):
        if lattice.dim != 3:
            raise ValidationError("El hueco equirradio usa una red 3D")
        rho1 = ndft_knots(k1, lattice)
        rho2 = ndft_knots(moved, lattice)
        if kernel == "substituted":
            K = kernel_spectrum(BallKernel(k1.radius + k2.radius), p, lattice, oversample).coefficients
        else:
            K = (kernel_spectrum(BallKernel(k1.radius), p, lattice, oversample).coefficients
                 * kernel_spectrum(BallKernel(k2.radius), p, lattice, oversample).coefficients)
        return SpectralField(lattice.L, rho1.coefficients * np.conj(rho2.coefficients) * K)

    lattice4 = lattice_for(lattice, 4)
    rho1 = ndft_knots(replace(k1, mirrored=False), lattice4)
    rho2 = ndft_knots(replace(moved, mirrored=True), lattice4)
    if kernel == "substituted":
        K = kernel_spectrum(ConeKernel(k1.L + k2.L), p, lattice4, oversample).coefficients
    else:
        K = (kernel_spectrum(ConeKernel(k1.L), p, lattice4, oversample).coefficients
             * kernel_spectrum(ConeKernel(k2.L), p, lattice4, oversample).coefficients)
    gap4 = SpectralField(lattice.L, rho1.coefficients * np.conj(rho2.coefficients) * K)
    if lattice.dim == 4:
        return gap4
    return spectral_slice(gap4, 0.0)


def spectral_slice(F4: SpectralField, level: float) -> SpectralField:
    """Espectro 3D del corte r = level: Σ_η F(ω, η)·exp(2πi η·level)·Δη"""
    if F4.dim != 4:
        raise ValidationError("spectral_slice requiere un espectro 4D")
    eta = F4.frequencies()
    phase = np.exp(2j * np.pi * eta * level) * F4.step
    return SpectralField(F4.L, np.tensordot(F4.coefficients, phase, axes=([3], [0])))


def shape_spectrum(k: Knots, lattice: UniformGrid, p: MollifierParams = MollifierParams(),
                   method: str = "ndft", oversample: int = DEFAULT_OVERSAMPLE,
                   rotate_by: Optional[np.ndarray] = None) -> SpectralField:
    """
    Espectro 3D del campo de bultos de un conjunto de nudos

    Args:
        k: Nudos
        lattice: Red 3D
        p: Mollifier
        method: "ndft" (NDFT × núcleo) o "raster" (rasterizado + DFT)
        oversample: Sobremuestreo
        rotate_by: Sólo "raster": rotación aplicada interpolando el espectro

    Returns:
        SpectralField 3D
    """
    if lattice.dim != 3:
        raise ValidationError("shape_spectrum devuelve espectros 3D")
    if method == "ndft":
        if rotate_by is not None:
            k = transform_knots(RigidMotion(rotate_by), k)
        if isinstance(k, KnotSet3):
            rho = ndft_knots(k, lattice)
            K = kernel_spectrum(BallKernel(k.radius), p, lattice, oversample)
            return SpectralField(lattice.L, rho.coefficients * K.coefficients)
        lattice4 = lattice_for(lattice, 4)
        rho = ndft_knots(replace(k, mirrored=False), lattice4)
        K = kernel_spectrum(ConeKernel(k.L), p, lattice4, oversample)
        return spectral_slice(SpectralField(lattice.L, rho.coefficients * K.coefficients), 0.0)
    if method != "raster":
        raise ValidationError(f"Método desconocido: {method}")

    fine = UniformGrid(lattice.L, lattice.n * oversample, 3)
    height = k.L if isinstance(k, KnotSet4) else None
    weights = k.weights * cone_trim_weights(k.radii, height, p)
    field = rasterize_balls(k.centers, k.radii, weights, fine, p)
    F = restrict(dft_forward(field), lattice.n)
    if rotate_by is not None:
        F = rotate_spectrum(F, rotate_by)
    return F


def rotate_spectrum(F: SpectralField, R: np.ndarray) -> SpectralField:
    """Espectro del campo rotado, F(Rᵀω), por interpolación trilineal"""
    if F.dim != 3:
        raise ValidationError("rotate_spectrum es 3D")
    R = np.asarray(R, dtype=float)
    omega = F.frequencies()
    mesh = np.stack(np.meshgrid(omega, omega, omega, indexing="ij"), axis=-1)
    source = mesh @ R                        # filas: Rᵀω
    coords = source * 2.0 * F.L + F.n // 2
    coords = np.moveaxis(coords, -1, 0)
    real = ndimage.map_coordinates(F.coefficients.real, coords, order=1, mode="constant")
    imag = ndimage.map_coordinates(F.coefficients.imag, coords, order=1, mode="constant")
    return SpectralField(F.L, real + 1j * imag)


# === TRUNCADO Y CONSULTAS ===

@lru_cache(maxsize=16)
def truncation_order(shape: Tuple[int, ...]) -> np.ndarray:
    """Índices planos (orden C) por capas de |k|² ascendentes, lexicográfico dentro"""
    n = shape[0]
    ks = np.meshgrid(*[np.arange(s) - n // 2 for s in shape], indexing="ij")
    shells = sum(k.astype(np.int64) ** 2 for k in ks).ravel()
    keys = tuple(k.ravel() for k in reversed(ks)) + (shells,)
    order = np.lexsort(keys)
    order.setflags(write=False)
    return order


def retained_indices(F: SpectralField, spec: Optional[TruncationSpec]) -> np.ndarray:
    size = F.coefficients.size
    if spec is None or spec.m_prime == size:
        return np.arange(size)
    if spec.m_prime > size:
        raise ValidationError(f"m′={spec.m_prime} supera el tamaño de la red ({size})")
    return truncation_order(F.shape)[:spec.m_prime]


def reconstruct_truncated(F: SpectralField, spec: TruncationSpec) -> ScalarField:
    """Inversa conservando sólo los m′ modos de menor |ω|"""
    kept = retained_indices(F, spec)
    flat = np.zeros(F.coefficients.size, dtype=complex)
    flat[kept] = F.coefficients.ravel()[kept]
    return dft_inverse(SpectralField(F.L, flat.reshape(F.shape)))


class SpectralQuery:
    """Consulta de una configuración con espectros preparados: coste O(m′)"""

    def __init__(self, F1: SpectralField, F2: SpectralField,
                 spec: Optional[TruncationSpec] = None):
        """
        Preparar productos y frecuencias de los modos retenidos

        Args:
            F1: Espectro del primer sólido
            F2: Espectro del segundo sólido ya rotado
            spec: Truncado (None = espectro completo)
        """
        if not F1.same_lattice(F2) or F1.dim != 3:
            raise GridMismatchError("Los espectros de la consulta deben compartir red 3D")
        kept = retained_indices(F1, spec)
        c1 = F1.coefficients.ravel()
        c2 = F2.coefficients.ravel()
        omega = F1.frequencies()
        multi = np.unravel_index(kept, F1.shape)
        self.omegas = np.column_stack([omega[i] for i in multi])
        self.products = c1[kept] * np.conj(c2[kept]) * F1.cell_measure
        self.m_prime = len(kept)

        measure = F1.cell_measure
        norm1 = float(np.sum(np.abs(c1) ** 2)) * measure
        norm2 = float(np.sum(np.abs(c2) ** 2)) * measure
        kept1 = float(np.sum(np.abs(c1[kept]) ** 2)) * measure
        kept2 = float(np.sum(np.abs(c2[kept]) ** 2)) * measure
        self.norm1 = math.sqrt(norm1)
        self.norm2 = math.sqrt(norm2)
        discarded1 = math.sqrt(max(norm1 - kept1, 0.0))
        discarded2 = math.sqrt(max(norm2 - kept2, 0.0))
        self.error_bound = discarded1 * self.norm2 + self.norm1 * discarded2

    def evaluate(self, t: Sequence[float]) -> float:
        """Re Σ F1(ω)·conj(exp(−2πi ω·t)·F2(ω))·Δω^D"""
        phase = np.exp(2j * np.pi * (self.omegas @ np.asarray(t, dtype=float)))
        return float(np.real(np.dot(self.products, phase)))


def single_query(F1: SpectralField, F2: SpectralField, M: RigidMotion,
                 spec: Optional[TruncationSpec] = None) -> float:
    """g(R, t) por Parseval sobre los modos retenidos"""
    return SpectralQuery(F1, F2, spec).evaluate(M.t)


# === ARCHIVOS DE ESPECTROS ===

def write_spectral_field(path: Union[str, Path], F: SpectralField) -> Path:
    """Cabecera "D NX NY NZ [NR] L" y pares "re im" con x más rápido"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = " ".join([str(F.dim)] + [str(F.n)] * F.dim + [repr(float(F.L))])
    flat = F.coefficients.ravel(order="F")
    np.savetxt(path, np.column_stack([flat.real, flat.imag]), fmt="%.17g",
               header=header, comments="")
    return path


def read_spectral_field(path: Union[str, Path]) -> SpectralField:
    path = Path(path)
    if not path.is_file():
        raise MeshIOError(f"No existe el archivo de espectro: {path}")
    dim, counts, L, body = read_lattice_file(path)
    if body.shape[1] != 2:
        raise FormatError(f"{path.name}: se esperaban pares 're im'")
    values = body[:, 0] + 1j * body[:, 1]
    shape = tuple(counts)
    if values.size != int(np.prod(shape)):
        raise FormatError(f"{path.name}: número de coeficientes incorrecto")
    return SpectralField(L, values.reshape(shape, order="F"))
