"""
Módulo de movimientos rígidos
Elementos de SE(3): composición, inversión, acción sobre puntos y nudos,
y métrica geodésica
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation

from modules.config import ORTHONORMAL_TOLERANCE
from modules.errors import ValidationError
from modules.kernels import KnotSet3, KnotSet4

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """Movimiento (R, t) con R ortonormal y det(R) = +1"""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        t = np.array(self.t, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValidationError("El movimiento debe ser finito")
        if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHONORMAL_TOLERANCE:
            raise ValidationError("R no es ortonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise ValidationError("det(R) debe ser +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "RigidMotion":
        return cls()

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle_deg: float,
                        t: Sequence[float] = (0.0, 0.0, 0.0)) -> "RigidMotion":
        """
        Crear un movimiento a partir de eje, ángulo (grados) y traslación

        Args:
            axis: Eje de giro (no nulo salvo ángulo 0)
            angle_deg: Ángulo en grados
            t: Traslación

        Returns:
            RigidMotion
        """
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            if angle_deg != 0:
                raise ValidationError("Eje nulo con ángulo distinto de cero")
            return cls(np.eye(3), t)
        rotvec = axis / norm * math.radians(angle_deg)
        return cls(Rotation.from_rotvec(rotvec).as_matrix(), t)

    @classmethod
    def translation(cls, t: Sequence[float]) -> "RigidMotion":
        return cls(np.eye(3), t)

    @classmethod
    def parse(cls, literal: str) -> "RigidMotion":
        """Interpretar el literal "axis ax ay az angle_deg tx ty tz" """
        tokens = literal.replace(",", " ").split()
        if len(tokens) != 8 or tokens[0].lower() != "axis":
            raise ValidationError(
                f"Literal de movimiento inválido: '{literal}' "
                "(formato: axis ax ay az angle_deg tx ty tz)")
        try:
            numbers = [float(v) for v in tokens[1:]]
        except ValueError as e:
            raise ValidationError(f"Literal de movimiento inválido: {e}") from e
        return cls.from_axis_angle(numbers[0:3], numbers[3], numbers[4:7])

    def to_literal(self) -> str:
        """Literal "axis ax ay az angle_deg tx ty tz" equivalente"""
        rotvec = Rotation.from_matrix(self.R).as_rotvec()
        angle = float(np.linalg.norm(rotvec))
        axis = rotvec / angle if angle > 0 else np.array([0.0, 0.0, 1.0])
        numbers = list(axis) + [math.degrees(angle)] + list(self.t)
        return "axis " + " ".join(f"{v:.9g}" for v in numbers)

    def __repr__(self) -> str:
        return f"RigidMotion({self.to_literal()})"


def _reorthonormalize(R: np.ndarray) -> np.ndarray:
    """Proyección a SO(3) por SVD"""
    u, _, vt = np.linalg.svd(R)
    Q = u @ vt
    if np.linalg.det(Q) < 0:
        u[:, -1] *= -1
        Q = u @ vt
    return Q


def compose(M1: RigidMotion, M2: RigidMotion) -> RigidMotion:
    """(R1R2, t1 + R1t2), reortonormalizado si la deriva supera 1e−9"""
    R = M1.R @ M2.R
    if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHONORMAL_TOLERANCE:
        R = _reorthonormalize(R)
    return RigidMotion(R, M1.t + M1.R @ M2.t)


def invert(M: RigidMotion) -> RigidMotion:
    """(Rᵀ, −Rᵀt)"""
    return RigidMotion(M.R.T, -M.R.T @ M.t)


def act_point(M: RigidMotion, x) -> np.ndarray:
    """Rx + t (acepta un punto o un array (n, 3))"""
    x = np.asarray(x, dtype=float)
    return x @ M.R.T + M.t


def act_knot(M: RigidMotion, a) -> np.ndarray:
    """(Rx + t, r): el radio no cambia"""
    a = np.asarray(a, dtype=float)
    out = a.copy()
    out[..., :3] = act_point(M, a[..., :3])
    return out


def transform_knots(M: RigidMotion, k: Union[KnotSet3, KnotSet4]) -> Union[KnotSet3, KnotSet4]:
    """Reubicar todos los centros; radios y pesos intactos"""
    if isinstance(k, KnotSet3):
        return KnotSet3(act_point(M, k.points), k.radius, k.weights)
    return KnotSet4(act_point(M, k.centers), k.radii, k.weights, k.L, k.mirrored)


def rotation_log_norm(R: np.ndarray) -> float:
    """‖ln R‖_F = √2·θ con θ ∈ [0, π]"""
    theta = float(np.linalg.norm(Rotation.from_matrix(R).as_rotvec()))
    return math.sqrt(2.0) * theta


def geodesic_distance(M1: RigidMotion, M2: RigidMotion) -> float:
    """(‖ln(R1ᵀR2)‖_F² + ‖t2 − t1‖²)^(1/2)"""
    rotational = rotation_log_norm(M1.R.T @ M2.R)
    translational = float(np.linalg.norm(M2.t - M1.t))
    return math.sqrt(rotational ** 2 + translational ** 2)
