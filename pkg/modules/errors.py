"""
Excepciones del proyecto
Agrupadas según las clases de mensaje del CLI: IO, MESH y RESOURCE
"""

from typing import Any, Optional


class SphereConvError(Exception):
    """Error base de SphereConv"""

    category = "ERROR"


class ValidationError(SphereConvError, ValueError):
    """Un valor no cumple los invariantes de su tipo"""

    category = "USAGE"


class GridMismatchError(ValidationError):
    """Dos campos o espectros no comparten la misma malla"""


# === IO ===

class MeshIOError(SphereConvError, OSError):
    """No se puede leer o escribir un archivo"""

    category = "IO"


class FormatError(SphereConvError):
    """Archivo de nudos, campo o espectro mal formado"""

    category = "IO"


# === MESH ===

class MeshError(SphereConvError):
    """Error de la malla de entrada"""

    category = "MESH"


class MeshParseError(MeshError):
    """La malla no se puede interpretar como OBJ/STL ASCII"""


class NotWatertightError(MeshError):
    """Alguna arista no está compartida por exactamente dos triángulos"""


class InconsistentOrientationError(MeshError):
    """Triángulos vecinos recorren la arista común en el mismo sentido"""


class DegenerateRayError(MeshError):
    """Todos los rayos de inclusión rozan aristas, vértices o planos de la malla"""


# === RESOURCE ===

class ResourceLimitError(SphereConvError):
    """Se supera un límite configurado (pares, memoria)"""

    category = "RESOURCE"


class PartialDecompositionError(ResourceLimitError):
    """Se alcanzó maxBalls antes de cubrir todos los nodos"""

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


EXIT_CODES = {
    "ERROR": 1,
    "USAGE": 2,
    "IO": 2,
    "MESH": 3,
    "RESOURCE": 4,
}


def exit_code_for(error: BaseException) -> int:
    """Código de salida del CLI para una excepción"""
    if isinstance(error, SphereConvError):
        return EXIT_CODES.get(error.category, 1)
    if isinstance(error, OSError):
        return EXIT_CODES["IO"]
    return 1
