"""
Módulo de configuración
Lee variables de entorno (y un .env opcional) y define los valores por defecto
"""

import os
import logging
from typing import Optional

logger = logging.getLogger(__name__)

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

# Valores por defecto de los algoritmos
DEFAULT_MU = 0.25
DEFAULT_ALPHA = 2.0
DEFAULT_LAMBDA = 2.0
DEFAULT_SEED = 0
DEFAULT_PAIR_CAP = 10 ** 8
DEFAULT_OVERSAMPLE = 2
SAMPLES_PER_FACE_AREA = 20          # boundarySampleCount = 20·m^(2/3)
ACCELERATOR_MIN_TRIANGLES = 10 ** 5
ORTHONORMAL_TOLERANCE = 1e-9
NORMALIZED_EXTENT = 0.9             # las mallas se escalan a [−0.9L, 0.9L]


def _get_env_var(var_name: str) -> Optional[str]:
    """Obtener variable de entorno de manera segura"""
    value = os.getenv(var_name)
    if value is not None and value.strip() == "":
        return None
    return value


def get_thread_count() -> int:
    """Número de hilos permitido (SPHERECONV_THREADS o número de CPUs)"""
    raw = _get_env_var("SPHERECONV_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        logger.warning(f"⚠️ SPHERECONV_THREADS inválido ({raw}), se usa 1")
        return 1
    return max(1, threads)


def get_pair_cap() -> int:
    """Límite de pares de nudos para obstáculos"""
    raw = _get_env_var("SPHERECONV_PAIR_CAP")
    if raw is None:
        return DEFAULT_PAIR_CAP
    try:
        return int(float(raw))
    except ValueError:
        logger.warning(f"⚠️ SPHERECONV_PAIR_CAP inválido ({raw}), se usa {DEFAULT_PAIR_CAP}")
        return DEFAULT_PAIR_CAP


def get_default_seed() -> int:
    """Semilla por defecto para todo muestreo aleatorio"""
    raw = _get_env_var("SPHERECONV_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"⚠️ SPHERECONV_SEED inválido ({raw}), se usa {DEFAULT_SEED}")
        return DEFAULT_SEED
