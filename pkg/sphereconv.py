#!/usr/bin/env python3
"""
SphereConv - Descomposición esférica y correlaciones de sólidos
"""

import sys
import time
import argparse
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

# Importar módulos del proyecto
from modules.applications import (
    PredicateMode,
    SCParams,
    collision_predicate,
    offset_obstacle,
    prepare_spectra,
    sc_score,
    write_score_report,
)
from modules.benchmark import DEFAULT_SPECTRAL_N, run_bench, write_bench
from modules.config import DEFAULT_ALPHA, DEFAULT_LAMBDA, DEFAULT_MU, get_default_seed
from modules.correlation import Knots, gap_field_spatial, write_ball_list
from modules.decomposition import (
    TRIM_FACTOR,
    Criterion,
    DecompositionParams,
    decompose,
    write_stats,
)
from modules.errors import PartialDecompositionError, exit_code_for
from modules.kernels import MollifierParams, rasterize_balls, read_knots, write_knots
from modules.motions import RigidMotion
from modules.solids import (
    ScalarField,
    UniformGrid,
    load_mesh,
    perfect_root,
    save_field_png,
    write_scalar_field,
)
from modules.spectral import TruncationSpec

# Configuración de logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


# === UTILIDADES DE ARGUMENTOS ===

def parse_grid_size(text: str) -> int:
    """Aceptar "4096" o "2^12" """
    text = text.strip()
    try:
        if "^" in text:
            base, exponent = text.split("^", 1)
            return int(base) ** int(exponent)
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"Tamaño de malla inválido: {text}") from None


def parse_grid_list(text: str) -> List[int]:
    return [parse_grid_size(part) for part in text.split(",") if part.strip()]


def check_cube(parser: argparse.ArgumentParser, m: Optional[int]) -> None:
    if m is not None and perfect_root(m, 3) is None:
        parser.error(f"M={m} no es un cubo perfecto")


def load_pair(path_a: str, path_b: str, box: float) -> Tuple[Knots, Knots]:
    """Leer dos conjuntos de nudos del mismo tipo"""
    trim = TRIM_FACTOR * box
    k1 = read_knots(path_a, trim=trim)
    k2 = read_knots(path_b, trim=trim)
    if type(k1) is not type(k2):
        k1 = read_knots(path_a, trim=trim, kind="4")
        k2 = read_knots(path_b, trim=trim, kind="4")
    logger.info(f"📁 Nudos: {len(k1)} en {Path(path_a).name}, {len(k2)} en {Path(path_b).name}")
    return k1, k2


def export_field(f: ScalarField, prefix: str, png: bool) -> None:
    path = Path(f"{prefix}.txt")
    write_scalar_field(path, f)
    logger.info(f"📁 Campo guardado: {path}")
    if png:
        image = save_field_png(f, f"{prefix}.png")
        logger.info(f"📁 Corte guardado: {image}")


# === SUBCOMANDOS ===

def cmd_decompose(args: argparse.Namespace) -> int:
    """Descomponer una malla en A1, A2 y A3"""
    solid = load_mesh(args.mesh, args.box)
    g = UniformGrid.from_node_count(args.box, args.grid_size)
    params = DecompositionParams(mu=args.mu, criterion=Criterion.parse(args.criterion),
                                 max_balls=args.max_balls, seed=args.seed)
    prefix = args.out
    try:
        result = decompose(solid, g, params)
    except PartialDecompositionError as e:
        if e.partial is not None:
            path = write_knots(f"{prefix}.a1.partial.csv", e.partial)
            logger.warning(f"⚠️ Descomposición parcial guardada en {path}")
        raise

    write_knots(f"{prefix}.a1.csv", result.A1)
    write_knots(f"{prefix}.a2.csv", result.A2)
    write_knots(f"{prefix}.a3.csv", result.A3)
    write_stats(f"{prefix}.stats.csv", result.stats)
    print(f"📊 n12={result.stats.n12}, n3={result.stats.n3}, ε={result.epsilon:.6g}")
    print(f"📁 Archivos: {prefix}.a1.csv, {prefix}.a2.csv, {prefix}.a3.csv, {prefix}.stats.csv")

    if args.png:
        A3 = result.A3
        field = rasterize_balls(A3.centers, A3.radii, A3.weights, g, MollifierParams(args.alpha))
        export_field(field, f"{prefix}.a3_field", png=True)
    return 0


def cmd_minkowski(args: argparse.Namespace) -> int:
    """Nudos del obstáculo (con offset opcional) y campo de huecos"""
    k1, k2 = load_pair(args.a, args.b, args.box)
    motion = RigidMotion.parse(args.motion)
    balls = offset_obstacle(k1, k2, motion.R, args.offset)
    path = write_ball_list(f"{args.out}.obstacle.csv", balls)
    print(f"📊 {len(balls)} nudos de obstáculo ({len(k1)}×{len(k2)})")
    print(f"📁 Obstáculo: {path}")

    if args.grid_size:
        # Los centros del obstáculo ocupan hasta el doble de la caja
        g = UniformGrid.from_node_count(2.0 * args.box, args.grid_size)
        gap = gap_field_spatial(k1, k2, motion.R, g, MollifierParams(args.alpha),
                                level=-args.offset)
        export_field(gap.field(), f"{args.out}.gap", args.png)
    return 0


def cmd_collide(args: argparse.Namespace) -> int:
    """Predicado de colisión para un movimiento"""
    k1, k2 = load_pair(args.a, args.b, args.box)
    motion = RigidMotion.parse(args.motion)
    mode = PredicateMode.parse(args.mode)
    spec = TruncationSpec(args.mprime) if args.mprime else None

    if mode is PredicateMode.SPECTRAL:
        lattice = UniformGrid.from_node_count(2.0 * args.box, args.grid_size)
        start = time.perf_counter()
        spectra = prepare_spectra(k1, k2, motion.R, lattice, MollifierParams(args.alpha))
        logger.info(f"Espectros preparados en {1000.0 * (time.perf_counter() - start):.1f} ms")
        result = collision_predicate(k1, k2, motion, mode, spec=spec, spectra=spectra)
        print(f"{result.verdict.value} g={result.g:.9g} τ={result.threshold:.3g} "
              f"e={result.error_bound:.3g} m′={result.m_prime} ({result.elapsed_ms:.3f} ms)")
    else:
        result = collision_predicate(k1, k2, motion, mode)
        witness = f" witness={result.witness[0]},{result.witness[1]}" if result.witness else ""
        print(f"{result.verdict.value}{witness} ({result.elapsed_ms:.3f} ms)")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    """Puntuación de complementariedad de doble piel"""
    k1, k2 = load_pair(args.a, args.b, args.box)
    params = SCParams(lam=args.lam, r0=args.r0, alpha=args.alpha)
    motions = [RigidMotion.parse(literal) for literal in args.motion or []]
    if args.motions_file:
        with open(args.motions_file, "r", encoding="utf-8") as handle:
            motions.extend(RigidMotion.parse(line) for line in handle
                           if line.strip() and not line.startswith("#"))
    if not motions:
        motions = [RigidMotion.identity()]

    if args.grid_size:
        g = UniformGrid.from_node_count(2.0 * args.box, args.grid_size)
        for index, motion in enumerate(motions):
            result = sc_score(k1, k2, motion.R, params=params, grid=g, method=args.method,
                              kernel=args.kernel)
            export_field(ScalarField(g, result.G), f"{args.out}.{index}.sc", args.png)
            print(f"📊 {motion.to_literal()}: max G={np.max(result.G):.6g}, "
                  f"min G={np.min(result.G):.6g}")
        return 0

    rows = []
    for motion in motions:
        result = sc_score(k1, k2, motion.R, motion.t, params=params, kernel=args.kernel)
        rows.append((motion, result))
        print(f"📊 {motion.to_literal()}: G={result.G:.9g} "
              f"(T1={result.T1:.6g}, T2={result.T2:.6g}, T3={result.T3:.6g})")
    path = write_score_report(f"{args.out}.csv", rows)
    print(f"📁 Informe: {path}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    """Benchmark de complejidad y truncado"""
    solid = load_mesh(args.mesh, args.box)
    records = run_bench(solid, args.grids, args.mu, seed=args.seed, spectral_n=args.spectral_n,
                        pair_cap=args.pair_cap)
    path = write_bench(args.out, records)
    for record in records:
        if record.experiment == "minkowski":
            print(f"📊 m={record.m}: n′={record.n_uniform}, n12={record.n12}, n3={record.n3}, "
                  f"ratio={record.ratio:.1f} [{record.status}]")
    print(f"📁 Resultados: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Descomposición esférica y correlaciones de sólidos")
    parser.add_argument("-v", "--verbose", action="store_true", help="Modo verboso")
    parser.add_argument("--seed", type=int, default=get_default_seed(), help="Semilla (por defecto 0)")
    parser.add_argument("--box", type=float, default=1.0, help="Semiextensión L de la caja")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="Descomponer una malla en bolas")
    p.add_argument("--mesh", required=True, help="Malla OBJ o STL")
    p.add_argument("--grid-size", type=parse_grid_size, required=True, help="Nodos M (cubo perfecto)")
    p.add_argument("--mu", type=float, default=DEFAULT_MU, help="Factor de protrusión")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Exponente del mollifier")
    p.add_argument("--criterion", default="sdf_proxy", help="distance o sdf_proxy")
    p.add_argument("--max-balls", type=int, help="Máximo de bolas")
    p.add_argument("--out", required=True, help="Prefijo de salida")
    p.add_argument("--png", action="store_true", help="Exportar un corte del campo de A3")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("minkowski", help="Obstáculo de configuración")
    p.add_argument("--a", required=True, help="CSV de nudos del primer sólido")
    p.add_argument("--b", required=True, help="CSV de nudos del segundo sólido")
    p.add_argument("--motion", default="axis 0 0 1 0 0 0 0", help="axis ax ay az angle_deg tx ty tz")
    p.add_argument("--offset", type=float, default=0.0, help="Margen de seguridad")
    p.add_argument("--grid-size", type=parse_grid_size, help="Nodos del campo de huecos")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Exponente del mollifier")
    p.add_argument("--out", required=True, help="Prefijo de salida")
    p.add_argument("--png", action="store_true", help="Exportar un corte del campo de huecos")
    p.set_defaults(func=cmd_minkowski)

    p = sub.add_parser("collide", help="Predicado de colisión")
    p.add_argument("--a", required=True, help="CSV de nudos del primer sólido")
    p.add_argument("--b", required=True, help="CSV de nudos del segundo sólido")
    p.add_argument("--motion", required=True, help="axis ax ay az angle_deg tx ty tz")
    p.add_argument("--mode", default="combinatorial", choices=["combinatorial", "spectral"])
    p.add_argument("--mprime", type=int, help="Modos retenidos (por defecto todos)")
    p.add_argument("--grid-size", type=parse_grid_size, default=16 ** 3,
                   help="Tamaño de la red espectral")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Exponente del mollifier")
    p.set_defaults(func=cmd_collide)

    p = sub.add_parser("score", help="Puntuación de complementariedad")
    p.add_argument("--a", required=True, help="CSV de nudos del primer sólido")
    p.add_argument("--b", required=True, help="CSV de nudos del segundo sólido")
    p.add_argument("--motion", action="append", help="Movimiento (repetible)")
    p.add_argument("--motions-file", help="Archivo con un movimiento por línea")
    p.add_argument("--lam", type=float, default=DEFAULT_LAMBDA, help="Factor de penalización λ")
    p.add_argument("--r0", type=float, help="Grosor de piel (obligatorio sin --grid-size; por defecto ε de la malla)")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Exponente del mollifier")
    p.add_argument("--kernel", default="ball", choices=["ball", "cone"])
    p.add_argument("--grid-size", type=parse_grid_size, help="Campo completo sobre esta malla")
    p.add_argument("--method", default="cascade", choices=["cascade", "spectral"])
    p.add_argument("--out", required=True, help="Prefijo de salida")
    p.add_argument("--png", action="store_true", help="Exportar cortes de los campos")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench", help="Benchmark")
    p.add_argument("--mesh", required=True, help="Malla OBJ o STL")
    p.add_argument("--grids", type=parse_grid_list, default=[2 ** 12, 2 ** 15, 2 ** 18],
                   help="Tamaños separados por comas (2^12,2^15,...)")
    p.add_argument("--mu", type=float, default=DEFAULT_MU, help="Factor de protrusión")
    p.add_argument("--spectral-n", type=int, default=DEFAULT_SPECTRAL_N,
                   help="Nodos por eje de las redes espectrales")
    p.add_argument("--pair-cap", type=int, help="Límite de pares de la base uniforme")
    p.add_argument("--out", required=True, help="CSV de salida")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Función principal"""
    print("🔵 SphereConv")
    print("=" * 50)

    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    check_cube(parser, getattr(args, "grid_size", None))
    for m in getattr(args, "grids", None) or []:
        check_cube(parser, m)
    if args.box <= 0:
        parser.error("--box debe ser > 0")

    try:
        code = args.func(args)
        print("\n✅ ¡Completado!")
        return code
    except Exception as e:
        logger.error(f"❌ Error en {args.command}: {e}")
        if args.verbose:
            import traceback
            traceback.print_exc()
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
