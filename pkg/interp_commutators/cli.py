"""Interfaz de línea de comandos para interp-commutators."""

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from interp_commutators import __version__
from interp_commutators.commutators import (
    OmegaConfig,
    SelectorConfig,
    commutator,
    good_representation,
    higher_commutator,
    omega_n,
)
from interp_commutators.config import ConfigError, RunConfig
from interp_commutators.exceptions import (
    CertificationError,
    DegenerateEnsembleError,
    InvalidArgumentError,
    NumericalError,
    UnsupportedPairError,
)
from interp_commutators.harness import SUITES, run_suite
from interp_commutators.io_handler import escribir_csv, escribir_json
from interp_commutators.jmethod import jnorm, near_optimal_selector
from interp_commutators.logging_config import setup_logging
from interp_commutators.weights import (
    decompose_l3,
    g_transform,
    w1_seminorm,
    weight_profile,
)

# Códigos de salida
EXIT_SUCCESS = 0
EXIT_ASSERTION_FAIL = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


ASCII_LOGO = """
===============================================================

                 INTERP - COMMUTATORS

    Conmutadores en interpolación real: pesos W, normas del
    método J y verificación empírica de las cotas

===============================================================
"""


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parsea los argumentos de la línea de comandos."""
    parser = argparse.ArgumentParser(
        prog="interp-commutators",
        description=f"{ASCII_LOGO}\nCálculo de pesos, normas J y conmutadores [T, Omega_w]",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    parser.add_argument(
        "--config",
        required=True,
        type=Path,
        help="Ruta al fichero de configuración JSON",
    )

    parser.add_argument(
        "--debug",
        action="store_true",
        help="Activa el nivel de logging DEBUG",
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
        help="Muestra la versión de interp-commutators y termina",
    )

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("weight", help="Perfil del peso: w, Pw, w#, Gw y normas W / W1")
    sub.add_parser("jnorm", help="Norma del método J de f por cada método configurado")
    sub.add_parser("commute", help="Evalúa [T, Omega_w] f y C_{n,w} f")
    verify = sub.add_parser("verify", help="Ejecuta una suite de verificación")
    verify.add_argument("suite", choices=SUITES, help="Suite a ejecutar")

    return parser.parse_args(argv)


def _cabecera(cfg: RunConfig) -> dict:
    return {"version": __version__, "config": cfg.echo}


def cmd_weight(cfg: RunConfig, out_dir: Path) -> int:
    """CSV (t, w, Pw, w#, Gw) y resumen JSON de las normas del peso."""
    grid = cfg.build_grid()
    w = cfg.build_weight()
    perfil = weight_profile(w, grid, cfg.harness.burn_in)
    gw = g_transform(w, grid)
    acotada, parte_w1 = decompose_l3(w, grid)
    filas = [
        [float(t), float(a), float(b), float(c), float(d)]
        for t, a, b, c, d in zip(grid.nodes, perfil.w.values, perfil.pw.values,
                                 perfil.sharp.values, gw.values)
    ]
    resumen = {
        **_cabecera(cfg),
        "weight": w.describe(),
        "w_norm": perfil.w_norm,
        "w1_seminorm": perfil.w1_seminorm,
        "decomposition": {
            "bounded_sup": perfil.w_norm,
            "bounded_max_abs": float(np.max(np.abs(acotada.values))),
            "w1_part_seminorm": w1_seminorm(parte_w1, grid, cfg.harness.burn_in),
        },
    }
    if "csv" in cfg.output.formats:
        escribir_csv(out_dir / "weight_profile.csv", ["t", "w", "Pw", "w_sharp", "Gw"], filas)
    if "json" in cfg.output.formats:
        escribir_json(out_dir / "weight_summary.json", resumen)
    print(f"||w||_W = {perfil.w_norm:.6g}   W1 = {perfil.w1_seminorm:.6g}")
    return EXIT_SUCCESS


def cmd_jnorm(cfg: RunConfig, out_dir: Path) -> int:
    """Valor por método, coste de la representación y estado de certificación."""
    if cfg.f is None:
        raise ConfigError("Falta el campo obligatorio en la configuración: config.f")
    grid = cfg.build_grid()
    f = np.array(cfg.f)
    valores, rep = {}, None
    for metodo in cfg.methods:
        valores[metodo], rep = jnorm(f, cfg.pair, cfg.tq, grid, metodo, cfg.solver)
    try:
        selector = near_optimal_selector(f, cfg.pair, cfg.tq, grid, cfg.solver)
        certificacion = {"status": "certified", "cost": selector.cost(cfg.tq)}
    except CertificationError as e:
        certificacion = {"status": "failed", "cost": e.cost, "bound": e.bound}
    resumen = {
        **_cabecera(cfg),
        "values": valores,
        "representation_cost": rep.cost(cfg.tq),
        "reconstruction_error": rep.reconstruction_error(),
        "certification": certificacion,
    }
    if "csv" in cfg.output.formats:
        cabecera = ["t"] + [f"u{i}" for i in range(cfg.pair.dim)]
        escribir_csv(out_dir / "jnorm_representation.csv", cabecera, rep.to_rows())
    if "json" in cfg.output.formats:
        escribir_json(out_dir / "jnorm.json", resumen)
    for metodo, valor in valores.items():
        print(f"{metodo}: {valor:.10g}")
    return EXIT_SUCCESS if certificacion["status"] == "certified" else EXIT_NUMERICAL_ERROR


def cmd_commute(cfg: RunConfig, out_dir: Path) -> int:
    """Evaluación puntual de [T, Omega_w] f, C_{n,w} f y la buena representación."""
    if cfg.f is None:
        raise ConfigError("Falta el campo obligatorio en la configuración: config.f")
    grid = cfg.build_grid()
    w = cfg.build_weight()
    T = cfg.build_operator()
    f = np.array(cfg.f)
    sel = SelectorConfig(grid, cfg.tq, cfg.solver)
    conm = commutator(T, w, f, sel)
    buena = good_representation(T, w, f, sel)
    valor, _ = jnorm(conm, T.dst, cfg.tq, grid, "solver", cfg.solver)
    resumen = {
        **_cabecera(cfg),
        "operator": T.to_dict(),
        "omega_src": omega_n(f, OmegaConfig(w, sel), T.src).tolist(),
        "commutator": conm.tolist(),
        "commutator_norm": valor,
        "higher": {str(n): higher_commutator(T, w, f, n, sel).tolist()
                   for n in range(cfg.order + 1)},
        "good_representation": {
            "cost": buena.cost(cfg.tq),
            "residual": float(np.max(np.abs(buena.f - conm))),
            "haar_sum": buena.f.tolist(),
        },
    }
    if "json" in cfg.output.formats:
        escribir_json(out_dir / "commute.json", resumen)
    if "csv" in cfg.output.formats:
        cabecera = ["t"] + [f"v{i}" for i in range(T.dst.dim)]
        escribir_csv(out_dir / "good_representation.csv", cabecera, buena.to_rows())
    print(f"[T, Omega_w] f = {conm.tolist()}")
    return EXIT_SUCCESS


def cmd_verify(cfg: RunConfig, suite: str, out_dir: Path) -> int:
    """Ejecuta la suite y escribe el informe; 0 si pasa, 1 si no."""
    report = run_suite(suite, cfg.build_ensemble())
    report.config = {**report.config, "run": cfg.echo}
    report.write(out_dir, cfg.output.formats)
    print(f"Suite {suite}: {'PASS' if report.passed else 'FAIL'} "
          f"(max_ratio = {report.max_ratio()})")
    return EXIT_SUCCESS if report.passed else EXIT_ASSERTION_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Función principal de la CLI.

    Returns:
        Código de salida (0 = éxito, 1 = verificación fallida, 2 = configuración,
        3 = fallo numérico).
    """
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_SUCCESS if e.code == 0 else EXIT_CONFIG_ERROR

    log_level = "DEBUG" if args.debug else "INFO"
    logger = setup_logging(log_level)

    logger.info("=" * 60)
    logger.info(f"Iniciando interp-commutators {__version__}")
    logger.info(f"Comando: {args.command}")

    try:
        cfg = RunConfig.cargar(args.config)
        logger.info(f"Configuración cargada desde: {args.config}")
    except ConfigError as e:
        logger.error(f"Error cargando configuración: {e}", exc_info=True)
        print(f"Error: No se pudo cargar la configuración: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    out_dir = cfg.output_dir()
    logger.info(f"Directorio de salida: {out_dir}")

    try:
        if args.command == "weight":
            codigo = cmd_weight(cfg, out_dir)
        elif args.command == "jnorm":
            codigo = cmd_jnorm(cfg, out_dir)
        elif args.command == "commute":
            codigo = cmd_commute(cfg, out_dir)
        else:
            codigo = cmd_verify(cfg, args.suite, out_dir)
    except (ConfigError, InvalidArgumentError, UnsupportedPairError) as e:
        logger.error(f"Error de configuración: {e}", exc_info=True)
        print(f"Error de configuración: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except NumericalError as e:
        logger.error(f"Fallo numérico: {e}", exc_info=True)
        print(f"Fallo numérico: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR
    except DegenerateEnsembleError as e:
        logger.error(f"Conjunto degenerado: {e}", exc_info=True)
        print(f"Conjunto degenerado: {e}", file=sys.stderr)
        return EXIT_ASSERTION_FAIL
    except OSError as e:
        logger.error(f"Error escribiendo resultados: {e}", exc_info=True)
        print(f"Error escribiendo resultados: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    logger.info(f"Proceso completado (código {codigo})")
    logger.info("=" * 60)
    return codigo


if __name__ == "__main__":
    sys.exit(main())
