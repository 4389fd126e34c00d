"""Gestión de la configuración de las ejecuciones (fichero JSON por secciones)."""

import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from interp_commutators.exceptions import InterpError
from interp_commutators.grid import LogGrid, make_grid, symmetric_grid
from interp_commutators.harness import EnsembleConfig, default_grids
from interp_commutators.jmethod import METHODS, SolverSettings, ThetaQ
from interp_commutators.pairs import (
    CouplePair,
    PairOperator,
    operator_pair_norm,
    pair_from_spec,
    random_operator,
)
from interp_commutators.weights import WeightFamily, weight_from_spec

# Variable de entorno que sustituye a output.dir
ENV_OUTPUT_DIR = "INTERP_COMMUTATORS_OUTPUT_DIR"

SECCIONES = ("grid", "tq", "pair", "src", "dst", "operator", "weight", "f", "method",
             "order", "solver", "harness", "output")
_CLAVES_GRID = {"t_min", "t_max", "n_nodes", "half_width_decades", "nodes_per_decade"}
_CLAVES_TQ = {"theta", "q"}
_CLAVES_PAR = {"norm0", "norm1", "ladder", "base", "shift"}
_CLAVES_NORMA = {"p", "scale"}
_CLAVES_PESO = {"kind", "c", "n", "x", "y"}
_CLAVES_HARNESS = {"seed", "trials", "grids", "weights", "workers", "burn_in", "dim",
                   "stability_factor", "growth_factor"}
_CLAVES_OUTPUT = {"dir", "formats"}
FORMATOS = ("json", "csv")


class ConfigError(Exception):
    """Excepción lanzada cuando hay un error en la configuración."""
    pass


def _rechazar_desconocidas(datos: dict, permitidas: set, seccion: str) -> None:
    if not isinstance(datos, dict):
        raise ConfigError(f"La sección '{seccion}' debe ser un objeto JSON")
    for clave in sorted(datos):
        if clave not in permitidas:
            raise ConfigError(f"Clave desconocida en la configuración: {seccion}.{clave}")


def _numero(datos: dict, clave: str, seccion: str, defecto=None, entero: bool = False):
    valor = datos.get(clave, defecto)
    if valor is None:
        raise ConfigError(f"Falta el campo obligatorio en la configuración: {seccion}.{clave}")
    if isinstance(valor, bool) or not isinstance(valor, (int, float)):
        raise ConfigError(f"Valor no numérico en {seccion}.{clave}: {valor!r}")
    if entero and int(valor) != valor:
        raise ConfigError(f"Se esperaba un entero en {seccion}.{clave}: {valor!r}")
    return int(valor) if entero else float(valor)


@dataclass(frozen=True)
class GridSpec:
    """Rejilla explícita (t_min, t_max, n_nodes)."""
    t_min: float = 1e-4
    t_max: float = 1e4
    n_nodes: int = 401

    @classmethod
    def desde_dict(cls, datos: dict, seccion: str = "grid") -> "GridSpec":
        _rechazar_desconocidas(datos, _CLAVES_GRID, seccion)
        if "half_width_decades" in datos or "nodes_per_decade" in datos:
            if {"t_min", "t_max", "n_nodes"} & set(datos):
                raise ConfigError(
                    f"{seccion}: use t_min/t_max/n_nodes o half_width_decades/nodes_per_decade"
                )
            try:
                g = symmetric_grid(
                    _numero(datos, "half_width_decades", seccion, 4.0),
                    _numero(datos, "nodes_per_decade", seccion, 50, entero=True),
                )
            except InterpError as e:
                raise ConfigError(f"{seccion}: {e}") from e
            return cls(g.t_min, g.t_max, g.n_nodes)
        spec = cls(
            _numero(datos, "t_min", seccion, cls.t_min),
            _numero(datos, "t_max", seccion, cls.t_max),
            _numero(datos, "n_nodes", seccion, cls.n_nodes, entero=True),
        )
        spec.build(seccion)
        return spec

    def build(self, seccion: str = "grid") -> LogGrid:
        try:
            return make_grid(self.t_min, self.t_max, self.n_nodes)
        except InterpError as e:
            raise ConfigError(f"{seccion}: {e}") from e


@dataclass(frozen=True)
class HarnessSpec:
    """Parámetros de los conjuntos de ensayos."""
    seed: int = 20240917
    trials: int = 20
    grids: Optional[tuple] = None
    weights: Optional[tuple] = None
    workers: int = 1
    burn_in: float = 1e3
    dim: int = 3
    stability_factor: float = 2.0
    growth_factor: float = 1.5


@dataclass(frozen=True)
class OutputSpec:
    """Directorio y formatos de salida."""
    dir: Path = Path("resultados")
    formats: tuple = FORMATOS


@dataclass
class RunConfig:
    """Configuración completa de una ejecución de la CLI."""
    grid: GridSpec = field(default_factory=GridSpec)
    tq: ThetaQ = field(default_factory=lambda: ThetaQ(0.5, 2.0))
    pair: CouplePair = field(default_factory=CouplePair.scalar)
    dst: Optional[CouplePair] = None
    operator: Any = None
    weight: dict = field(default_factory=lambda: {"kind": "log"})
    f: Optional[tuple] = None
    methods: tuple = ("fundamental", "solver")
    order: int = 2
    solver: SolverSettings = field(default_factory=SolverSettings)
    harness: HarnessSpec = field(default_factory=HarnessSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    echo: dict = field(default_factory=dict)
    pair_given: bool = False

    @classmethod
    def cargar(cls, config_path: Path) -> "RunConfig":
        """
        Carga la configuración desde un fichero JSON.

        Args:
            config_path: Ruta al fichero de configuración JSON.

        Returns:
            Instancia de RunConfig con los valores cargados.

        Raises:
            ConfigError: Si el fichero no existe, no es JSON válido, contiene claves
                desconocidas o valores inválidos (el mensaje nombra "seccion.clave").
        """
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError(f"El fichero de configuración no existe: {config_path}")
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Error parseando JSON: {e}") from e
        except OSError as e:
            raise ConfigError(f"Error leyendo fichero de configuración: {e}") from e
        return cls.desde_dict(data)

    @classmethod
    def desde_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Valida un diccionario ya parseado y construye la configuración."""
        if not isinstance(data, dict):
            raise ConfigError("La configuración debe ser un objeto JSON")
        _rechazar_desconocidas(data, set(SECCIONES), "config")
        if "pair" in data and "src" in data:
            raise ConfigError("config: 'pair' y 'src' son sinónimos; use solo uno")

        grid = GridSpec.desde_dict(data.get("grid", {}))
        tq = _leer_tq(data.get("tq", {}))
        par_datos = data.get("pair", data.get("src"))
        pair = _leer_par(par_datos, "pair") if par_datos is not None else CouplePair.scalar()
        dst = _leer_par(data["dst"], "dst") if "dst" in data else None
        if dst is not None and dst.dim != pair.dim and "operator" not in data:
            raise ConfigError("dst: dimensión distinta del par origen sin 'operator' explícito")
        operator = _leer_operador(data.get("operator"), pair, dst or pair)
        weight = _leer_peso(data.get("weight", {"kind": "log"}), "weight")
        f = _leer_vector(data["f"], pair.dim) if "f" in data else None
        methods = _leer_metodos(data.get("method", ["fundamental", "solver"]))
        order = data.get("order", 2)
        if isinstance(order, bool) or not isinstance(order, int) or order < 0:
            raise ConfigError(f"Valor inválido en config.order: {order!r}")

        return cls(
            grid=grid, tq=tq, pair=pair, dst=dst, operator=operator, weight=weight, f=f,
            methods=methods, order=order,
            solver=_leer_solver(data.get("solver", {})),
            harness=_leer_harness(data.get("harness", {}), weight),
            output=_leer_output(data.get("output", {})),
            echo=data,
            pair_given=par_datos is not None,
        )

    # Constructores ---------------------------------------------------------------

    def build_grid(self) -> LogGrid:
        return self.grid.build()

    @property
    def dst_pair(self) -> CouplePair:
        return self.dst if self.dst is not None else self.pair

    def build_weight(self) -> WeightFamily:
        return weight_from_spec(self.weight)

    def build_operator(self) -> PairOperator:
        """Operador configurado; "random" usa harness.seed."""
        src, dst = self.pair, self.dst_pair
        if self.operator in (None, "identity"):
            if src.dim != dst.dim:
                raise ConfigError("operator: la identidad requiere pares de igual dimensión")
            return operator_pair_norm(np.eye(dst.dim), src, dst)
        if self.operator == "random":
            return random_operator(np.random.default_rng(self.harness.seed), src, dst)
        return operator_pair_norm(np.array(self.operator, dtype=float), src, dst)

    def build_ensemble(self) -> EnsembleConfig:
        """
        Conjunto de ensayos de la sección harness.

        Sin par configurado (ni dst ni matriz explícita) el conjunto usa la escalera de
        dimensión harness.dim en lugar del par escalar de jnorm/commute.
        """
        h = self.harness
        grids = (tuple(g.build("harness.grids") for g in h.grids) if h.grids
                 else default_grids())
        operador = self.operator
        if operador == "random":
            operador = None
        try:
            return EnsembleConfig(
                seed=h.seed, trials=h.trials, grids=grids, tq=self.tq,
                weights=h.weights or (self.weight,), pair=self._ensemble_pair(), dst=self.dst,
                operator=operador, order=max(self.order, 1), dim=h.dim, burn_in=h.burn_in,
                settings=self.solver, workers=h.workers,
                stability_factor=h.stability_factor, growth_factor=h.growth_factor,
            )
        except InterpError as e:
            raise ConfigError(f"harness: {e}") from e

    def _ensemble_pair(self) -> Optional[CouplePair]:
        if self.pair_given or self.dst is not None or isinstance(self.operator, tuple):
            return self.pair
        return None

    def output_dir(self) -> Path:
        """output.dir salvo que la variable de entorno lo sustituya."""
        return Path(os.environ.get(ENV_OUTPUT_DIR) or self.output.dir)


def _leer_tq(datos: dict) -> ThetaQ:
    _rechazar_desconocidas(datos, _CLAVES_TQ, "tq")
    q = datos.get("q", 2.0)
    if q in ("inf", "Infinity"):
        q = math.inf
    elif isinstance(q, bool) or not isinstance(q, (int, float)):
        raise ConfigError(f"Valor inválido en tq.q: {q!r}")
    theta = _numero(datos, "theta", "tq", 0.5)
    if not 0.0 < theta < 1.0:
        raise ConfigError(f"Valor inválido en tq.theta: {theta} (debe estar en (0, 1))")
    if q < 1:
        raise ConfigError(f"Valor inválido en tq.q: {q} (debe ser >= 1)")
    return ThetaQ(theta, q)


def _leer_par(datos: dict, seccion: str) -> CouplePair:
    _rechazar_desconocidas(datos, _CLAVES_PAR, seccion)
    for extremo in ("norm0", "norm1"):
        if extremo in datos:
            _rechazar_desconocidas(datos[extremo], _CLAVES_NORMA, f"{seccion}.{extremo}")
    if "ladder" not in datos and not {"norm0", "norm1"} <= set(datos):
        raise ConfigError(f"{seccion}: se requieren norm0 y norm1 (o ladder)")
    try:
        return pair_from_spec(datos)
    except InterpError as e:
        raise ConfigError(f"{seccion}: {e}") from e


def _leer_operador(datos, src: CouplePair, dst: CouplePair):
    if datos is None or datos in ("identity", "random"):
        return datos
    if not isinstance(datos, list):
        raise ConfigError(f"Valor inválido en config.operator: {datos!r}")
    try:
        matriz = np.array(datos, dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config.operator: matriz no numérica ({e})") from e
    if matriz.shape != (dst.dim, src.dim):
        raise ConfigError(
            f"config.operator: forma {matriz.shape}, se esperaba ({dst.dim}, {src.dim})"
        )
    return tuple(tuple(float(v) for v in fila) for fila in matriz)


def _leer_peso(datos: dict, seccion: str) -> dict:
    _rechazar_desconocidas(datos, _CLAVES_PESO, seccion)
    try:
        weight_from_spec(datos)
    except InterpError as e:
        raise ConfigError(f"{seccion}.kind: {e}") from e
    return dict(datos)


def _leer_vector(datos, dim: int) -> tuple:
    if not isinstance(datos, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in datos
    ):
        raise ConfigError(f"Valor inválido en config.f: {datos!r}")
    if len(datos) != dim:
        raise ConfigError(f"config.f: longitud {len(datos)}, el par tiene dimensión {dim}")
    return tuple(float(v) for v in datos)


def _leer_metodos(datos) -> tuple:
    lista = [datos] if isinstance(datos, str) else datos
    if not isinstance(lista, list) or not lista:
        raise ConfigError(f"Valor inválido en config.method: {datos!r}")
    for m in lista:
        if m not in METHODS:
            raise ConfigError(f"Valor inválido en config.method: {m!r} (opciones: {METHODS})")
    return tuple(lista)


def _leer_solver(datos: dict) -> SolverSettings:
    permitidas = {f.name for f in fields(SolverSettings)}
    _rechazar_desconocidas(datos, permitidas, "solver")
    valores = {}
    for f in fields(SolverSettings):
        if f.name in datos:
            entero = f.name in ("iterations", "oracle_starts")
            valores[f.name] = _numero(datos, f.name, "solver", entero=entero)
    try:
        return SolverSettings(**valores)
    except InterpError as e:
        raise ConfigError(f"solver: {e}") from e


def _leer_harness(datos: dict, weight: dict) -> HarnessSpec:
    _rechazar_desconocidas(datos, _CLAVES_HARNESS, "harness")
    grids = None
    if "grids" in datos:
        if not isinstance(datos["grids"], list) or not datos["grids"]:
            raise ConfigError("harness.grids debe ser una lista no vacía")
        grids = tuple(GridSpec.desde_dict(g, "harness.grids") for g in datos["grids"])
    weights = None
    if "weights" in datos:
        if not isinstance(datos["weights"], list) or not datos["weights"]:
            raise ConfigError("harness.weights debe ser una lista no vacía")
        weights = tuple(_leer_peso(w, "harness.weights") for w in datos["weights"])
    enteros = {"seed": 20240917, "trials": 20, "workers": 1, "dim": 3}
    reales = {"burn_in": 1e3, "stability_factor": 2.0, "growth_factor": 1.5}
    valores = {k: _numero(datos, k, "harness", v, entero=True) for k, v in enteros.items()}
    valores.update({k: _numero(datos, k, "harness", v) for k, v in reales.items()})
    for clave in ("trials", "workers", "dim"):
        if valores[clave] < 1:
            raise ConfigError(f"Valor inválido en harness.{clave}: {valores[clave]}")
    return HarnessSpec(grids=grids, weights=weights, **valores)


def _leer_output(datos: dict) -> OutputSpec:
    _rechazar_desconocidas(datos, _CLAVES_OUTPUT, "output")
    formatos = datos.get("formats", list(FORMATOS))
    if not isinstance(formatos, list) or any(f not in FORMATOS for f in formatos):
        raise ConfigError(f"Valor inválido en output.formats: {formatos!r}")
    directorio = datos.get("dir", "resultados")
    if not isinstance(directorio, str) or not directorio:
        raise ConfigError(f"Valor inválido en output.dir: {directorio!r}")
    return OutputSpec(Path(directorio), tuple(formatos))
