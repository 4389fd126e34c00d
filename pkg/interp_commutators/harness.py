"""Verificación empírica de las cotas de conmutadores mediante conjuntos de ensayos.

Cada ensayo deriva su semilla como seed XOR índice, así que los ensayos son
independientes y pueden ejecutarse en paralelo; los registros se ordenan antes de
emitir el informe. "Acotado" se comprueba comparativamente: el máximo de los cocientes
varía a lo sumo un factor 2 entre rejillas, mientras la sonda de no acotación crece.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from interp_commutators import __version__
from interp_commutators.commutators import (
    OmegaConfig,
    SelectorConfig,
    commutator,
    difference_representation,
    good_representation,
    higher_commutator,
    omega,
    omega_k,
    select,
)
from interp_commutators.exceptions import DegenerateEnsembleError, InvalidArgumentError
from interp_commutators.exceptions import SingularMomentError
from interp_commutators.grid import GridFunction, LogGrid, integrate_haar, make_grid
from interp_commutators.grid import symmetric_grid
from interp_commutators.io_handler import escribir_csv, escribir_json
from interp_commutators.jmethod import (
    Representation,
    SolverSettings,
    ThetaQ,
    impose_cancellations,
    jnorm,
    moment_integrals,
    second_order_representation,
)
from interp_commutators.logging_config import LOGGER_NAME, worker_logging
from interp_commutators.pairs import (
    CouplePair,
    PairOperator,
    ladder_size,
    operator_pair_norm,
    random_operator,
)
from interp_commutators.weights import (
    DEFAULT_BURN_IN,
    WeightFamily,
    g_transform,
    hardy_average,
    w_norm,
    weight_from_spec,
)

logger = logging.getLogger(LOGGER_NAME)

SUITES = ("t1", "teoA", "higher", "probe", "kbridge")
DEGENERATE_TOL = 1e-12
LADDER_BASE = 4.0
MAX_REDRAWS = 5
KBRIDGE_TOL = 0.05
ALGEBRA_TOL = 1e-12
CLASSICAL_TOL = 1e-8
CANCELLATION_TOL = 1e-10
# Cociente residuo(n) / residuo(2n - 1) admitido para un residuo de primer orden
HALVING_RANGE = (2.0 / 1.5, 3.0)


def default_grids() -> tuple:
    """[1e-4, 1e4] y [1e-6, 1e6] con 50 nodos por década."""
    return (symmetric_grid(4, 50), symmetric_grid(6, 50))


@dataclass(frozen=True)
class EnsembleConfig:
    """
    Configuración de un conjunto de ensayos.

    Los pesos se guardan como especificaciones (dict) para que la configuración pueda
    enviarse a procesos trabajadores. operator es None (operador aleatorio normalizado),
    "identity" o una matriz como tupla de tuplas.
    """
    seed: int = 20240917
    trials: int = 20
    grids: tuple = field(default_factory=default_grids)
    tq: ThetaQ = ThetaQ(0.5, 2.0)
    weights: tuple = ({"kind": "log"},)
    pair: Optional[CouplePair] = None
    dst: Optional[CouplePair] = None
    operator: object = None
    order: int = 2
    dim: int = 3
    burn_in: float = DEFAULT_BURN_IN
    settings: SolverSettings = field(default_factory=SolverSettings)
    workers: int = 1
    stability_factor: float = 2.0
    growth_factor: float = 1.5

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgumentError(f"trials debe ser >= 1: {self.trials}")
        if not self.grids:
            raise InvalidArgumentError("Se necesita al menos una rejilla")
        if not self.weights:
            raise InvalidArgumentError("Se necesita al menos un peso")
        if self.order < 1:
            raise InvalidArgumentError(f"El orden debe ser >= 1: {self.order}")
        if self.dim < 1 or self.workers < 1:
            raise InvalidArgumentError("dim y workers deben ser >= 1")
        object.__setattr__(self, "grids", tuple(sorted(self.grids, key=lambda g: g.width)))

    @property
    def src_pair(self) -> CouplePair:
        """Par origen: el configurado o la escalera a_i = 1, b_i = 4^-i de dimensión dim."""
        return self.pair if self.pair is not None else CouplePair.ladder(self.dim - 1)

    @property
    def dst_pair(self) -> CouplePair:
        return self.dst if self.dst is not None else self.src_pair

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "grids": [list(g.key) for g in self.grids],
            "tq": self.tq.to_dict(),
            "weights": [dict(w) for w in self.weights],
            "pair": self.src_pair.to_dict(),
            "dst": self.dst_pair.to_dict(),
            "operator": self.operator if not isinstance(self.operator, tuple)
            else [list(r) for r in self.operator],
            "order": self.order,
            "dim": self.dim,
            "burn_in": self.burn_in,
            "settings": asdict(self.settings),
            "stability_factor": self.stability_factor,
            "growth_factor": self.growth_factor,
        }


@dataclass
class TrialRecord:
    """Numerador, denominador y cociente de un ensayo."""
    trial: int
    suite: str
    grid: tuple
    weight: str
    variant: str
    numerator: float
    denominator: float
    ratio: float
    degenerate: bool
    redraws: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = list(self.grid)
        return d

    def csv_row(self) -> list:
        return [self.suite, *self.grid, self.weight, self.variant, self.trial,
                self.numerator, self.denominator, self.ratio, int(self.degenerate)]


CSV_HEADER = ["suite", "t_min", "t_max", "n_nodes", "weight", "variant", "trial",
              "numerator", "denominator", "ratio", "degenerate"]


def make_record(trial: int, suite: str, grid: LogGrid, weight: str, variant: str,
                numerator: float, denominator: float, **kwargs) -> TrialRecord:
    """Forma el cociente; denominadores < 1e-12 se marcan como degenerados."""
    numerator, denominator = float(numerator), float(denominator)
    degenerado = not denominator >= DEGENERATE_TOL
    ratio = 0.0 if degenerado else numerator / denominator
    return TrialRecord(trial, suite, grid.key, weight, variant, numerator, denominator,
                       ratio, degenerado, **kwargs)


def estimate_constant(records: Iterable[TrialRecord]) -> float:
    """
    Constante empírica: máximo de los cocientes no degenerados.

    Raises:
        DegenerateEnsembleError: Si no hay ningún ensayo no degenerado.
    """
    return max_ratio_record(records).ratio


def max_ratio_record(records: Iterable[TrialRecord]) -> TrialRecord:
    """Ensayo que realiza el máximo cociente (procedencia de la constante)."""
    mejor = None
    for r in records:
        if r.degenerate:
            continue
        if mejor is None or r.ratio > mejor.ratio:
            mejor = r
    if mejor is None:
        raise DegenerateEnsembleError("Todos los ensayos tienen denominador degenerado")
    return mejor


@dataclass
class VerificationReport:
    """Resultado de un conjunto: registros por ensayo, diagnósticos y veredicto."""
    suite: str
    config: dict
    records: list
    diagnostics: dict = field(default_factory=dict)
    passed: bool = False
    wall_time: float = 0.0

    def select(self, variant: Optional[str] = None, grid: Optional[tuple] = None) -> list:
        return [r for r in self.records
                if (variant is None or r.variant == variant) and (grid is None or r.grid == grid)]

    def max_ratio(self, variant: Optional[str] = None, grid: Optional[tuple] = None
                  ) -> Optional[float]:
        try:
            return estimate_constant(self.select(variant, grid))
        except DegenerateEnsembleError:
            return None

    @property
    def degenerate_count(self) -> int:
        return sum(1 for r in self.records if r.degenerate)

    def maxima(self) -> dict:
        """Máximo por (variante, rejilla)."""
        claves = sorted({(r.variant, r.grid) for r in self.records})
        return {f"{v}@{g[0]:g}:{g[1]:g}:{g[2]}": self.max_ratio(v, g) for v, g in claves}

    def to_dict(self) -> dict:
        try:
            procedencia = max_ratio_record(self.records)
            c_est, c_trial = procedencia.ratio, procedencia.to_dict()
        except DegenerateEnsembleError:
            c_est, c_trial = None, None
        return {
            "version": __version__,
            "suite": self.suite,
            "config": self.config,
            "trials": [r.to_dict() for r in self.records],
            "max_ratio": c_est,
            "c_est_trial": c_trial,
            "max_ratio_by": self.maxima(),
            "degenerate_count": self.degenerate_count,
            "diagnostics": self.diagnostics,
            "pass": self.passed,
        }

    def write(self, out_dir: Path, formats: Sequence[str] = ("json", "csv")) -> list:
        """Escribe el informe JSON (sin tiempos, byte a byte reproducible) y la tabla CSV."""
        out_dir = Path(out_dir)
        rutas = []
        if "json" in formats:
            rutas.append(escribir_json(out_dir / f"{self.suite}_report.json", self.to_dict()))
        if "csv" in formats:
            rutas.append(escribir_csv(out_dir / f"{self.suite}_trials.csv", CSV_HEADER,
                                      [r.csv_row() for r in self.records]))
        return rutas


# Utilidades ----------------------------------------------------------------------


def _rng(cfg: EnsembleConfig, trial: int) -> np.random.Generator:
    return np.random.default_rng(cfg.seed ^ trial)


def _haar(grid: LogGrid, u: np.ndarray, factor: np.ndarray) -> np.ndarray:
    """sum_k u_k factor_k Delta."""
    return np.atleast_1d(integrate_haar(GridFunction(grid, u * factor[:, None])))


def _hardy_mode(w: WeightFamily) -> str:
    return "analytic" if w.exact_tail_moment is not None else "extension"


def _operator(cfg: EnsembleConfig, rng: np.random.Generator) -> PairOperator:
    src, dst = cfg.src_pair, cfg.dst_pair
    if cfg.operator is None:
        return random_operator(rng, src, dst)
    if cfg.operator == "identity":
        return operator_pair_norm(np.eye(dst.dim, src.dim), src, dst)
    return operator_pair_norm(np.array(cfg.operator, dtype=float), src, dst)


def _bumps(rng: np.random.Generator, grid: LogGrid, dim: int, count: int = 2) -> np.ndarray:
    """u aleatorio suave: count gaussianas en log t por coordenada, centros en [-3, 3]."""
    u = np.zeros((grid.n_nodes, dim))
    for i in range(dim):
        for _ in range(count):
            centro = rng.uniform(-3.0, 3.0)
            u[:, i] += rng.standard_normal() * np.exp(-0.5 * (grid.log_nodes - centro) ** 2)
    u[-1] = 0.0
    return u


def _representation(grid: LogGrid, u: np.ndarray, pair: CouplePair) -> Representation:
    rep = Representation(grid, u, pair, np.zeros(pair.dim))
    rep.f = rep.reconstruct()
    return rep


def _spread(valores: Sequence[Optional[float]]) -> float:
    """Cociente max/min de los máximos por rejilla (1 si todos son nulos)."""
    vals = [v for v in valores if v is not None]
    if not vals or max(vals) == 0.0:
        return 1.0
    if min(vals) == 0.0:
        return math.inf
    return max(vals) / min(vals)


def _growth(valores: Sequence[Optional[float]]) -> float:
    """Cociente entre el máximo en la rejilla más ancha y en la más estrecha."""
    if len(valores) < 2 or valores[0] is None or valores[-1] is None or valores[0] == 0.0:
        return math.nan
    return valores[-1] / valores[0]


def _per_grid(report: VerificationReport, variant: str, grids: Sequence[LogGrid]) -> list:
    return [report.max_ratio(variant, g.key) for g in grids]


def _run(cfg: EnsembleConfig, fn: Callable, jobs: list) -> list:
    """Ejecuta los ensayos (en paralelo si workers > 1) y ordena los registros."""
    registros = []
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers, initializer=worker_logging) as ex:
            futuros = {ex.submit(fn, cfg, *job): job for job in jobs}
            for futuro in as_completed(futuros):
                registros.extend(futuro.result())
    else:
        for job in jobs:
            registros.extend(fn(cfg, *job))
    return sorted(registros, key=lambda r: (r.grid, r.weight, r.variant, r.trial))


def _jobs(cfg: EnsembleConfig) -> list:
    return [(g, w, t) for g in cfg.grids for w in cfg.weights for t in range(cfg.trials)]


def _nombre(wspec: dict) -> str:
    return weight_from_spec(wspec).describe()


def _finalize(report: VerificationReport, inicio: float) -> VerificationReport:
    report.wall_time = time.perf_counter() - inicio
    logger.info(
        f"Suite {report.suite}: {len(report.records)} registros, "
        f"{report.degenerate_count} degenerados, pass={report.passed} "
        f"({report.wall_time:.1f} s)"
    )
    return report


def _all_degenerate(report: VerificationReport, variant: str) -> bool:
    return all(r.degenerate for r in report.select(variant))


# Teorema de representación con cancelación ---------------------------------------


def _trial_t1(cfg: EnsembleConfig, grid: LogGrid, wspec: dict, trial: int) -> list:
    rng = _rng(cfg, trial)
    w = weight_from_spec(wspec)
    wv = w.on(grid).values
    wn = w_norm(w, grid, cfg.burn_in)
    i_max = ladder_size(grid.t_max, LADDER_BASE)
    pair = CouplePair.ladder(i_max, LADDER_BASE)

    i = int(rng.integers(0, i_max + 1))
    centro = i * math.log(LADDER_BASE) + rng.uniform(-0.5, 0.5)
    amplitud = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
    u = np.zeros((grid.n_nodes, pair.dim))
    u[:-1, i] = amplitud * np.exp(-0.5 * (grid.log_nodes[:-1] - centro) ** 2)
    base = _representation(grid, u, pair)
    uno = GridFunction.constant(grid, 1.0)

    registros = []
    for variante, rep in (("cancel", impose_cancellations(base, [uno])), ("no_cancel", base)):
        f = _haar(grid, rep.u, wv)
        valor, _ = jnorm(f, pair, cfg.tq, grid, "solver", cfg.settings)
        registros.append(make_record(trial, "t1", grid, w.describe(), variante, valor,
                                     wn * rep.cost(cfg.tq), extras={"coordinate": i}))
    return registros


def verify_t1(cfg: EnsembleConfig) -> VerificationReport:
    """
    ||f|| <= c ||w||_W Phi(J(u)) para f = sum u w Delta con sum u Delta = 0.

    Se ejecuta sobre el par escalera (crece con la rejilla); la variante sin cancelación
    debe crecer al ensanchar la rejilla mientras la variante con cancelación es estable.
    """
    inicio = time.perf_counter()
    report = VerificationReport("t1", cfg.to_dict(), _run(cfg, _trial_t1, _jobs(cfg)))
    estable = _per_grid(report, "cancel", cfg.grids)
    sin = _per_grid(report, "no_cancel", cfg.grids)
    finitos = all(math.isfinite(r.ratio) for r in report.records)
    report.diagnostics = {
        "max_ratio_cancel": estable,
        "max_ratio_no_cancel": sin,
        "spread_cancel": _spread(estable),
        "growth_no_cancel": _growth(sin),
        "all_degenerate": _all_degenerate(report, "cancel"),
    }
    ok = finitos and not report.diagnostics["all_degenerate"]
    if len(cfg.grids) > 1:
        ok = ok and _spread(estable) <= cfg.stability_factor
        ok = ok and _growth(sin) >= cfg.growth_factor
    report.passed = bool(ok)
    return _finalize(report, inicio)


# Conmutador de primer orden --------------------------------------------------------


def _trial_teoA(cfg: EnsembleConfig, grid: LogGrid, wspec: dict, trial: int) -> list:
    rng = _rng(cfg, trial)
    w = weight_from_spec(wspec)
    wn = w_norm(w, grid, cfg.burn_in)
    src, dst = cfg.src_pair, cfg.dst_pair
    f = rng.standard_normal(src.dim)
    T = _operator(cfg, rng)
    sel = SelectorConfig(grid, cfg.tq, cfg.settings)

    conm = commutator(T, w, f, sel)
    numerador, _ = jnorm(conm, dst, cfg.tq, grid, "solver", cfg.settings)
    coste_f = select(f, src, sel).cost(cfg.tq)
    denominador = T.pair_norm * wn * coste_f
    pw = hardy_average(w, grid, _hardy_mode(w))
    conm_pw = commutator(T, pw, f, sel)
    numerador_pw, _ = jnorm(conm_pw, dst, cfg.tq, grid, "solver", cfg.settings)
    denominador_pw = T.pair_norm * w_norm(pw, grid, cfg.burn_in) * coste_f
    buena = good_representation(T, w, f, sel)
    dif = difference_representation(T, f, sel)
    extras = {
        "cancellation": float(np.max(np.abs(dif.reconstruct()))),
        "residual": float(np.max(np.abs(buena.f - conm))),
    }
    return [
        make_record(trial, "teoA", grid, w.describe(), "commutator", numerador, denominador,
                    extras=extras),
        make_record(trial, "teoA", grid, w.describe(), "good_rep", buena.cost(cfg.tq),
                    denominador),
        make_record(trial, "teoA", grid, w.describe(), "commutator_pw", numerador_pw,
                    denominador_pw),
    ]


def residual_halving(cfg: EnsembleConfig, wspec: dict, grid: Optional[LogGrid] = None,
                     trial: int = 0) -> float:
    """
    Cociente residuo(n) / residuo(2n - 1) de la buena representación en una instancia
    fija; vale aproximadamente 2 para un residuo de primer orden.
    """
    grid = grid or cfg.grids[0]
    fina = make_grid(grid.t_min, grid.t_max, 2 * grid.n_nodes - 1)
    w = weight_from_spec(wspec)
    residuos = []
    for g in (grid, fina):
        rng = _rng(cfg, trial)
        f = rng.standard_normal(cfg.src_pair.dim)
        T = _operator(cfg, rng)
        sel = SelectorConfig(g, cfg.tq, cfg.settings)
        residuos.append(
            float(np.max(np.abs(good_representation(T, w, f, sel).f - commutator(T, w, f, sel))))
        )
    if residuos[0] <= DEGENERATE_TOL and residuos[1] <= DEGENERATE_TOL:
        return 1.0
    if residuos[1] == 0.0:
        return math.inf if residuos[0] > 0 else 1.0
    return residuos[0] / residuos[1]


def halving_ok(halving: float) -> bool:
    """Residuo nulo (cociente 1) o convergencia de primer orden dentro de HALVING_RANGE."""
    if halving == 1.0:
        return True
    return HALVING_RANGE[0] <= halving <= HALVING_RANGE[1]


def verify_teoA(cfg: EnsembleConfig) -> VerificationReport:
    """
    ||[T, Omega_w] f|| <= c ||T|| ||w||_W ||f|| con la sonda de no acotación como
    contraste en las mismas rejillas.
    """
    inicio = time.perf_counter()
    report = VerificationReport("teoA", cfg.to_dict(), _run(cfg, _trial_teoA, _jobs(cfg)))
    maximos = _per_grid(report, "commutator", cfg.grids)
    maximos_pw = _per_grid(report, "commutator_pw", cfg.grids)
    sonda = probe_unboundedness(cfg.grids, cfg.tq, cfg.settings)
    cancelacion = max((r.extras.get("cancellation", 0.0) for r in report.records), default=0.0)
    halving = residual_halving(cfg, cfg.weights[0])
    report.diagnostics = {
        "max_ratio_commutator": maximos,
        "max_ratio_good_rep": _per_grid(report, "good_rep", cfg.grids),
        "max_ratio_commutator_pw": maximos_pw,
        "spread": _spread(maximos),
        "spread_pw": _spread(maximos_pw),
        "probe_growth": sonda.diagnostics["omega_growth"],
        "probe_monotone": sonda.diagnostics["monotone"],
        "max_cancellation": cancelacion,
        "max_residual": max((r.extras.get("residual", 0.0) for r in report.records),
                            default=0.0),
        "residual_halving": halving,
        "all_degenerate": _all_degenerate(report, "commutator"),
    }
    ok = all(math.isfinite(r.ratio) for r in report.records)
    ok = ok and not report.diagnostics["all_degenerate"]
    ok = ok and cancelacion <= CANCELLATION_TOL
    ok = ok and halving_ok(halving)
    if len(cfg.grids) > 1:
        ok = ok and _spread(maximos) <= cfg.stability_factor
        ok = ok and _spread(maximos_pw) <= cfg.stability_factor
        ok = ok and sonda.diagnostics["omega_growth"] >= cfg.growth_factor
        ok = ok and sonda.diagnostics["monotone"]
    report.passed = bool(ok)
    return _finalize(report, inicio)


# Órdenes superiores ------------------------------------------------------------------


def cancellation_moments(w: WeightFamily, grid: LogGrid, n: int, mode: str = "auto") -> list:
    """
    Lista de momentos de cancelación de orden n.

    n = 2: {1, w, Pw}. n >= 3: w^k y Pw^k (k = 0..n-1) junto con los mixtos w^(n-k) Pw^k
    (k = 1..n-1).
    """
    wv = w.on(grid).values
    pw = hardy_average(w, grid, mode).values
    uno = np.ones(grid.n_nodes)
    if n <= 2:
        return [GridFunction(grid, v) for v in (uno, wv, pw)]
    lista = [uno] + [wv ** k for k in range(1, n)] + [pw ** k for k in range(1, n)]
    lista += [wv ** (n - k) * pw ** k for k in range(1, n)]
    return [GridFunction(grid, v) for v in lista]


def product_moments(w0: WeightFamily, w1: WeightFamily, grid: LogGrid) -> list:
    """{1, w0, w1, Pw0, Pw1} para el teorema del producto."""
    lista = [np.ones(grid.n_nodes), w0.on(grid).values, w1.on(grid).values,
             hardy_average(w0, grid, _hardy_mode(w0)).values,
             hardy_average(w1, grid, _hardy_mode(w1)).values]
    return [GridFunction(grid, v) for v in lista]


def _cancelled(rng: np.random.Generator, grid: LogGrid, pair: CouplePair, momentos: list
               ) -> tuple[Representation, int]:
    """Representación aleatoria con los momentos anulados; se redibuja si es singular."""
    for intento in range(MAX_REDRAWS + 1):
        base = _representation(grid, _bumps(rng, grid, pair.dim), pair)
        try:
            return impose_cancellations(base, momentos, reduce_dependent=True), intento
        except SingularMomentError:
            logger.warning(f"Sistema de momentos singular; se redibuja (intento {intento + 1})")
    raise SingularMomentError(f"Sistema singular tras {MAX_REDRAWS} redibujados")


def _segundo_peso(cfg: EnsembleConfig, wspec: dict) -> WeightFamily:
    otros = [s for s in cfg.weights if s != wspec]
    return weight_from_spec(otros[0]) if otros else WeightFamily.sin_log()


def _trial_higher(cfg: EnsembleConfig, grid: LogGrid, wspec: dict, trial: int) -> list:
    rng = _rng(cfg, trial)
    n = cfg.order
    w = weight_from_spec(wspec)
    modo = _hardy_mode(w)
    wn = w_norm(w, grid, cfg.burn_in)
    src, dst = cfg.src_pair, cfg.dst_pair
    nombre = w.describe()
    registros = []

    # (a) representación con la lista completa de cancelaciones
    rep, redibujos = _cancelled(rng, grid, src, cancellation_moments(w, grid, n, modo))
    coste = rep.cost(cfg.tq)
    wv = w.on(grid).values
    pw = hardy_average(w, grid, modo).values
    for variante, factor in (("pw_power", pw ** n), ("w_power", wv ** n)):
        valor, _ = jnorm(_haar(grid, rep.u, factor), src, cfg.tq, grid, "solver", cfg.settings)
        registros.append(make_record(trial, "higher", grid, nombre, variante, valor,
                                     wn ** n * coste, redraws=redibujos))
    if n == 2:
        # Segundo estimador: U con Haar-sum = sum u (Pw)^2 Delta salvo O(Delta)
        U = second_order_representation(rep, w)
        directa = _haar(grid, rep.u, hardy_average(w, grid, "extension").values ** 2)
        registros.append(make_record(
            trial, "higher", grid, nombre, "second_order", U.cost(cfg.tq), wn ** 2 * coste,
            redraws=redibujos, extras={"second_order_gap": float(np.max(np.abs(U.f - directa)))},
        ))

    # (b) conmutador de orden n
    f = rng.standard_normal(src.dim)
    T = _operator(cfg, rng)
    sel = SelectorConfig(grid, cfg.tq, cfg.settings)
    C = higher_commutator(T, w, f, n, sel)
    valor, _ = jnorm(C, dst, cfg.tq, grid, "solver", cfg.settings)
    registros.append(make_record(trial, "higher", grid, nombre, "commutator", valor,
                                 T.pair_norm * wn ** n * select(f, src, sel).cost(cfg.tq)))

    # (c) producto w0 w1
    w1 = _segundo_peso(cfg, wspec)
    rep, redibujos = _cancelled(rng, grid, src, product_moments(w, w1, grid))
    norma = max(wn, w_norm(w1, grid, cfg.burn_in))
    valor, _ = jnorm(_haar(grid, rep.u, wv * w1.on(grid).values), src, cfg.tq, grid,
                     "solver", cfg.settings)
    registros.append(make_record(trial, "higher", grid, f"{nombre}*{w1.describe()}",
                                 "product", valor, norma ** 2 * rep.cost(cfg.tq),
                                 redraws=redibujos))
    return registros


def classical_reduction_residual(grid: LogGrid, n: int, seed: int = 0) -> float:
    """
    Para w = log con Pw = log - 1: tras anular sum u w^k Delta (k = 0..n-1) devuelve el
    mayor momento relativo de grado logarítmico <= n-1 que involucra Pw.
    """
    if n < 2:
        raise InvalidArgumentError(f"La reducción clásica requiere n >= 2: {n}")
    rng = np.random.default_rng(seed)
    pair = CouplePair.scalar()
    w = WeightFamily.log()
    wv = w.on(grid).values
    pw = hardy_average(w, grid, "analytic").values
    base = _representation(grid, _bumps(rng, grid, 1, count=n + 1), pair)
    rep = impose_cancellations(base, [GridFunction(grid, wv ** k) for k in range(n)])
    comprobados = [pw ** k for k in range(1, n)]
    comprobados += [wv ** a * pw ** b for a in range(1, n) for b in range(1, n) if a + b <= n - 1]
    peor = 0.0
    for m in comprobados:
        momento = float(moment_integrals(rep.u, grid, [GridFunction(grid, m)])[0, 0])
        escala = float(np.sum(np.abs(rep.u[:-1, 0] * m[:-1])) * grid.haar_step)
        peor = max(peor, abs(momento) / max(escala, 1e-300))
    return peor


def _algebra_checks(cfg: EnsembleConfig, grid: LogGrid, wspec: dict) -> dict:
    """Homogeneidad C_{n,2w} = 2^n C_{n,w} y linealidad de [T, Omega_w] en w."""
    rng = _rng(cfg, 0)
    w = weight_from_spec(wspec)
    f = rng.standard_normal(cfg.src_pair.dim)
    T = _operator(cfg, rng)
    sel = SelectorConfig(grid, cfg.tq, cfg.settings)
    n = cfg.order
    C = higher_commutator(T, w, f, n, sel)
    C2 = higher_commutator(T, w.scaled(2.0), f, n, sel)
    escala = max(float(np.max(np.abs(C2))), 1e-300)
    homogeneidad = float(np.max(np.abs(C2 - 2.0 ** n * C))) / escala
    otro = WeightFamily.sin_log()
    suma = commutator(T, w + otro, f, sel)
    partes = commutator(T, w, f, sel) + commutator(T, otro, f, sel)
    escala = max(float(np.max(np.abs(suma))), float(np.max(np.abs(partes))), 1e-300)
    linealidad = float(np.max(np.abs(suma - partes))) / escala
    return {"homogeneity_error": homogeneidad, "linearity_error": linealidad}


def verify_higher(cfg: EnsembleConfig, n: Optional[int] = None) -> VerificationReport:
    """
    Suites de orden superior: (a) representación con cancelaciones, (b) conmutador
    C_{n,w} y (c) teorema del producto, junto con las comprobaciones algebraicas exactas
    y la reducción de momentos del caso clásico.
    """
    if n is not None and n != cfg.order:
        cfg = replace(cfg, order=n)
    inicio = time.perf_counter()
    report = VerificationReport("higher", cfg.to_dict(), _run(cfg, _trial_higher, _jobs(cfg)))
    variantes = ("pw_power", "w_power", "commutator", "product")
    maximos = {v: _per_grid(report, v, cfg.grids) for v in variantes}
    diagnostics = {f"max_ratio_{v}": maximos[v] for v in variantes}
    diagnostics.update({f"spread_{v}": _spread(maximos[v]) for v in variantes})
    diagnostics.update(_algebra_checks(cfg, cfg.grids[0], cfg.weights[0]))
    diagnostics["classical_reduction"] = classical_reduction_residual(cfg.grids[0], cfg.order,
                                                                      cfg.seed)
    if cfg.order == 2:
        diagnostics["max_ratio_second_order"] = _per_grid(report, "second_order", cfg.grids)
        diagnostics["max_second_order_gap"] = max(
            (r.extras.get("second_order_gap", 0.0) for r in report.records), default=0.0
        )
    diagnostics["redraws"] = sum(r.redraws for r in report.records)
    diagnostics["all_degenerate"] = _all_degenerate(report, "commutator")
    report.diagnostics = diagnostics

    ok = all(math.isfinite(r.ratio) for r in report.records)
    ok = ok and not diagnostics["all_degenerate"]
    ok = ok and diagnostics["homogeneity_error"] <= ALGEBRA_TOL
    ok = ok and diagnostics["linearity_error"] <= ALGEBRA_TOL
    ok = ok and diagnostics["classical_reduction"] <= CLASSICAL_TOL
    if len(cfg.grids) > 1:
        ok = ok and all(_spread(maximos[v]) <= cfg.stability_factor for v in variantes)
    report.passed = bool(ok)
    return _finalize(report, inicio)


# Sonda de no acotación -----------------------------------------------------------------


def _probe_grid(grid: LogGrid, tq: ThetaQ, settings: SolverSettings, w: WeightFamily,
                base: float) -> list:
    i_max = ladder_size(grid.t_max, base)
    src = CouplePair.ladder(i_max, base)
    dst = CouplePair.ladder(i_max, base, shift=1)
    T = operator_pair_norm(np.eye(src.dim), src, dst)
    sel = SelectorConfig(grid, tq, settings)
    registros = []
    for i in range(i_max + 1):
        e = np.zeros(src.dim)
        e[i] = 1.0
        norma_e, _ = jnorm(e, src, tq, grid, "solver", settings)
        om = omega(e, OmegaConfig(w, sel), src)
        valor_om, _ = jnorm(om, src, tq, grid, "solver", settings)
        c2 = commutator(T, w, e, sel, order=2)
        valor_c2, _ = jnorm(c2, dst, tq, grid, "solver", settings)
        h2 = higher_commutator(T, w, e, 2, sel)
        valor_h2, _ = jnorm(h2, dst, tq, grid, "solver", settings)
        for variante, valor in (("omega", valor_om), ("commutator2", valor_c2),
                                ("c2", valor_h2)):
            registros.append(make_record(i, "probe", grid, w.describe(), variante, valor,
                                         norma_e))
    return registros


def probe_unboundedness(
    grids: Sequence[LogGrid],
    tq: ThetaQ,
    settings: Optional[SolverSettings] = None,
    w: Optional[WeightFamily] = None,
    base: float = LADDER_BASE,
    config: Optional[dict] = None,
) -> VerificationReport:
    """
    Tabla de ||Omega_w e_i|| / ||e_i||, ||[T, Omega_{2,w}] e_i|| / ||e_i|| y
    ||C_{2,w} e_i|| / ||e_i|| sobre el par escalera a_i = 1, b_i = base^-i, con T la
    identidad hacia la escalera desplazada (||T|| = 1).

    El informe pasa si los cocientes de Omega crecen estrictamente en i = 1..5 y ninguno
    disminuye al ensanchar la rejilla.
    """
    inicio = time.perf_counter()
    settings = settings or SolverSettings()
    w = w or WeightFamily.log()
    grids = sorted(grids, key=lambda g: g.width)
    registros = []
    for grid in grids:
        registros.extend(_probe_grid(grid, tq, settings, w, base))
    echo = config or {"grids": [list(g.key) for g in grids], "tq": tq.to_dict(),
                      "weight": w.describe(), "base": base, "settings": asdict(settings)}
    report = VerificationReport("probe", echo, registros)

    def cocientes(variante: str, grid: LogGrid) -> list:
        return [r.ratio for r in report.select(variante, grid.key)]

    monotono = True
    for grid in grids:
        om = cocientes("omega", grid)[1:6]
        monotono = monotono and all(b > a for a, b in zip(om, om[1:]))
    no_decrece = True
    for estrecha, ancha in zip(grids, grids[1:]):
        a, b = cocientes("omega", estrecha), cocientes("omega", ancha)
        no_decrece = no_decrece and all(y >= x * (1 - 1e-6) for x, y in zip(a, b))
    report.diagnostics = {
        "omega_growth": _growth(_per_grid(report, "omega", grids)),
        "commutator2_growth": _growth(_per_grid(report, "commutator2", grids)),
        "c2_growth": _growth(_per_grid(report, "c2", grids)),
        "monotone": bool(monotono),
        "widening_nondecreasing": bool(no_decrece),
    }
    report.passed = bool(monotono and no_decrece)
    return _finalize(report, inicio)


# Puente con el método K ----------------------------------------------------------------


def _trial_kbridge(cfg: EnsembleConfig, grid: LogGrid, wspec: dict, trial: int) -> list:
    rng = _rng(cfg, trial)
    w = weight_from_spec(wspec)
    d = cfg.dim
    a = rng.uniform(0.5, 2.0, d)
    umbrales = np.exp(rng.uniform(-grid.width / 4.0, grid.width / 4.0, d))
    pair = CouplePair.diagonal(a, a / umbrales)
    f = rng.standard_normal(d)
    sel = SelectorConfig(grid, cfg.tq, cfg.settings, method="fundamental")
    k = omega_k(f, w, pair, grid)
    om = omega(f, OmegaConfig(g_transform(w, grid), sel), pair)
    return [make_record(trial, "kbridge", grid, w.describe(), "relative_error",
                        np.max(np.abs(k + om)), np.max(np.abs(om)))]


def verify_kbridge(cfg: EnsembleConfig) -> VerificationReport:
    """Omega^K_w f frente a -Omega_{Gw} f con el selector del lema fundamental."""
    inicio = time.perf_counter()
    report = VerificationReport("kbridge", cfg.to_dict(), _run(cfg, _trial_kbridge, _jobs(cfg)))
    peor = report.max_ratio("relative_error")
    report.diagnostics = {"max_relative_error": peor, "tolerance": KBRIDGE_TOL}
    report.passed = peor is not None and peor <= KBRIDGE_TOL
    return _finalize(report, inicio)


def run_suite(suite: str, cfg: EnsembleConfig) -> VerificationReport:
    """Despacha una suite por nombre."""
    if suite == "t1":
        return verify_t1(cfg)
    if suite == "teoA":
        return verify_teoA(cfg)
    if suite == "higher":
        return verify_higher(cfg)
    if suite == "probe":
        return probe_unboundedness(cfg.grids, cfg.tq, cfg.settings,
                                   weight_from_spec(cfg.weights[0]), config=cfg.to_dict())
    if suite == "kbridge":
        return verify_kbridge(cfg)
    raise InvalidArgumentError(f"Suite desconocida: {suite} (opciones: {', '.join(SUITES)})")
