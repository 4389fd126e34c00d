"""Operadores Omega_w, Omega_{n,w}, Omega^K y sus conmutadores con operadores lineales.

Todas las Omega usan el mismo selector determinista y cacheado, de modo que las
identidades de cancelación no se contaminan con ruido del selector.
"""

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from interp_commutators.exceptions import InvalidArgumentError
from interp_commutators.grid import GridFunction, LogGrid, cumulative_haar, integrate_haar
from interp_commutators.jmethod import (
    Representation,
    SolverSettings,
    ThetaQ,
    near_optimal_selector,
    represent_fundamental,
)
from interp_commutators.pairs import CouplePair, PairOperator, k_decompose_nodes
from interp_commutators.weights import WeightLike, hardy_average, weight_values

logger = logging.getLogger("interp_commutators")

SELECTOR_METHODS = ("solver", "fundamental")


@dataclass(frozen=True)
class SelectorConfig:
    """Configuración del selector casi óptimo compartida por todas las Omega."""
    grid: LogGrid
    tq: ThetaQ
    settings: SolverSettings = field(default_factory=SolverSettings)
    method: str = "solver"

    def __post_init__(self):
        if self.method not in SELECTOR_METHODS:
            raise InvalidArgumentError(f"Método de selector desconocido: {self.method}")

    @property
    def key(self) -> tuple:
        return (self.grid.key, self.tq.theta, self.tq.q, self.settings, self.method)


class SelectorCache:
    """Caché de selectores por (f, par, configuración); la inserción va serializada."""

    def __init__(self):
        self._datos: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def _clave(f: np.ndarray, pair: CouplePair, cfg: SelectorConfig) -> tuple:
        return (np.ascontiguousarray(f, dtype=float).tobytes(), pair.key, cfg.key)

    def get(self, f, pair: CouplePair, cfg: SelectorConfig) -> Representation:
        f = np.asarray(f, dtype=float)
        clave = self._clave(f, pair, cfg)
        with self._lock:
            rep = self._datos.get(clave)
            if rep is not None:
                self.hits += 1
                return rep
        if cfg.method == "fundamental":
            rep = represent_fundamental(f, pair, cfg.grid)
        else:
            rep = near_optimal_selector(f, pair, cfg.tq, cfg.grid, cfg.settings)
        with self._lock:
            # Otro hilo pudo insertar la misma clave; se conserva la primera
            rep = self._datos.setdefault(clave, rep)
            self.misses += 1
        return rep

    def clear(self) -> None:
        with self._lock:
            self._datos.clear()
            self.hits = self.misses = 0

    def __len__(self) -> int:
        return len(self._datos)


SELECTOR_CACHE = SelectorCache()


def select(f, pair: CouplePair, cfg: SelectorConfig) -> Representation:
    """Selector u_f desde la caché global del proceso."""
    return SELECTOR_CACHE.get(f, pair, cfg)


@dataclass(frozen=True)
class OmegaConfig:
    """Peso, orden n >= 1 y selector de una Omega_{n,w}."""
    weight: WeightLike
    selector: SelectorConfig
    order: int = 1

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise InvalidArgumentError(f"El orden debe ser un entero >= 1: {self.order}")


def _pesar(rep: Representation, w: WeightLike, order: int) -> np.ndarray:
    """(1/n!) sum_k u_k w(t_k)^n Delta."""
    wv = weight_values(w, rep.grid).values
    potencia = wv ** order if order > 1 else wv
    integrando = GridFunction(rep.grid, rep.u * potencia[:, None])
    total = np.atleast_1d(integrate_haar(integrando))
    return total / math.factorial(order) if order > 1 else total


def omega_n(f, cfg: OmegaConfig, pair: CouplePair) -> np.ndarray:
    """
    Omega_{n,w} f = (1/n!) sum_k u_{f,k} w(t_k)^n Delta.

    Raises:
        CertificationError: Si el selector no certifica el factor 2.
    """
    return _pesar(select(f, pair, cfg.selector), cfg.weight, cfg.order)


def omega(f, cfg: OmegaConfig, pair: CouplePair) -> np.ndarray:
    """Omega_w f = sum_k u_{f,k} w(t_k) Delta (orden 1)."""
    if cfg.order != 1:
        raise InvalidArgumentError(f"omega requiere orden 1 (recibido {cfg.order})")
    return omega_n(f, cfg, pair)


def _check_operator(T: PairOperator, f: np.ndarray) -> None:
    if f.shape != (T.src.dim,):
        raise InvalidArgumentError(
            f"f tiene dimensión {f.shape}, el operador espera ({T.src.dim},)"
        )


def commutator(T: PairOperator, w: WeightLike, f, sel: SelectorConfig, order: int = 1
               ) -> np.ndarray:
    """
    [T, Omega_{n,w}] f = T Omega_{n,w} f - Omega_{n,w} (T f).

    Args:
        T: Operador entre los pares origen y destino.
        w: Peso.
        f: Vector del par origen.
        sel: Selector compartido.
        order: Orden n de la Omega (1 por defecto).

    Returns:
        Vector del par destino.
    """
    f = np.asarray(f, dtype=float)
    _check_operator(T, f)
    cfg = OmegaConfig(w, sel, order)
    return T.apply(omega_n(f, cfg, T.src)) - omega_n(T.apply(f), cfg, T.dst)


def difference_representation(T: PairOperator, f, sel: SelectorConfig) -> Representation:
    """u~_k = T u_{f,k} - u_{Tf,k}; su integral de Haar es nula (ambas reconstruyen Tf)."""
    f = np.asarray(f, dtype=float)
    _check_operator(T, f)
    u_f = select(f, T.src, sel)
    u_tf = select(T.apply(f), T.dst, sel)
    diferencia = T.apply(u_f.u) - u_tf.u
    diferencia[-1] = 0.0
    return Representation(sel.grid, diferencia, T.dst, np.zeros(T.dst.dim))


def good_representation(T: PairOperator, w: WeightLike, f, sel: SelectorConfig
                        ) -> Representation:
    """
    Buena representación del conmutador por sumación por partes.

    v_k = u~_k (w - Pw)(t_k) + U_k w#(t_k), con U la primitiva de Haar de u~ y P en
    modo extensión (w constante da v = 0 exactamente).

    Returns:
        Representación en el par destino cuya f es su suma de Haar.
    """
    grid = sel.grid
    dif = difference_representation(T, f, sel)
    wv = weight_values(w, grid).values
    pw = hardy_average(w, grid, mode="extension").values
    primitiva = cumulative_haar(dif.as_grid_function()).values
    v = dif.u * (wv - pw)[:, None] + primitiva * (pw - wv)[:, None]
    v[-1] = 0.0
    rep = Representation(grid, v, T.dst, np.zeros(T.dst.dim))
    rep.f = rep.reconstruct()
    return rep


def higher_commutator(T: PairOperator, w: WeightLike, f, n: int, sel: SelectorConfig
                      ) -> np.ndarray:
    """
    Conmutador de orden superior C_{n,w} f por la recursión

        C_0 = T f,  C_n = [T, Omega_{n,w}] f - sum_{j=1}^{n-1} Omega_{j,w}(C_{n-j}),

    donde las Omega_{j,w} internas usan el selector del par destino.
    """
    if int(n) != n or n < 0:
        raise InvalidArgumentError(f"El orden debe ser un entero >= 0: {n}")
    f = np.asarray(f, dtype=float)
    _check_operator(T, f)
    C = [T.apply(f)]
    for m in range(1, n + 1):
        valor = commutator(T, w, f, sel, order=m)
        for j in range(1, m):
            valor = valor - omega_n(C[m - j], OmegaConfig(w, sel, j), T.dst)
        C.append(valor)
    return C[n]


def omega_k(f, w: WeightLike, pair: CouplePair, grid: LogGrid) -> np.ndarray:
    """
    Omega^K_w f: sumas de Haar de x0(t) w(t) bajo t = 1 menos x1(t) w(t) desde t = 1.

    Raises:
        UnsupportedPairError: Si el par no es l1/l1.
        InvalidArgumentError: Si t = 1 no es nodo de la rejilla.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (pair.dim,):
        raise InvalidArgumentError(f"f tiene dimensión {f.shape}, se esperaba ({pair.dim},)")
    uno = grid.unit_index()
    wv = weight_values(w, grid).values
    x0 = k_decompose_nodes(grid.nodes, f, pair)
    x1 = f[None, :] - x0
    integrando = np.where((np.arange(grid.n_nodes) < uno)[:, None], x0, -x1) * wv[:, None]
    return np.atleast_1d(integrate_haar(GridFunction(grid, integrando)))


def direct_bound(T: PairOperator, w: WeightLike, f, sel: SelectorConfig,
                 sup_w: Optional[float] = None) -> float:
    """
    Cota directa para w acotado: sup|w| (||T|| Phi(J(u_f)) + Phi(J(u_{Tf}))).
    """
    f = np.asarray(f, dtype=float)
    if sup_w is None:
        sup_w = float(np.max(np.abs(weight_values(w, sel.grid).values[:-1])))
    coste_f = select(f, T.src, sel).cost(sel.tq)
    coste_tf = select(T.apply(f), T.dst, sel).cost(sel.tq)
    return sup_w * (T.pair_norm * coste_f + coste_tf)
