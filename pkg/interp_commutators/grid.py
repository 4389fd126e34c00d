"""Discretización logarítmica de (0, inf) y reglas de cuadratura asociadas.

Todas las integrales usan la regla del rectángulo izquierdo sobre los intervalos
[t_k, t_{k+1}], de modo que el último nodo nunca aporta masa.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from interp_commutators.exceptions import InvalidArgumentError

# Tolerancia (en log t) para reconocer el nodo t = 1
_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class LogGrid:
    """Partición geométrica t_k = t_min * r^k de [t_min, t_max]."""
    t_min: float
    t_max: float
    n_nodes: int

    @cached_property
    def haar_step(self) -> float:
        """Paso Delta = ln r (adimensional)."""
        return math.log(self.t_max / self.t_min) / (self.n_nodes - 1)

    @cached_property
    def ratio(self) -> float:
        return math.exp(self.haar_step)

    @cached_property
    def nodes(self) -> np.ndarray:
        k = np.arange(self.n_nodes, dtype=float)
        t = np.exp(math.log(self.t_min) + k * self.haar_step)
        t[0] = self.t_min
        t[-1] = self.t_max
        # El nodo más cercano a 1 se fija exactamente para que log(1) = 0
        idx = int(np.argmin(np.abs(np.log(t))))
        if abs(math.log(t[idx])) < _UNIT_TOL:
            t[idx] = 1.0
        t.setflags(write=False)
        return t

    @cached_property
    def log_nodes(self) -> np.ndarray:
        return np.log(self.nodes)

    @cached_property
    def lebesgue_steps(self) -> np.ndarray:
        """sigma_k = t_{k+1} - t_k, k = 0..n-2."""
        return np.diff(self.nodes)

    @property
    def key(self) -> tuple:
        return (self.t_min, self.t_max, self.n_nodes)

    @property
    def width(self) -> float:
        """Anchura logarítmica ln(t_max / t_min)."""
        return math.log(self.t_max / self.t_min)

    def has_unit_node(self) -> bool:
        return bool(np.any(self.nodes == 1.0))

    def unit_index(self) -> int:
        """
        Índice del nodo t = 1.

        Raises:
            InvalidArgumentError: Si t = 1 no es un nodo de la rejilla.
        """
        idx = np.flatnonzero(self.nodes == 1.0)
        if idx.size == 0:
            raise InvalidArgumentError(f"t = 1 no es un nodo de la rejilla {self.key}")
        return int(idx[0])

    def index_of(self, t: float) -> int:
        """Índice del nodo más cercano a t (en escala logarítmica)."""
        return int(np.argmin(np.abs(self.log_nodes - math.log(t))))

    def stable_mask(self, burn_in: float) -> np.ndarray:
        """Nodos con t >= burn_in * t_min (fuera del transitorio de la cola)."""
        return self.nodes >= burn_in * self.t_min * (1.0 - 1e-12)


def make_grid(t_min: float, t_max: float, n_nodes: int) -> LogGrid:
    """
    Construye una rejilla logarítmica.

    Args:
        t_min: Extremo inferior (> 0).
        t_max: Extremo superior (> t_min).
        n_nodes: Número de nodos (>= 2).

    Returns:
        LogGrid determinista.

    Raises:
        InvalidArgumentError: Si el rango es degenerado o hay menos de dos nodos.
    """
    if not (math.isfinite(t_min) and math.isfinite(t_max)):
        raise InvalidArgumentError("Los extremos de la rejilla deben ser finitos")
    if t_min <= 0:
        raise InvalidArgumentError(f"t_min debe ser positivo: {t_min}")
    if t_max <= t_min:
        raise InvalidArgumentError(f"Se requiere t_min < t_max: ({t_min}, {t_max})")
    if int(n_nodes) != n_nodes or n_nodes < 2:
        raise InvalidArgumentError(f"n_nodes debe ser un entero >= 2: {n_nodes}")
    return LogGrid(float(t_min), float(t_max), int(n_nodes))


def symmetric_grid(half_width_decades: float, nodes_per_decade: int) -> LogGrid:
    """Rejilla [10^-d, 10^d] con número impar de nodos (t = 1 es nodo)."""
    n = 2 * int(round(half_width_decades * nodes_per_decade)) + 1
    return make_grid(10.0 ** (-half_width_decades), 10.0 ** half_width_decades, n)


@dataclass
class GridFunction:
    """Valores (escalares o vectoriales) de una función sobre los nodos de la rejilla."""
    grid: LogGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (1, 2) or self.values.shape[0] != self.grid.n_nodes:
            raise InvalidArgumentError(
                f"Se esperaban {self.grid.n_nodes} valores, recibido {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("GridFunction con valores no finitos")

    @classmethod
    def from_callable(cls, grid: LogGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, np.broadcast_to(fn(grid.nodes), (grid.n_nodes,)).astype(float))

    @classmethod
    def constant(cls, grid: LogGrid, c: float) -> "GridFunction":
        return cls(grid, np.full(grid.n_nodes, float(c)))

    def _check(self, other: "GridFunction") -> None:
        if other.grid != self.grid:
            raise InvalidArgumentError("Operación entre funciones de rejillas distintas")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)


def cumulative_haar(g: GridFunction) -> GridFunction:
    """
    Primitiva discreta t_k -> sum_{j<k} g(t_j) Delta (límite inferior t_min).

    Args:
        g: Función de rejilla (escalar o vectorial).

    Returns:
        GridFunction nula en t_0 cuyo último valor es integrate_haar(g).
    """
    vals = g.values
    acumulado = np.cumsum(vals[:-1], axis=0) * g.grid.haar_step
    cero = np.zeros((1,) + vals.shape[1:])
    return GridFunction(g.grid, np.concatenate([cero, acumulado], axis=0))


def integrate_haar(g: GridFunction) -> Union[float, np.ndarray]:
    """
    Discretiza la integral de g(s) ds/s con la regla izquierda.

    Se calcula como el último valor de cumulative_haar para que ambas coincidan
    bit a bit.
    """
    total = cumulative_haar(g).values[-1]
    return float(total) if np.ndim(total) == 0 else total


def lebesgue_prefixes(g: GridFunction, tail_moment: float) -> np.ndarray:
    """Vector de integrate_lebesgue_prefix(g, k, tail_moment) para todo k."""
    if g.values.ndim != 1:
        raise InvalidArgumentError("La integral de Lebesgue solo admite funciones escalares")
    parciales = np.cumsum(g.values[:-1] * g.grid.lebesgue_steps)
    return tail_moment + np.concatenate([[0.0], parciales])


def integrate_lebesgue_prefix(g: GridFunction, k: int, tail_moment: float) -> float:
    """
    Aproxima la integral de g(s) ds entre 0 y t_k.

    Args:
        g: Función escalar de rejilla.
        k: Índice del nodo.
        tail_moment: Integral entre 0 y t_min (exacta o por extensión g(t_min) t_min).

    Returns:
        tail_moment + sum_{j<k} g(t_j) sigma_j.
    """
    if not 0 <= k < g.grid.n_nodes:
        raise InvalidArgumentError(f"Índice de nodo fuera de rango: {k}")
    return float(lebesgue_prefixes(g, tail_moment)[k])


def extension_tail(g: GridFunction) -> float:
    """Cola por extensión constante: g(t_min) * t_min."""
    return float(g.values[0] * g.grid.t_min)
