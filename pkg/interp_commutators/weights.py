"""Cálculo en el espacio W: promedio de Hardy P, transformada sharp, seminormas y
descomposiciones.

Los supremos de las normas se toman sobre los nodos t >= burn_in * t_min; por debajo
la cola de extensión contamina P.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from interp_commutators.exceptions import InvalidArgumentError
from interp_commutators.grid import (
    GridFunction,
    LogGrid,
    extension_tail,
    lebesgue_prefixes,
    make_grid,
)

logger = logging.getLogger("interp_commutators")

DEFAULT_BURN_IN = 1e3
HARDY_MODES = ("auto", "extension", "exact", "analytic")

Fn = Callable[[np.ndarray], np.ndarray]


def _power_log_tail(n: int) -> Fn:
    """Integral entre 0 y t de (ln s)^n: t * sum_j (-1)^(n-j) n!/j! (ln t)^j."""
    coefs = [(-1) ** (n - j) * math.factorial(n) / math.factorial(j) for j in range(n + 1)]

    def tail(t: np.ndarray) -> np.ndarray:
        lt = np.log(t)
        return t * sum(c * lt ** j for j, c in enumerate(coefs))

    return tail


@dataclass
class WeightFamily:
    """
    Peso escalar w(t) evaluable sobre cualquier rejilla.

    kind identifica la familia (constant, log, power_log, phi_log, sin_log, samples,
    callable, sum, scaled). exact_tail_moment, si existe, es t -> integral de w entre 0 y t.
    """
    kind: str
    fn: Optional[Fn] = None
    exact_tail_moment: Optional[Fn] = None
    dphi: Optional[Fn] = None
    params: dict = field(default_factory=dict)
    sampled: Optional[GridFunction] = None

    def __post_init__(self):
        if self.exact_tail_moment is not None and self.fn is not None:
            self._verificar_cola()

    def _verificar_cola(self) -> None:
        """Contrasta la cola cerrada con la cuadratura en una rejilla de referencia."""
        ref = make_grid(1e-3, 1e3, 601)
        vals = np.asarray(self.fn(ref.nodes), dtype=float)
        cerrada = self.exact_tail_moment(ref.nodes)
        numerica = cerrada[0] + np.concatenate(
            [[0.0], np.cumsum(vals[:-1] * ref.lebesgue_steps)]
        )
        escala = np.concatenate([[0.0], np.cumsum(np.abs(vals[:-1]) * ref.lebesgue_steps)])
        tolerancia = 4.0 * (ref.ratio - 1.0) * escala + 1e-9 * (1.0 + np.abs(cerrada))
        if np.any(np.abs(cerrada - numerica) > tolerancia):
            raise InvalidArgumentError(
                f"La cola exacta de la familia '{self.kind}' no concuerda con la cuadratura"
            )

    # Constructores de familias ------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "WeightFamily":
        c = float(c)
        return cls(
            "constant",
            fn=lambda t: np.full_like(t, c, dtype=float),
            exact_tail_moment=lambda t: c * t,
            dphi=lambda x: np.zeros_like(x, dtype=float),
            params={"c": c},
        )

    @classmethod
    def log(cls) -> "WeightFamily":
        return cls(
            "log",
            fn=np.log,
            exact_tail_moment=lambda t: t * (np.log(t) - 1.0),
            dphi=lambda x: np.ones_like(x, dtype=float),
        )

    @classmethod
    def power_log(cls, n: int) -> "WeightFamily":
        if n < 1:
            raise InvalidArgumentError(f"power_log requiere n >= 1: {n}")
        return cls(
            "power_log",
            fn=lambda t: np.log(t) ** n,
            exact_tail_moment=_power_log_tail(n),
            dphi=lambda x: n * x ** (n - 1),
            params={"n": n},
        )

    @classmethod
    def sin_log(cls) -> "WeightFamily":
        return cls(
            "sin_log",
            fn=lambda t: np.sin(np.log(t)),
            exact_tail_moment=lambda t: t * (np.sin(np.log(t)) - np.cos(np.log(t))) / 2.0,
            dphi=np.cos,
        )

    @classmethod
    def phi_log(cls, phi: Fn, dphi: Optional[Fn] = None, name: str = "phi") -> "WeightFamily":
        """w(t) = phi(log t) con phi Lipschitz."""
        return cls("phi_log", fn=lambda t: phi(np.log(t)), dphi=dphi, params={"phi": name})

    @classmethod
    def phi_sampled(cls, xs: Sequence[float], ys: Sequence[float]) -> "WeightFamily":
        """phi lineal a trozos por muestras (x_i, y_i); su derivada es la pendiente exacta."""
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
            raise InvalidArgumentError(
                "phi muestreada: se requieren x crecientes y len(x) == len(y)"
            )
        pendientes = np.diff(y) / np.diff(x)

        def dphi(v: np.ndarray) -> np.ndarray:
            idx = np.clip(np.searchsorted(x, v, side="right") - 1, 0, pendientes.size - 1)
            d = pendientes[idx]
            # Fuera del soporte phi se extiende constante
            return np.where((v < x[0]) | (v > x[-1]), 0.0, d)

        return cls.phi_log(lambda v: np.interp(v, x, y), dphi=dphi, name="sampled")

    @classmethod
    def samples(cls, g: GridFunction) -> "WeightFamily":
        return cls("samples", sampled=g)

    @classmethod
    def from_callable(cls, name: str, fn: Fn, tail: Optional[Fn] = None) -> "WeightFamily":
        return cls(name, fn=fn, exact_tail_moment=tail)

    # Álgebra -------------------------------------------------------------------

    def __add__(self, other: "WeightFamily") -> "WeightFamily":
        if self.sampled is not None or other.sampled is not None:
            grid = _grid_of(self, other)
            return WeightFamily.samples(self.on(grid) + other.on(grid))
        cola = None
        if self.exact_tail_moment is not None and other.exact_tail_moment is not None:
            c0, c1 = self.exact_tail_moment, other.exact_tail_moment
            cola = lambda t: c0(t) + c1(t)  # noqa: E731
        f0, f1 = self.fn, other.fn
        return WeightFamily("sum", fn=lambda t: f0(t) + f1(t), exact_tail_moment=cola)

    def scaled(self, lam: float) -> "WeightFamily":
        lam = float(lam)
        if self.sampled is not None:
            return WeightFamily.samples(self.sampled * lam)
        cola = None
        if self.exact_tail_moment is not None:
            c0 = self.exact_tail_moment
            cola = lambda t: lam * c0(t)  # noqa: E731
        dphi = None
        if self.dphi is not None:
            d0 = self.dphi
            dphi = lambda x: lam * d0(x)  # noqa: E731
        f0 = self.fn
        return WeightFamily(
            "scaled", fn=lambda t: lam * f0(t), exact_tail_moment=cola, dphi=dphi,
            params={"lambda": lam, "base": self.kind},
        )

    # Evaluación ----------------------------------------------------------------

    def on(self, grid: LogGrid) -> GridFunction:
        if self.sampled is not None:
            if self.sampled.grid != grid:
                raise InvalidArgumentError("Peso muestreado evaluado en otra rejilla")
            return self.sampled
        return GridFunction(grid, np.asarray(self.fn(grid.nodes), dtype=float))

    def describe(self) -> str:
        if self.params:
            extra = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
            return f"{self.kind}({extra})"
        return self.kind


def _grid_of(a: WeightFamily, b: WeightFamily) -> LogGrid:
    return (a.sampled or b.sampled).grid


WeightLike = Union[WeightFamily, GridFunction]


def weight_values(w: WeightLike, grid: LogGrid) -> GridFunction:
    """Muestras de w sobre la rejilla (las funciones de rejilla se validan y pasan tal cual)."""
    if isinstance(w, GridFunction):
        if w.grid != grid:
            raise InvalidArgumentError("Función de rejilla evaluada en otra rejilla")
        return w
    return w.on(grid)


@dataclass
class WeightProfile:
    """w, Pw, w#, ||w||_W y la seminorma W1 sobre una rejilla."""
    w: GridFunction
    pw: GridFunction
    sharp: GridFunction
    w_norm: float
    w1_seminorm: float


def hardy_average(w: WeightLike, grid: LogGrid, mode: str = "auto") -> GridFunction:
    """
    Promedio de Hardy Pw(t) = (1/t) * integral de w entre 0 y t.

    Args:
        w: Familia de pesos o función de rejilla.
        grid: Rejilla logarítmica.
        mode: "extension" (cola w(t_min) t_min, P(1) = 1 exacto), "exact" (cola cerrada +
              regla izquierda), "analytic" (M(t_k)/t_k con la primitiva cerrada) o
              "auto" (exact si hay cola cerrada, si no extension).

    Returns:
        GridFunction con Pw.
    """
    if mode not in HARDY_MODES:
        raise InvalidArgumentError(f"Modo de Hardy desconocido: {mode}")
    g = weight_values(w, grid)
    cola_cerrada = w.exact_tail_moment if isinstance(w, WeightFamily) else None
    if mode == "auto":
        mode = "exact" if cola_cerrada is not None else "extension"
    if mode in ("exact", "analytic") and cola_cerrada is None:
        raise InvalidArgumentError(f"El modo '{mode}' requiere una cola exacta")

    if mode == "analytic":
        return GridFunction(grid, cola_cerrada(grid.nodes) / grid.nodes)
    if mode == "exact":
        cola = float(cola_cerrada(np.array([grid.t_min]))[0])
    else:
        cola = extension_tail(g)
    return GridFunction(grid, lebesgue_prefixes(g, cola) / grid.nodes)


def sharp(w: WeightLike, grid: LogGrid, mode: str = "auto") -> GridFunction:
    """Transformada w# = Pw - w."""
    return hardy_average(w, grid, mode) - weight_values(w, grid)


def _sup_estable(g: GridFunction, burn_in: float, hasta: Optional[int] = None) -> float:
    mascara = g.grid.stable_mask(burn_in)
    if hasta is not None:
        mascara = mascara.copy()
        mascara[hasta:] = False
    if not np.any(mascara):
        raise InvalidArgumentError(f"Ningún nodo supera burn_in * t_min (burn_in={burn_in})")
    return float(np.max(np.abs(g.values[mascara])))


def w_norm(
    w: WeightLike, grid: LogGrid, burn_in: float = DEFAULT_BURN_IN, mode: str = "auto"
) -> float:
    """||w||_W = sup |Pw - w| sobre los nodos estabilizados."""
    return _sup_estable(sharp(w, grid, mode), burn_in)


def w1_seminorm(w: WeightLike, grid: LogGrid, burn_in: float = DEFAULT_BURN_IN) -> float:
    """
    Seminorma W1: sup |t w'(t)|.

    Para familias phi(log t) con derivada conocida devuelve sup |phi'| en los nodos;
    en otro caso usa diferencias hacia delante t_k (w_{k+1} - w_k) / sigma_k.
    """
    if isinstance(w, WeightFamily) and w.dphi is not None:
        derivada = np.asarray(w.dphi(grid.log_nodes), dtype=float) * np.ones(grid.n_nodes)
        return _sup_estable(GridFunction(grid, derivada), burn_in)
    g = weight_values(w, grid)
    dif = grid.nodes[:-1] * np.diff(g.values) / grid.lebesgue_steps
    return _sup_estable(GridFunction(grid, np.append(dif, 0.0)), burn_in, hasta=grid.n_nodes - 1)


def weight_profile(
    w: WeightLike, grid: LogGrid, burn_in: float = DEFAULT_BURN_IN, mode: str = "auto"
) -> WeightProfile:
    g = weight_values(w, grid)
    pw = hardy_average(w, grid, mode)
    sh = pw - g
    return WeightProfile(
        w=g,
        pw=pw,
        sharp=sh,
        w_norm=_sup_estable(sh, burn_in),
        w1_seminorm=w1_seminorm(w, grid, burn_in),
    )


def decompose_l3(
    w: WeightLike, grid: LogGrid, mode: str = "auto"
) -> tuple[GridFunction, GridFunction]:
    """
    Descomposición w = (w - Pw) + Pw en parte acotada y parte W1.

    Returns:
        (bounded_part, w1_part); su suma reconstruye w.
    """
    g = weight_values(w, grid)
    pw = hardy_average(w, grid, mode)
    return g - pw, pw


def qbar(g: GridFunction) -> GridFunction:
    """
    Qg(t) = integral de g(s) ds/s entre t y 1 (con signo), Qg(1) = 0.

    Raises:
        InvalidArgumentError: Si t = 1 no es nodo.
    """
    return -g_transform(g)


def g_transform(w: WeightLike, grid: Optional[LogGrid] = None) -> GridFunction:
    """
    Gw(s) = integral de w(r) dr/r entre 1 y s, con la regla izquierda.

    Raises:
        InvalidArgumentError: Si t = 1 no es nodo.
    """
    if grid is None:
        if not isinstance(w, GridFunction):
            raise InvalidArgumentError("g_transform de una familia requiere la rejilla")
        grid = w.grid
    g = weight_values(w, grid)
    m = grid.unit_index()
    delta = grid.haar_step
    acumulado = np.concatenate([[0.0], np.cumsum(g.values[:-1])]) * delta
    return GridFunction(grid, acumulado - acumulado[m])


def rearrange(g: GridFunction) -> GridFunction:
    """
    Reordenación no creciente de |g| respecto a la medida de Lebesgue de las celdas.

    Cada celda [t_k, t_{k+1}] recibe el promedio de la función escalonada decreciente
    sobre el intervalo de masa correspondiente, así que la masa se conserva.
    """
    if g.values.ndim != 1:
        raise InvalidArgumentError("rearrange solo admite funciones escalares")
    grid = g.grid
    sigma = grid.lebesgue_steps
    valores = np.abs(g.values[:-1])
    orden = np.argsort(-valores, kind="stable")
    ordenados = valores[orden]
    cortes = np.concatenate([[0.0], np.cumsum(sigma[orden])])
    primitiva = np.concatenate([[0.0], np.cumsum(ordenados * sigma[orden])])
    # Posición acumulada de cada celda en el orden natural
    posiciones = np.concatenate([[0.0], np.cumsum(sigma)])
    masa = np.interp(posiciones, cortes, primitiva)
    promedio = np.diff(masa) / sigma
    # Sin recortes por redondeo el promedio ya es no creciente
    promedio = np.minimum.accumulate(promedio)
    return GridFunction(grid, np.append(promedio, promedio[-1]))


def weight_from_spec(spec: dict) -> WeightFamily:
    """
    Construye una familia a partir de un diccionario de configuración.

    Raises:
        InvalidArgumentError: Si el tipo no existe o faltan parámetros.
    """
    kind = spec.get("kind")
    if kind == "constant":
        return WeightFamily.constant(spec.get("c", 1.0))
    if kind == "log":
        return WeightFamily.log()
    if kind == "power_log":
        return WeightFamily.power_log(int(spec.get("n", 1)))
    if kind == "sin_log":
        return WeightFamily.sin_log()
    if kind == "phi_log":
        if "x" not in spec or "y" not in spec:
            raise InvalidArgumentError("phi_log requiere las muestras 'x' e 'y'")
        return WeightFamily.phi_sampled(spec["x"], spec["y"])
    raise InvalidArgumentError(f"Tipo de peso desconocido: {kind}")
