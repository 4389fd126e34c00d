"""Método J: representaciones f = integral de u(s) ds/s, funcionales Phi_{theta,q} y
normas de interpolación.

Las representaciones viven en los nodos izquierdos t_0..t_{n-2} (u_{n-1} = 0), de modo
que reconstruct coincide con integrate_haar.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import qr
from scipy.optimize import linprog, minimize

from interp_commutators.exceptions import (
    CertificationError,
    InvalidArgumentError,
    OracleRefusedError,
    SingularMomentError,
    SolverError,
    UnsupportedPairError,
)
from interp_commutators.grid import GridFunction, LogGrid, cumulative_haar, integrate_haar
from interp_commutators.pairs import CouplePair, NormSpec, j_values, k_decompose_nodes
from interp_commutators.weights import WeightLike, sharp

logger = logging.getLogger("interp_commutators")

INF = math.inf
METHODS = ("fundamental", "solver", "oracle")
RECONSTRUCTION_TOL = 1e-10
MAX_MOMENTS = 8
ORACLE_MAX_DIM = 2
ORACLE_MAX_NODES = 7
# Condicionamiento máximo aceptado en el sistema de momentos
_MOMENT_COND = 1e12


@dataclass(frozen=True)
class ThetaQ:
    """Parámetros (theta, q) del espacio de interpolación."""
    theta: float
    q: float

    def __post_init__(self):
        theta = float(self.theta)
        q = INF if self.q in ("inf", "Infinity") else float(self.q)
        if not 0.0 < theta < 1.0:
            raise InvalidArgumentError(f"theta debe estar en (0, 1): {theta}")
        if math.isnan(q) or q < 1.0:
            raise InvalidArgumentError(f"q debe ser >= 1: {q}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "q", q)

    @property
    def is_polyhedral(self) -> bool:
        """q en {1, inf}: el problema del método J es un programa lineal."""
        return self.q == 1.0 or self.q == INF

    def to_dict(self) -> dict:
        return {"theta": self.theta, "q": "inf" if self.q == INF else self.q}


@dataclass(frozen=True)
class SolverSettings:
    """Presupuesto y tolerancias del minimizador (fijos: el selector es determinista)."""
    iterations: int = 3000
    step0: float = 0.05
    tolerance: float = 1e-12
    lp_tolerance: float = 1e-9
    oracle_starts: int = 8

    def __post_init__(self):
        if self.iterations < 0 or self.step0 <= 0 or self.oracle_starts < 1:
            raise InvalidArgumentError(f"Parámetros de solver inválidos: {self}")
        if not 1e-10 <= self.lp_tolerance <= 1e-3:
            raise InvalidArgumentError(f"lp_tolerance fuera de rango: {self.lp_tolerance}")


@dataclass
class Representation:
    """
    Representación f = sum_k u_k Delta sobre una rejilla.

    u tiene forma (n_nodes, dim) y su última fila es nula.
    """
    grid: LogGrid
    u: np.ndarray
    pair: CouplePair
    f: np.ndarray
    reconstruction_tolerance: float = RECONSTRUCTION_TOL
    _costs: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        if self.u.shape != (self.grid.n_nodes, self.pair.dim):
            raise InvalidArgumentError(
                f"u tiene forma {self.u.shape}, se esperaba "
                f"({self.grid.n_nodes}, {self.pair.dim})"
            )
        if np.any(self.u[-1] != 0.0):
            raise InvalidArgumentError("La representación debe anularse en el último nodo")

    def as_grid_function(self) -> GridFunction:
        return GridFunction(self.grid, self.u)

    def reconstruct(self) -> np.ndarray:
        return np.atleast_1d(integrate_haar(self.as_grid_function()))

    def j_values(self) -> GridFunction:
        return GridFunction(self.grid, j_values(self.grid.nodes, self.u, self.pair))

    def cost(self, tq: ThetaQ) -> float:
        """Phi_{theta,q}(J(t_k, u_k)), cacheado por (theta, q)."""
        clave = (tq.theta, tq.q)
        if clave not in self._costs:
            self._costs[clave] = phi_norm(self.j_values(), tq)
        return self._costs[clave]

    def reconstruction_error(self) -> float:
        """Error relativo (norma sup) entre reconstruct(u) y f."""
        escala = max(float(np.max(np.abs(self.f))), 1e-300)
        return float(np.max(np.abs(self.reconstruct() - self.f))) / escala

    def scaled(self, c: float) -> "Representation":
        return Representation(self.grid, c * self.u, self.pair, c * self.f,
                              self.reconstruction_tolerance)

    def to_rows(self) -> list:
        """Filas (t_k, u_k[0], ..., u_k[d-1]) para volcado CSV."""
        return [[float(t), *map(float, fila)] for t, fila in zip(self.grid.nodes, self.u)]


def _left_values(g: GridFunction) -> np.ndarray:
    if g.values.ndim != 1:
        raise InvalidArgumentError("phi_norm solo admite funciones escalares")
    return g.values[:-1]


def phi_norm(g: GridFunction, tq: ThetaQ, v: Optional[GridFunction] = None) -> float:
    """
    Funcional Phi_{theta,q} (opcionalmente con peso v) sobre los nodos izquierdos.

    Args:
        g: Función escalar de rejilla (típicamente los valores J).
        tq: Parámetros (theta, q).
        v: Peso positivo opcional.

    Returns:
        (sum_k (t_k^-theta |v_k g_k|)^q Delta)^(1/q), o el supremo si q = inf.
    """
    vals = np.abs(_left_values(g))
    if v is not None:
        if v.grid != g.grid:
            raise InvalidArgumentError("Peso evaluado en otra rejilla")
        vals = vals * np.abs(_left_values(v))
    vals = vals * g.grid.nodes[:-1] ** (-tq.theta)
    if vals.size == 0:
        return 0.0
    if tq.q == INF:
        return float(np.max(vals))
    potencias = np.append(vals ** tq.q, 0.0)
    return float(integrate_haar(GridFunction(g.grid, potencias)) ** (1.0 / tq.q))


def hardy_left(g: GridFunction) -> GridFunction:
    """Operador t -> integral de g(s) ds/s entre 0 y t (g nula bajo t_min)."""
    return cumulative_haar(g)


def hardy_right(g: GridFunction) -> GridFunction:
    """Operador t -> t * integral de g(s) ds/s^2 entre t e infinito (nodos izquierdos)."""
    grid = g.grid
    t = grid.nodes
    dens = g.values[:-1] / (t[:-1] if g.values.ndim == 1 else t[:-1, None])
    cola = np.cumsum(dens[::-1], axis=0)[::-1] * grid.haar_step
    cero = np.zeros((1,) + g.values.shape[1:])
    valores = np.concatenate([cola, cero], axis=0)
    factor = t if g.values.ndim == 1 else t[:, None]
    return GridFunction(grid, factor * valores)


# Representación fundamental ------------------------------------------------------


def represent_fundamental(f, pair: CouplePair, grid: LogGrid) -> Representation:
    """
    Representación constructiva del lema fundamental.

    u_k = (x0(t_k) - x0(t_{k-1})) / Delta con x0(t) la primera componente de la
    descomposición óptima del K-funcional; la masa x0(t_0) va al nodo 0 y el resto
    f - x0(t_{n-2}) al nodo n-2.

    Raises:
        UnsupportedPairError: Si el par no admite k_decompose exacto.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (pair.dim,):
        raise InvalidArgumentError(f"f tiene dimensión {f.shape}, se esperaba ({pair.dim},)")
    if not pair.is_l1:
        raise UnsupportedPairError("La representación fundamental requiere un par l1/l1")
    n, delta = grid.n_nodes, grid.haar_step
    u = np.zeros((n, pair.dim))
    if n == 2:
        u[0] = f / delta
        return Representation(grid, u, pair, f)
    x0 = k_decompose_nodes(grid.nodes[:-1], f, pair)
    saltos = np.diff(x0, axis=0, prepend=np.zeros((1, pair.dim)))
    saltos[-1] += f - x0[-1]
    u[:-1] = saltos / delta
    return Representation(grid, u, pair, f)


# Solvers -------------------------------------------------------------------------


def _corregir_residuo(u: np.ndarray, f: np.ndarray, delta: float) -> np.ndarray:
    """Absorbe el residuo de reconstrucción en el nodo de mayor |u_k|."""
    grid_sum = np.cumsum(u[:-1], axis=0)[-1] * delta if u.shape[0] > 1 else 0.0
    residuo = f - grid_sum
    k = int(np.argmax(np.abs(u[:-1]).sum(axis=1)))
    u = u.copy()
    u[k] += residuo / delta
    return u


def _filas_norma(spec: NormSpec, s_idx: np.ndarray, j_idx: np.ndarray, factor: np.ndarray,
                 fila0: int):
    """Entradas COO de factor_k * ||s_k|| <= J_k para todos los nodos."""
    m, d = s_idx.shape
    if spec.p == 1.0:
        filas = fila0 + np.arange(m)
        r = np.concatenate([np.repeat(filas, d), filas])
        c = np.concatenate([s_idx.ravel(), j_idx])
        v = np.concatenate([(factor[:, None] * spec.weights[None, :]).ravel(), -np.ones(m)])
        return r, c, v, m
    filas = fila0 + np.arange(m * d)
    r = np.concatenate([filas, filas])
    c = np.concatenate([s_idx.ravel(), np.repeat(j_idx, d)])
    v = np.concatenate([(factor[:, None] * spec.weights[None, :]).ravel(), -np.ones(m * d)])
    return r, c, v, m * d


def _solve_lp(f: np.ndarray, pair: CouplePair, tq: ThetaQ, grid: LogGrid,
              settings: SolverSettings) -> np.ndarray:
    """
    Resuelve exactamente el problema del método J para q en {1, inf} con HiGHS.

    Variables por nodo izquierdo: u (d), s >= |u| (d), J (1); más z si q = inf. Cada
    bloque se reescala por rho_k = t_k^theta / max(1, t_k beta / alpha).

    Returns:
        u de forma (n, d) con la última fila nula.
    """
    n, d, delta = grid.n_nodes, pair.dim, grid.haar_step
    m = n - 1
    t = grid.nodes[:-1]
    alpha = float(np.max(pair.norm0.weights))
    beta = float(np.max(pair.norm1.weights))
    rho = t ** tq.theta / np.maximum(1.0, t * beta / alpha)
    peso = t ** (-tq.theta) * rho

    bloque = 2 * d + 1
    base = np.arange(m)[:, None] * bloque
    u_idx = base + np.arange(d)[None, :]
    s_idx = u_idx + d
    j_idx = np.arange(m) * bloque + 2 * d
    sup = tq.q == INF
    nv = m * bloque + (1 if sup else 0)

    filas, cols, vals = [], [], []
    r = np.arange(m * d)
    filas += [r, r, m * d + r, m * d + r]
    cols += [u_idx.ravel(), s_idx.ravel(), u_idx.ravel(), s_idx.ravel()]
    vals += [np.ones(m * d), -np.ones(m * d), -np.ones(m * d), -np.ones(m * d)]
    n_filas = 2 * m * d
    for spec, factor in ((pair.norm0, np.ones(m)), (pair.norm1, t)):
        rr, cc, vv, k = _filas_norma(spec, s_idx, j_idx, factor, n_filas)
        filas.append(rr)
        cols.append(cc)
        vals.append(vv)
        n_filas += k
    c = np.zeros(nv)
    if sup:
        rr = n_filas + np.arange(m)
        filas += [rr, rr]
        cols += [j_idx, np.full(m, nv - 1)]
        vals += [peso, -np.ones(m)]
        n_filas += m
        c[-1] = 1.0
    else:
        c[j_idx] = peso * delta
    A_ub = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(filas), np.concatenate(cols))),
        shape=(n_filas, nv),
    ).tocsr()
    A_eq = sparse.coo_matrix(
        (np.repeat(rho * delta, d), (np.tile(np.arange(d), m), u_idx.ravel())),
        shape=(d, nv),
    ).tocsr()
    bounds = np.zeros((nv, 2))
    bounds[:, 1] = np.inf
    bounds[u_idx.ravel(), 0] = -np.inf

    res = linprog(
        c, A_ub=A_ub, b_ub=np.zeros(n_filas), A_eq=A_eq, b_eq=f, bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": settings.lp_tolerance,
            "dual_feasibility_tolerance": settings.lp_tolerance,
        },
    )
    if res.status != 0 or res.x is None:
        raise SolverError(f"El programa lineal del método J falló: {res.message}")
    logger.debug(f"LP método J (q={tq.q}, n={n}, d={d}): objetivo {res.fun:.12g}")
    u = np.zeros((n, d))
    u[:-1] = rho[:, None] * res.x[u_idx]
    return _corregir_residuo(u, f, delta)


def _subgradiente_norma(spec: NormSpec, u: np.ndarray) -> np.ndarray:
    """Un subgradiente de la norma en cada fila de u."""
    if spec.p == 1.0:
        return spec.weights[None, :] * np.sign(u)
    pesado = np.abs(u) * spec.weights[None, :]
    arg = np.argmax(pesado, axis=1)
    g = np.zeros_like(u)
    filas = np.arange(u.shape[0])
    g[filas, arg] = spec.weights[arg] * np.sign(u[filas, arg])
    return g


def _projected_subgradient(u0: np.ndarray, f: np.ndarray, pair: CouplePair, tq: ThetaQ,
                           grid: LogGrid, settings: SolverSettings) -> np.ndarray:
    """
    Subgradiente proyectado sobre la variedad afín sum_k u_k Delta = f.

    Pasos normalizados alpha_0 / sqrt(j + 1) con número fijo de iteraciones; se conserva
    el mejor iterado.

    Raises:
        SolverError: Si el coste deja de ser finito.
    """
    t = grid.nodes[:-1]
    delta = grid.haar_step
    peso = t ** (-tq.theta)
    q = tq.q
    u = u0[:-1].copy()

    def evaluar(v: np.ndarray):
        n0 = pair.norm0.norm(v)
        n1 = t * pair.norm1.norm(v)
        J = np.maximum(n0, n1)
        coste = float(np.sum((peso * J) ** q) * delta) ** (1.0 / q)
        return coste, J, n0 >= n1

    mejor_u, (mejor, _, _) = u.copy(), evaluar(u)
    alpha0 = settings.step0 * float(np.max(np.abs(u)))
    norma_g = 0.0
    for j in range(settings.iterations):
        coste, J, lado0 = evaluar(u)
        if not math.isfinite(coste):
            raise SolverError("El coste del subgradiente dejó de ser finito", grad_norm=norma_g)
        if coste < mejor:
            mejor, mejor_u = coste, u.copy()
        if coste == 0.0:
            break
        coef = coste ** (1.0 - q) * (peso * J) ** (q - 1.0) * peso * delta
        g = np.where(lado0[:, None], _subgradiente_norma(pair.norm0, u),
                     t[:, None] * _subgradiente_norma(pair.norm1, u))
        G = coef[:, None] * g
        G -= G.mean(axis=0, keepdims=True)
        norma_g = float(np.linalg.norm(G))
        if norma_g <= settings.tolerance:
            break
        u = u - (alpha0 / math.sqrt(j + 1.0)) * G / norma_g
    logger.debug(
        f"Subgradiente (q={q}): coste inicial {evaluar(u0[:-1])[0]:.10g}, final {mejor:.10g}, "
        f"|g| = {norma_g:.3e}"
    )
    salida = np.zeros_like(u0)
    salida[:-1] = mejor_u
    return _corregir_residuo(salida, f, delta)


def _check_oracle_size(pair: CouplePair, grid: LogGrid) -> None:
    if pair.dim > ORACLE_MAX_DIM or grid.n_nodes > ORACLE_MAX_NODES:
        raise OracleRefusedError(
            f"El oráculo solo admite dim <= {ORACLE_MAX_DIM} y n_nodes <= {ORACLE_MAX_NODES} "
            f"(recibido dim={pair.dim}, n={grid.n_nodes})"
        )


def _oracle(f: np.ndarray, pair: CouplePair, tq: ThetaQ, grid: LogGrid,
            settings: SolverSettings) -> np.ndarray:
    """
    Oráculo de fuerza bruta: forma epigráfica con restricciones lineales resuelta por
    SLSQP desde varios arranques aleatorios (semilla fija).

    Raises:
        OracleRefusedError: Si dim > 2 o n_nodes > 7.
        SolverError: Si ningún arranque converge a un punto factible.
    """
    _check_oracle_size(pair, grid)
    n, d, delta = grid.n_nodes, pair.dim, grid.haar_step
    m = n - 1
    t = grid.nodes[:-1]
    peso = t ** (-tq.theta)
    sup = tq.q == INF
    nv = m * d + m + (1 if sup else 0)

    # Normas poliédricas como máximos de funcionales lineales
    filas = []
    for spec, factor in ((pair.norm0, np.ones(m)), (pair.norm1, t)):
        if spec.p == 1.0:
            funcionales = [np.array(s) * spec.weights
                           for s in itertools.product((1.0, -1.0), repeat=d)]
        else:
            funcionales = [sg * spec.weights[i] * np.eye(d)[i]
                           for i in range(d) for sg in (1.0, -1.0)]
        for k in range(m):
            for a in funcionales:
                fila = np.zeros(nv)
                fila[k * d:(k + 1) * d] = -factor[k] * a
                fila[m * d + k] = 1.0
                filas.append(fila)
    if sup:
        for k in range(m):
            fila = np.zeros(nv)
            fila[m * d + k] = -peso[k]
            fila[-1] = 1.0
            filas.append(fila)
    G = np.array(filas)
    E = np.zeros((d, nv))
    for k in range(m):
        E[:, k * d:(k + 1) * d] = delta * np.eye(d)

    q = tq.q

    def objetivo(x):
        if sup:
            return x[-1]
        J = np.maximum(x[m * d:m * d + m], 0.0)
        return float(np.sum((peso * J) ** q) * delta) ** (1.0 / q)

    def gradiente(x):
        g = np.zeros(nv)
        if sup:
            g[-1] = 1.0
            return g
        J = np.maximum(x[m * d:m * d + m], 0.0)
        F = objetivo(x)
        if F > 0:
            g[m * d:m * d + m] = F ** (1.0 - q) * (peso * J) ** (q - 1.0) * peso * delta
        return g

    restricciones = [
        {"type": "ineq", "fun": lambda x: G @ x, "jac": lambda x: G},
        {"type": "eq", "fun": lambda x: E @ x - f, "jac": lambda x: E},
    ]
    cotas = [(None, None)] * (m * d) + [(0.0, None)] * (nv - m * d)
    rng = np.random.default_rng(0)
    mejor_u, mejor = None, INF
    for _ in range(settings.oracle_starts):
        u = rng.standard_normal((m, d))
        u += (f - u.sum(axis=0) * delta) / (m * delta)
        J = 1.1 * np.maximum(pair.norm0.norm(u), t * pair.norm1.norm(u)) + 0.1
        x0 = np.concatenate([u.ravel(), J] + ([[1.1 * np.max(peso * J)]] if sup else []))
        res = minimize(objetivo, x0, jac=gradiente, method="SLSQP", bounds=cotas,
                       constraints=restricciones, options={"ftol": 1e-14, "maxiter": 2000})
        viola = max(float(np.max(-G @ res.x, initial=0.0)),
                    float(np.max(np.abs(E @ res.x - f))))
        if viola <= 1e-8 and res.fun < mejor:
            mejor, mejor_u = float(res.fun), res.x[:m * d].reshape(m, d)
    if mejor_u is None:
        raise SolverError("Ningún arranque del oráculo convergió a un punto factible")
    u = np.zeros((n, d))
    u[:-1] = mejor_u
    return _corregir_residuo(u, f, delta)


def _solver(fn: np.ndarray, pair: CouplePair, tq: ThetaQ, grid: LogGrid,
            settings: SolverSettings) -> np.ndarray:
    if tq.is_polyhedral:
        return _solve_lp(fn, pair, tq, grid, settings)
    candidatos = [_solve_lp(fn, pair, ThetaQ(tq.theta, p), grid, settings) for p in (1.0, INF)]
    if pair.is_l1:
        candidatos.append(represent_fundamental(fn, pair, grid).u)
    costes = [Representation(grid, u, pair, fn).cost(tq) for u in candidatos]
    inicio = candidatos[int(np.argmin(costes))]
    return _projected_subgradient(inicio, fn, pair, tq, grid, settings)


def jnorm(
    f,
    pair: CouplePair,
    tq: ThetaQ,
    grid: LogGrid,
    method: str = "solver",
    settings: Optional[SolverSettings] = None,
) -> tuple[float, Representation]:
    """
    Norma del método J de f en (X0, X1)_{theta,q} y la representación que la realiza.

    Args:
        f: Vector de R^dim.
        pair: Par de Banach.
        tq: Parámetros (theta, q).
        grid: Rejilla logarítmica.
        method: "fundamental" (cota superior constructiva), "solver" (minimización
                convexa) u "oracle" (fuerza bruta en instancias diminutas).
        settings: Presupuesto del solver.

    Returns:
        Tupla (valor, representación).

    Raises:
        InvalidArgumentError: Método desconocido o dimensión incorrecta.
        OracleRefusedError: Oráculo sobre una instancia grande.
        SolverError: El minimizador no produjo una representación válida.
    """
    if method not in METHODS:
        raise InvalidArgumentError(f"Método desconocido: {method}")
    settings = settings or SolverSettings()
    f = np.asarray(f, dtype=float)
    if f.shape != (pair.dim,):
        raise InvalidArgumentError(f"f tiene dimensión {f.shape}, se esperaba ({pair.dim},)")
    if method == "fundamental":
        rep = represent_fundamental(f, pair, grid)
        return rep.cost(tq), rep
    if method == "oracle":
        _check_oracle_size(pair, grid)

    escala = float(np.max(np.abs(f)))
    if escala == 0.0:
        rep = Representation(grid, np.zeros((grid.n_nodes, pair.dim)), pair, f)
        return 0.0, rep
    # Normalizar por max|f_i| hace el selector homogéneo bit a bit
    fn = f / escala
    if method == "oracle":
        un = _oracle(fn, pair, tq, grid, settings)
    else:
        un = _solver(fn, pair, tq, grid, settings)
    rep = Representation(grid, escala * un, pair, f)
    error = rep.reconstruction_error()
    if not error <= RECONSTRUCTION_TOL:
        raise SolverError(f"Error de reconstrucción {error:.3e} tras el método '{method}'")
    return rep.cost(tq), rep


def near_optimal_selector(
    f,
    pair: CouplePair,
    tq: ThetaQ,
    grid: LogGrid,
    settings: Optional[SolverSettings] = None,
) -> Representation:
    """
    Selector casi óptimo u_f con Phi_{theta,q}(J(u_f)) <= 2 ||f||.

    Determinista y homogéneo: selector(c f) = c selector(f) para c potencia de 2, y no
    depende de ningún peso.

    Raises:
        CertificationError: Si el coste supera 2 veces la mejor cota disponible.
    """
    valor, rep = jnorm(f, pair, tq, grid, method="solver", settings=settings)
    cota = valor
    if pair.is_l1:
        cota = min(cota, represent_fundamental(np.asarray(f, dtype=float), pair, grid).cost(tq))
    coste = rep.cost(tq)
    if coste > 2.0 * cota * (1.0 + 1e-12):
        raise CertificationError(
            f"El selector no certifica el factor 2: coste {coste:.6g} > 2 x {cota:.6g}",
            cost=coste, bound=cota,
        )
    return rep


# Cancelaciones -------------------------------------------------------------------


def cancellation_bumps(grid: LogGrid, count: int) -> np.ndarray:
    """
    Perfiles gaussianos en log t (anchura 1) con centros en la mitad central de la rejilla.

    Returns:
        Matriz (n_nodes, count) nula en el último nodo.
    """
    lo, hi = grid.log_nodes[0], grid.log_nodes[-1]
    ancho = hi - lo
    if count == 1:
        centros = np.array([(lo + hi) / 2.0])
    else:
        centros = np.linspace(lo + ancho / 4.0, hi - ancho / 4.0, count)
    perfiles = np.exp(-0.5 * (grid.log_nodes[:, None] - centros[None, :]) ** 2)
    perfiles[-1] = 0.0
    return perfiles


def independent_moments(moments: Sequence[GridFunction], rtol: float = 1e-10) -> list[int]:
    """Índices de un subconjunto independiente de momentos (QR con pivotaje)."""
    if not moments:
        return []
    grid = moments[0].grid
    M = np.array([m.values[:-1] for m in moments]) * grid.haar_step
    _, R, piv = qr(M.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return []
    rango = int(np.sum(diag > rtol * diag[0]))
    return sorted(int(i) for i in piv[:rango])


def moment_integrals(u: np.ndarray, grid: LogGrid, moments: Sequence[GridFunction]) -> np.ndarray:
    """Matriz (M, d) de sum_k u_k m_j(t_k) Delta."""
    if not moments:
        return np.zeros((0, u.shape[1]))
    M = np.array([m.values[:-1] for m in moments])
    return M @ u[:-1] * grid.haar_step


def impose_cancellations(
    rep: Representation,
    moments: Sequence[GridFunction],
    reduce_dependent: bool = False,
) -> Representation:
    """
    Corrige u con perfiles suaves para anular los momentos dados.

    u' = u - sum_j c_j beta_j, con c resuelto coordenada a coordenada.

    Args:
        rep: Representación de partida.
        moments: Funciones escalares m_j (hasta 8).
        reduce_dependent: Si True, se descartan momentos linealmente dependientes.

    Returns:
        Nueva representación (su f es la reconstrucción de u').

    Raises:
        InvalidArgumentError: Más de 8 momentos o rejilla distinta.
        SingularMomentError: Si el sistema de momentos es singular.
    """
    if len(moments) > MAX_MOMENTS:
        raise InvalidArgumentError(f"Como máximo {MAX_MOMENTS} momentos: {len(moments)}")
    for m in moments:
        if m.grid != rep.grid or m.values.ndim != 1:
            raise InvalidArgumentError("Los momentos deben ser funciones escalares de la rejilla")
    moments = list(moments)
    if reduce_dependent:
        indices = independent_moments(moments)
        if len(indices) < len(moments):
            logger.debug(f"Momentos dependientes descartados: {len(moments) - len(indices)}")
        moments = [moments[i] for i in indices]
    if not moments:
        return rep

    grid = rep.grid
    actuales = moment_integrals(rep.u, grid, moments)
    if not np.any(actuales):
        return rep
    perfiles = cancellation_bumps(grid, len(moments))
    A = moment_integrals(perfiles, grid, moments)
    cond = np.linalg.cond(A)
    if not math.isfinite(cond) or cond > _MOMENT_COND:
        raise SingularMomentError(f"Sistema de momentos singular (cond = {cond:.3e})")
    coef = np.linalg.solve(A, actuales)
    u = rep.u - perfiles @ coef
    u[-1] = 0.0
    nuevo = Representation(grid, u, rep.pair, np.zeros(rep.pair.dim))
    nuevo.f = nuevo.reconstruct()
    return nuevo


def second_order_representation(rep: Representation, w: WeightLike) -> Representation:
    """
    Representación U(t) = 2 (integral entre 0 y t de (integral entre 0 y r de u) w#(r)
    dr/r) w#(t), con w# en modo extensión.
    """
    grid = rep.grid
    ws = sharp(w, grid, mode="extension").values
    primitiva = cumulative_haar(rep.as_grid_function()).values
    interior = cumulative_haar(GridFunction(grid, primitiva * ws[:, None])).values
    U = 2.0 * interior * ws[:, None]
    U[-1] = 0.0
    nuevo = Representation(grid, U, rep.pair, np.zeros(rep.pair.dim))
    nuevo.f = nuevo.reconstruct()
    return nuevo
