"""Pares de Banach finito-dimensionales con normas poliédricas ponderadas.

Los extremos son l1 o l-infinito ponderados: así las normas de operador inducidas y los
K-funcionales tienen forma cerrada y ninguna capa numérica interna contamina las
comprobaciones.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from interp_commutators.exceptions import (
    InvalidArgumentError,
    NumericalError,
    UnsupportedPairError,
)

logger = logging.getLogger("interp_commutators")

INF = math.inf
# Dimensión máxima del camino oráculo del K-funcional
_K_ORACLE_MAX_DIM = 3


def _parse_p(p) -> float:
    if p in (1, 1.0, "1"):
        return 1.0
    if p in (INF, "inf", "Infinity", "infinity"):
        return INF
    raise InvalidArgumentError(f"Exponente de norma no soportado: {p} (solo 1 o inf)")


@dataclass(frozen=True)
class NormSpec:
    """Norma l1 o l-infinito con pesos positivos por coordenada."""
    p: float
    scale: tuple

    def __post_init__(self):
        object.__setattr__(self, "p", _parse_p(self.p))
        escala = tuple(float(s) for s in self.scale)
        if not escala or any(not (s > 0 and math.isfinite(s)) for s in escala):
            raise InvalidArgumentError(f"Los pesos de la norma deben ser positivos: {escala}")
        object.__setattr__(self, "scale", escala)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.asarray(self.scale)

    @property
    def dim(self) -> int:
        return len(self.scale)

    def norm(self, x: np.ndarray) -> np.ndarray:
        """Norma de un vector (d,) o de cada fila de una matriz (n, d)."""
        pesado = np.abs(np.asarray(x, dtype=float)) * self.weights
        if self.p == 1.0:
            return pesado.sum(axis=-1)
        return pesado.max(axis=-1)

    def to_dict(self) -> dict:
        return {"p": "inf" if self.p == INF else 1, "scale": list(self.scale)}


@dataclass(frozen=True)
class CouplePair:
    """Par compatible (X0, X1) sobre R^dim."""
    norm0: NormSpec
    norm1: NormSpec

    def __post_init__(self):
        if self.norm0.dim != self.norm1.dim:
            raise InvalidArgumentError(
                f"Dimensiones incompatibles: {self.norm0.dim} != {self.norm1.dim}"
            )

    @property
    def dim(self) -> int:
        return self.norm0.dim

    @property
    def key(self) -> tuple:
        return (self.norm0.p, self.norm0.scale, self.norm1.p, self.norm1.scale)

    @property
    def is_l1(self) -> bool:
        """Camino exacto del K-funcional: ambos extremos l1 ponderados."""
        return self.norm0.p == 1.0 and self.norm1.p == 1.0

    @cached_property
    def thresholds(self) -> np.ndarray:
        """Umbrales a_i / b_i donde la coordenada i pasa de X1 a X0."""
        return self.norm0.weights / self.norm1.weights

    @classmethod
    def diagonal(cls, a: Sequence[float], b: Sequence[float], p0=1, p1=1) -> "CouplePair":
        return cls(NormSpec(p0, tuple(a)), NormSpec(p1, tuple(b)))

    @classmethod
    def scalar(cls, a0: float = 1.0, a1: float = 1.0) -> "CouplePair":
        return cls.diagonal([a0], [a1])

    @classmethod
    def ladder(cls, i_max: int, base: float = 4.0, shift: int = 0) -> "CouplePair":
        """Par diagonal l1 con a_i = 1, b_i = base^-(i + shift), i = 0..i_max."""
        i = np.arange(i_max + 1)
        return cls.diagonal(np.ones(i_max + 1), base ** (-(i + shift)))

    def to_dict(self) -> dict:
        return {"norm0": self.norm0.to_dict(), "norm1": self.norm1.to_dict()}


def ladder_size(t_max: float, base: float = 4.0) -> int:
    """Mayor i con base^i <= t_max / base."""
    return max(int(math.floor(math.log(t_max / base) / math.log(base) + 1e-12)), 0)


def _vector(x, pair: CouplePair) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (pair.dim,):
        raise InvalidArgumentError(f"Dimensión incorrecta: {v.shape}, se esperaba ({pair.dim},)")
    return v


def j_functional(t: float, x, pair: CouplePair) -> float:
    """
    J(t, x) = max(||x||_0, t ||x||_1).

    Raises:
        InvalidArgumentError: Si t <= 0 o la dimensión no coincide.
    """
    if not t > 0:
        raise InvalidArgumentError(f"t debe ser positivo: {t}")
    v = _vector(x, pair)
    return float(max(pair.norm0.norm(v), t * pair.norm1.norm(v)))


def j_values(nodes: np.ndarray, u: np.ndarray, pair: CouplePair) -> np.ndarray:
    """J(t_k, u_k) para cada fila de u."""
    return np.maximum(pair.norm0.norm(u), nodes * pair.norm1.norm(u))


def k_functional(t: float, x, pair: CouplePair) -> float:
    """
    K(t, x) = inf { ||x0||_0 + t ||x1||_1 : x = x0 + x1 }.

    Camino exacto para pares l1/l1: sum_i min(a_i, t b_i) |x_i|. En otro caso, oráculo
    por programación lineal si dim <= 3.

    Raises:
        UnsupportedPairError: Si la combinación de normas no admite ningún camino.
    """
    if not t > 0:
        raise InvalidArgumentError(f"t debe ser positivo: {t}")
    v = _vector(x, pair)
    if pair.is_l1:
        pesos = np.minimum(pair.norm0.weights, t * pair.norm1.weights)
        return float(np.sum(pesos * np.abs(v)))
    if pair.dim > _K_ORACLE_MAX_DIM:
        raise UnsupportedPairError(
            f"K-funcional sin camino exacto para dim={pair.dim} con normas "
            f"({pair.norm0.p}, {pair.norm1.p})"
        )
    return _k_oracle(t, v, pair)


def _norm_rows(spec: NormSpec, d: int, offset: int, epi: int, factor: float):
    """Filas A_ub de 'factor * ||s|| <= variable epi' con s en [offset, offset + d)."""
    filas = []
    if spec.p == 1.0:
        filas.append(({offset + i: factor * spec.weights[i] for i in range(d)}, epi))
    else:
        for i in range(d):
            filas.append(({offset + i: factor * spec.weights[i]}, epi))
    return filas


def _k_oracle(t: float, x: np.ndarray, pair: CouplePair) -> float:
    """K-funcional por LP: variables x0 (d), s0 >= |x0|, s1 >= |x - x0|, e0, e1."""
    d = pair.dim
    nv = 3 * d + 2
    e0, e1 = 3 * d, 3 * d + 1
    A, b = [], []

    def fila(coef: dict, rhs: float) -> None:
        r = np.zeros(nv)
        for j, c in coef.items():
            r[j] += c
        A.append(r)
        b.append(rhs)

    for i in range(d):
        fila({i: 1.0, d + i: -1.0}, 0.0)
        fila({i: -1.0, d + i: -1.0}, 0.0)
        fila({i: -1.0, 2 * d + i: -1.0}, -x[i])
        fila({i: 1.0, 2 * d + i: -1.0}, x[i])
    for coef, epi in _norm_rows(pair.norm0, d, d, e0, 1.0):
        coef[epi] = -1.0
        fila(coef, 0.0)
    for coef, epi in _norm_rows(pair.norm1, d, 2 * d, e1, 1.0):
        coef[epi] = -1.0
        fila(coef, 0.0)
    c = np.zeros(nv)
    c[e0] = 1.0
    c[e1] = t
    bounds = [(None, None)] * d + [(0, None)] * (2 * d + 2)
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=bounds, method="highs")
    if res.status != 0:
        raise NumericalError(f"El oráculo del K-funcional falló: {res.message}")
    return float(res.fun)


def k_decompose(t: float, x, pair: CouplePair) -> tuple[np.ndarray, np.ndarray]:
    """
    Descomposición óptima x = x0 + x1 del K-funcional (camino exacto).

    La coordenada i va a x0 si a_i <= t b_i (empates a X0).

    Raises:
        UnsupportedPairError: Si el par no es l1/l1.
    """
    if not t > 0:
        raise InvalidArgumentError(f"t debe ser positivo: {t}")
    v = _vector(x, pair)
    if not pair.is_l1:
        raise UnsupportedPairError("k_decompose solo tiene camino exacto para pares l1/l1")
    en_x0 = pair.norm0.weights <= t * pair.norm1.weights
    x0 = np.where(en_x0, v, 0.0)
    return x0, v - x0


def k_decompose_nodes(nodes: np.ndarray, x: np.ndarray, pair: CouplePair) -> np.ndarray:
    """x0(t_k) para todos los nodos, matriz (n, d)."""
    if not pair.is_l1:
        raise UnsupportedPairError("k_decompose solo tiene camino exacto para pares l1/l1")
    en_x0 = pair.norm0.weights[None, :] <= nodes[:, None] * pair.norm1.weights[None, :]
    return np.where(en_x0, x[None, :], 0.0)


@dataclass(frozen=True, eq=False)
class PairOperator:
    """Operador lineal T: X -> Y con sus normas exactas en los extremos."""
    matrix: np.ndarray
    src: CouplePair
    dst: CouplePair
    endpoint_norms: tuple

    @property
    def pair_norm(self) -> float:
        return float(max(self.endpoint_norms))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """T x para un vector o T u_k para cada fila de una matriz (n, d_src)."""
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T if x.ndim == 2 else self.matrix @ x

    def normalized(self) -> "PairOperator":
        """Reescala T para que ||T|| = 1."""
        n = self.pair_norm
        if n == 0:
            return self
        return operator_pair_norm(self.matrix / n, self.src, self.dst)

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "endpoint_norms": list(self.endpoint_norms),
            "pair_norm": self.pair_norm,
        }


def _induced_norm(T: np.ndarray, a: NormSpec, b: NormSpec) -> float:
    """Norma inducida de T: (R^m, a) -> (R^n, b) para l1->l1 o linf->linf ponderadas."""
    if a.p == 1.0 and b.p == 1.0:
        # Máximo por columnas de sum_i b_i |T_ij| / a_j
        return float(np.max((b.weights[:, None] * np.abs(T)).sum(axis=0) / a.weights))
    if a.p == INF and b.p == INF:
        # Máximo por filas de b_i sum_j |T_ij| / a_j
        return float(np.max(b.weights * (np.abs(T) / a.weights[None, :]).sum(axis=1)))
    raise UnsupportedPairError(
        f"Norma de operador no soportada entre extremos p={a.p} y p={b.p}"
    )


def operator_pair_norm(T, src: CouplePair, dst: CouplePair) -> PairOperator:
    """
    Calcula las normas exactas de T en ambos extremos.

    Raises:
        InvalidArgumentError: Si las dimensiones no casan.
        UnsupportedPairError: Si algún extremo mezcla l1 y linf.
    """
    M = np.array(T, dtype=float, ndmin=2)
    if M.shape != (dst.dim, src.dim):
        raise InvalidArgumentError(
            f"La matriz tiene forma {M.shape}, se esperaba ({dst.dim}, {src.dim})"
        )
    normas = (
        _induced_norm(M, src.norm0, dst.norm0),
        _induced_norm(M, src.norm1, dst.norm1),
    )
    M.setflags(write=False)
    return PairOperator(M, src, dst, normas)


def random_operator(
    rng: np.random.Generator, src: CouplePair, dst: CouplePair
) -> PairOperator:
    """Operador gaussiano normalizado a ||T|| = 1."""
    return operator_pair_norm(rng.standard_normal((dst.dim, src.dim)), src, dst).normalized()


def pair_from_spec(spec: dict) -> CouplePair:
    """
    Construye un par a partir de {"norm0": {"p", "scale"}, "norm1": {...}} o
    {"ladder": i_max, "base": 4}.
    """
    if "ladder" in spec:
        return CouplePair.ladder(int(spec["ladder"]), float(spec.get("base", 4.0)),
                                 int(spec.get("shift", 0)))
    try:
        n0, n1 = spec["norm0"], spec["norm1"]
        return CouplePair(NormSpec(n0.get("p", 1), tuple(n0["scale"])),
                          NormSpec(n1.get("p", 1), tuple(n1["scale"])))
    except (KeyError, TypeError, AttributeError) as e:
        raise InvalidArgumentError(f"Especificación de par incompleta: {e}") from e
