"""Jerarquía de excepciones del paquete."""

from typing import Optional


class InterpError(Exception):
    """Excepción base para los errores del toolkit de interpolación."""
    pass


class InvalidArgumentError(InterpError):
    """Argumentos fuera de dominio (rejillas degeneradas, theta fuera de (0,1), etc.)."""
    pass


class UnsupportedPairError(InterpError):
    """Combinación de normas para la que no existe camino exacto ni oráculo."""
    pass


class NumericalError(InterpError):
    """Fallos numéricos: solver, certificación, sistemas de momentos singulares."""
    pass


class SolverError(NumericalError):
    """El minimizador no convergió; conserva la norma del último subgradiente o el estado."""

    def __init__(self, mensaje: str, grad_norm: Optional[float] = None):
        super().__init__(mensaje)
        self.grad_norm = grad_norm


class CertificationError(NumericalError):
    """El selector no pudo certificar coste <= 2 x cota inferior."""

    def __init__(self, mensaje: str, cost: float, bound: float):
        super().__init__(mensaje)
        self.cost = cost
        self.bound = bound


class SingularMomentError(NumericalError):
    """El sistema de momentos de cancelación es singular."""
    pass


class OracleRefusedError(NumericalError):
    """El oráculo de fuerza bruta se niega a resolver instancias demasiado grandes."""
    pass


class DegenerateEnsembleError(InterpError):
    """Todos los ensayos de un conjunto tienen denominador degenerado."""
    pass
