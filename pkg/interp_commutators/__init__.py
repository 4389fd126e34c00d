"""Paquete principal para el cálculo de normas J, operadores Omega_w y sus conmutadores."""

__version__ = "0.1.0"
