"""Configuración del sistema de logging."""

import logging
import sys
import warnings
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

LOGGER_NAME = "interp_commutators"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "INFO", log_file: Optional[Path] = None) -> logging.Logger:
    """
    Configura el logger de la aplicación.

    El fichero recibe siempre DEBUG; la consola sigue a ``level``. Los avisos de
    numpy y scipy (desbordamientos, ``OptimizeWarning`` de HiGHS) se redirigen al
    mismo fichero en lugar de imprimirse sueltos por stderr.

    Args:
        level: Nivel de consola ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL").
        log_file: Ruta al fichero de log. Si es None, usa logs/interp_commutators.log
                  en el directorio del proyecto.

    Returns:
        Logger configurado.
    """
    if log_file is None:
        log_dir = Path(__file__).parent.parent / "logs"
        log_dir.mkdir(exist_ok=True)
        log_file = log_dir / "interp_commutators.log"

    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG)
    nivel_consola = getattr(logging, level.upper(), logging.INFO)

    if logger.handlers:
        for handler in logger.handlers:
            if not isinstance(handler, RotatingFileHandler):
                handler.setLevel(nivel_consola)
        return logger

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    # Máximo 10MB, 5 backups
    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=10 * 1024 * 1024,
        backupCount=5,
        encoding="utf-8",
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(nivel_consola)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    _capturar_avisos(file_handler)
    return logger


def _capturar_avisos(handler: logging.Handler) -> None:
    """Envía los avisos de ``warnings`` al fichero de log."""
    logging.captureWarnings(True)
    avisos = logging.getLogger("py.warnings")
    if handler not in avisos.handlers:
        avisos.addHandler(handler)
    avisos.propagate = False
    warnings.filterwarnings("default", module=r"scipy\.optimize.*")


def worker_logging(level: str = "WARNING") -> None:
    """
    Inicializador de los procesos del pool de ensayos.

    El ``RotatingFileHandler`` no es seguro entre procesos, así que cada worker
    descarta los handlers heredados y solo emite por stderr a partir de ``level``.

    Args:
        level: Nivel mínimo de los mensajes del worker.
    """
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(getattr(logging, level.upper(), logging.WARNING))
