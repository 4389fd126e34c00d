"""Utilidades para leer y escribir los ficheros de resultados (JSON y CSV)."""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence


def escribir_json(ruta: Path, datos: dict) -> Path:
    """
    Escribe un diccionario como JSON determinista.

    Args:
        ruta: Ruta del fichero de salida (se crean los directorios intermedios).
        datos: Contenido serializable.

    Returns:
        La ruta escrita.

    Raises:
        TypeError: Si hay valores no serializables.
        OSError: Si hay errores de escritura.
    """
    ruta = Path(ruta)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    texto = json.dumps(datos, sort_keys=True, indent=2, ensure_ascii=False)
    with open(ruta, "w", encoding="utf-8", newline="\n") as f:
        f.write(texto + "\n")
    return ruta


def leer_json(ruta: Path) -> Any:
    """Lee un fichero JSON en utf-8."""
    with open(ruta, "r", encoding="utf-8") as f:
        return json.load(f)


def escribir_csv(ruta: Path, cabecera: Sequence[str], filas: Iterable[Sequence[Any]]) -> Path:
    """
    Escribe una tabla CSV con cabecera.

    Args:
        ruta: Ruta del fichero de salida.
        cabecera: Nombres de columna.
        filas: Filas con el mismo número de columnas que la cabecera.

    Returns:
        La ruta escrita.

    Raises:
        ValueError: Si alguna fila no tiene el número de columnas de la cabecera.
    """
    ruta = Path(ruta)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    with open(ruta, "w", encoding="utf-8", newline="") as f:
        escritor = csv.writer(f, lineterminator="\n")
        escritor.writerow(cabecera)
        for i, fila in enumerate(filas):
            if len(fila) != len(cabecera):
                raise ValueError(
                    f"La fila {i} tiene {len(fila)} columnas, se esperaban {len(cabecera)}"
                )
            escritor.writerow([repr(v) if isinstance(v, float) else v for v in fila])
    return ruta
