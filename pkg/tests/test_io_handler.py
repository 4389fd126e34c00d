"""Tests para el módulo io_handler.py."""

import pytest

from interp_commutators.io_handler import escribir_csv, escribir_json, leer_json


def test_escribir_json_determinista(tmp_path):
    """Test de que el orden de inserción no cambia los bytes escritos."""
    a = escribir_json(tmp_path / "a.json", {"b": 1, "a": [0.5, None], "ñ": "sí"})
    b = escribir_json(tmp_path / "b.json", {"ñ": "sí", "a": [0.5, None], "b": 1})

    assert a.read_bytes() == b.read_bytes()
    assert a.read_text(encoding="utf-8").endswith("}\n")
    assert "ñ" in a.read_text(encoding="utf-8")


def test_escribir_json_crea_directorios(tmp_path):
    """Test de creación de directorios intermedios."""
    ruta = escribir_json(tmp_path / "x" / "y" / "r.json", {"pass": True})

    assert leer_json(ruta) == {"pass": True}


def test_escribir_json_no_serializable(tmp_path):
    """Test que lanza excepción con valores no serializables."""
    with pytest.raises(TypeError):
        escribir_json(tmp_path / "r.json", {"x": object()})


def test_escribir_csv(tmp_path):
    """Test de escritura con repr de los reales."""
    ruta = escribir_csv(tmp_path / "t.csv", ["t", "u0"], [[0.1, 1], [1e-300, -2.5]])

    assert ruta.read_text(encoding="utf-8").splitlines() == ["t,u0", "0.1,1", "1e-300,-2.5"]


def test_escribir_csv_fila_incorrecta(tmp_path):
    """Test que rechaza filas con un número de columnas distinto de la cabecera."""
    with pytest.raises(ValueError):
        escribir_csv(tmp_path / "t.csv", ["t", "u0"], [[1.0]])
