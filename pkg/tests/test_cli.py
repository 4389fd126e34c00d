"""Tests para el módulo cli.py."""

import json
import logging
from pathlib import Path
from unittest.mock import patch

import pytest

from interp_commutators.cli import (
    EXIT_ASSERTION_FAIL,
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_ERROR,
    EXIT_SUCCESS,
    main,
    parse_args,
)
from interp_commutators.config import ENV_OUTPUT_DIR
from interp_commutators.exceptions import CertificationError

REJILLA = {"half_width_decades": 2, "nodes_per_decade": 10}


@pytest.fixture(autouse=True)
def sin_fichero_de_log(monkeypatch):
    """Evita que los tests escriban en logs/ del proyecto."""
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    with patch("interp_commutators.cli.setup_logging",
               return_value=logging.getLogger("interp_commutators")):
        yield


@pytest.fixture
def config(tmp_path):
    """Escribe una configuración con salida en tmp_path/salida."""
    def _escribir(datos):
        datos = {"grid": REJILLA, "output": {"dir": str(tmp_path / "salida")}, **datos}
        ruta = tmp_path / "config.json"
        ruta.write_text(json.dumps(datos), encoding="utf-8")
        return ruta
    return _escribir


def _leer(ruta: Path) -> dict:
    return json.loads(ruta.read_text(encoding="utf-8"))


# Parseo de argumentos ---------------------------------------------------------------------


def test_parse_args_minimal():
    """Test del parseo de argumentos mínimos."""
    args = parse_args(["--config", "config.json", "weight"])

    assert args.config == Path("config.json")
    assert args.command == "weight"
    assert args.debug is False


def test_parse_args_verify():
    """Test del parseo del subcomando verify con --debug."""
    args = parse_args(["--config", "c.json", "--debug", "verify", "teoA"])

    assert args.command == "verify"
    assert args.suite == "teoA"
    assert args.debug is True


@pytest.mark.parametrize(
    "argv",
    [
        ["weight"],
        ["--config", "c.json"],
        ["--config", "c.json", "verify", "teoB"],
        ["--config", "c.json", "integrar"],
    ],
)
def test_argumentos_invalidos(argv):
    """Test de que los errores de argparse salen con código 2."""
    assert main(argv) == EXIT_CONFIG_ERROR


def test_version(capsys):
    """Test de que --version termina con éxito."""
    assert main(["--version"]) == EXIT_SUCCESS
    assert "0.1.0" in capsys.readouterr().out


# Configuración -------------------------------------------------------------------------


def test_fichero_inexistente(tmp_path):
    """Test con fichero de configuración inexistente."""
    assert main(["--config", str(tmp_path / "nada.json"), "weight"]) == EXIT_CONFIG_ERROR


def test_clave_desconocida(config, capsys):
    """Test de que una clave desconocida da código 2 y nombra la clave."""
    ruta = config({"tq": {"theta": 0.5, "qq": 2}})

    assert main(["--config", str(ruta), "weight"]) == EXIT_CONFIG_ERROR
    assert "tq.qq" in capsys.readouterr().err


def test_falta_f(config):
    """Test de que jnorm sin f es un error de configuración."""
    assert main(["--config", str(config({})), "jnorm"]) == EXIT_CONFIG_ERROR


# weight ---------------------------------------------------------------------------------


def test_weight_escribe_perfil(config, tmp_path):
    """Test del perfil del peso logarítmico."""
    ruta = config({"weight": {"kind": "log"}})

    assert main(["--config", str(ruta), "weight"]) == EXIT_SUCCESS
    resumen = _leer(tmp_path / "salida" / "weight_summary.json")
    assert resumen["weight"] == "log"
    assert resumen["w_norm"] == pytest.approx(1.0, rel=0.15)
    lineas = (tmp_path / "salida" / "weight_profile.csv").read_text().splitlines()
    assert lineas[0] == "t,w,Pw,w_sharp,Gw"
    assert len(lineas) == 42


def test_directorio_por_entorno(config, tmp_path, monkeypatch):
    """Test de que la variable de entorno sustituye a output.dir."""
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "entorno"))
    ruta = config({"weight": {"kind": "sin_log"}, "output": {"dir": "ignorado",
                                                             "formats": ["json"]}})

    assert main(["--config", str(ruta), "weight"]) == EXIT_SUCCESS
    assert (tmp_path / "entorno" / "weight_summary.json").exists()
    assert not (tmp_path / "entorno" / "weight_profile.csv").exists()


# jnorm ----------------------------------------------------------------------------------


def test_jnorm_escalar(config, tmp_path):
    """Test de la norma J de f = 1 en el par escalar con q = 1."""
    ruta = config({"tq": {"theta": 0.5, "q": 1}, "f": [1.0],
                   "method": ["fundamental", "solver"]})

    assert main(["--config", str(ruta), "jnorm"]) == EXIT_SUCCESS
    resumen = _leer(tmp_path / "salida" / "jnorm.json")
    assert resumen["values"]["fundamental"] == pytest.approx(1.0, rel=1e-9)
    assert resumen["values"]["solver"] == pytest.approx(1.0, rel=1e-6)
    assert resumen["certification"]["status"] == "certified"
    assert resumen["config"]["f"] == [1.0]
    assert (tmp_path / "salida" / "jnorm_representation.csv").exists()


def test_jnorm_oraculo_rechazado(config):
    """Test de que el oráculo en una rejilla grande sale con código 3."""
    ruta = config({"f": [1.0], "method": "oracle"})

    assert main(["--config", str(ruta), "jnorm"]) == EXIT_NUMERICAL_ERROR


def test_jnorm_par_no_soportado(config):
    """Test de que la representación fundamental en un par linf sale con código 2."""
    ruta = config({
        "pair": {"norm0": {"p": "inf", "scale": [1.0]}, "norm1": {"p": 1, "scale": [1.0]}},
        "f": [1.0],
        "method": "fundamental",
    })

    assert main(["--config", str(ruta), "jnorm"]) == EXIT_CONFIG_ERROR


def test_jnorm_certificacion_fallida(config, tmp_path):
    """Test de que un fallo de certificación escribe el informe y sale con código 3."""
    ruta = config({"tq": {"theta": 0.5, "q": 1}, "f": [1.0], "method": "solver"})
    error = CertificationError("sin certificar", cost=3.0, bound=1.0)

    with patch("interp_commutators.cli.near_optimal_selector", side_effect=error):
        assert main(["--config", str(ruta), "jnorm"]) == EXIT_NUMERICAL_ERROR
    resumen = _leer(tmp_path / "salida" / "jnorm.json")
    assert resumen["certification"] == {"status": "failed", "cost": 3.0, "bound": 1.0}


# commute --------------------------------------------------------------------------------


def test_commute_identidad(config, tmp_path):
    """Test de que [I, Omega_w] f = 0 y se escriben los órdenes 0..n."""
    ruta = config({
        "tq": {"theta": 0.5, "q": 1},
        "pair": {"ladder": 2},
        "operator": "identity",
        "f": [1.0, 0.0, -1.0],
        "order": 2,
    })

    assert main(["--config", str(ruta), "commute"]) == EXIT_SUCCESS
    resumen = _leer(tmp_path / "salida" / "commute.json")
    assert resumen["commutator"] == [0.0, 0.0, 0.0]
    assert resumen["commutator_norm"] == 0.0
    assert sorted(resumen["higher"]) == ["0", "1", "2"]
    assert resumen["higher"]["0"] == [1.0, 0.0, -1.0]
    assert (tmp_path / "salida" / "good_representation.csv").exists()


# verify ---------------------------------------------------------------------------------


def test_verify_kbridge(config, tmp_path):
    """Test de la suite kbridge pequeña con código 0."""
    ruta = config({
        "tq": {"theta": 0.5, "q": 1},
        "harness": {"trials": 2, "grids": [REJILLA]},
    })

    assert main(["--config", str(ruta), "verify", "kbridge"]) == EXIT_SUCCESS
    informe = _leer(tmp_path / "salida" / "kbridge_report.json")
    assert informe["pass"] is True
    assert informe["suite"] == "kbridge"
    assert informe["config"]["run"]["harness"]["trials"] == 2
    assert (tmp_path / "salida" / "kbridge_trials.csv").exists()


def test_verify_teoA_identidad(config):
    """Test de la suite teoA con la identidad sobre la escalera."""
    ruta = config({
        "tq": {"theta": 0.5, "q": 1},
        "pair": {"ladder": 2},
        "operator": "identity",
        "harness": {"trials": 2, "grids": [REJILLA]},
    })

    assert main(["--config", str(ruta), "verify", "teoA"]) == EXIT_SUCCESS


def test_verify_teoA_usa_harness_dim(config, tmp_path):
    """Test de que sin sección pair la suite mide el conmutador en dimensión harness.dim."""
    ruta = config({
        "tq": {"theta": 0.5, "q": 1},
        "operator": "random",
        "harness": {"trials": 2, "dim": 3, "grids": [REJILLA]},
    })

    assert main(["--config", str(ruta), "verify", "teoA"]) in (EXIT_SUCCESS, EXIT_ASSERTION_FAIL)
    informe = _leer(tmp_path / "salida" / "teoA_report.json")
    assert informe["config"]["dim"] == 3
    assert len(informe["config"]["pair"]["norm0"]["scale"]) == 3
    assert max(informe["diagnostics"]["max_ratio_commutator"]) > 0.0


def test_verify_degenerado(config, tmp_path):
    """Test de que un conjunto degenerado no pasa y sale con código 1."""
    ruta = config({
        "tq": {"theta": 0.5, "q": 1},
        "pair": {"ladder": 2},
        "weight": {"kind": "constant", "c": 0.0},
        "harness": {"trials": 2, "grids": [REJILLA]},
    })

    assert main(["--config", str(ruta), "verify", "teoA"]) == EXIT_ASSERTION_FAIL
    informe = _leer(tmp_path / "salida" / "teoA_report.json")
    assert informe["diagnostics"]["all_degenerate"] is True
    assert informe["max_ratio"] is None


def test_error_de_escritura(config):
    """Test de que un OSError al escribir resultados sale con código 2."""
    ruta = config({"weight": {"kind": "log"}})

    with patch("interp_commutators.cli.escribir_csv", side_effect=OSError("disco lleno")):
        assert main(["--config", str(ruta), "weight"]) == EXIT_CONFIG_ERROR
