"""Tests para el módulo harness.py."""

import json
import math
from unittest.mock import patch

import pytest

from interp_commutators.exceptions import DegenerateEnsembleError, InvalidArgumentError
from interp_commutators.grid import make_grid, symmetric_grid
from interp_commutators.harness import (
    CSV_HEADER,
    EnsembleConfig,
    cancellation_moments,
    classical_reduction_residual,
    estimate_constant,
    halving_ok,
    make_record,
    max_ratio_record,
    probe_unboundedness,
    residual_halving,
    run_suite,
    verify_higher,
    verify_kbridge,
    verify_t1,
    verify_teoA,
)
from interp_commutators.jmethod import ThetaQ
from interp_commutators.pairs import CouplePair
from interp_commutators.weights import WeightFamily

GRID = symmetric_grid(2, 10)
TQ1 = ThetaQ(0.5, 1)


def _cfg(**kwargs):
    base = {"trials": 3, "grids": (GRID,), "tq": TQ1, "seed": 7}
    base.update(kwargs)
    return EnsembleConfig(**base)


def _registros(*ratios, degenerados=()):
    return [make_record(i, "teoA", GRID, "log", "commutator", r, 1.0) for i, r in
            enumerate(ratios)] + [make_record(99, "teoA", GRID, "log", "commutator", 1e6, d)
                                  for d in degenerados]


# Registros y constante ------------------------------------------------------------------


def test_make_record_cociente():
    """Test de cociente de un ensayo normal."""
    r = make_record(0, "t1", GRID, "log", "cancel", 3.0, 2.0)

    assert r.ratio == 1.5
    assert not r.degenerate
    assert r.grid == GRID.key


@pytest.mark.parametrize("denominador", [0.0, 1e-13, float("nan")])
def test_make_record_degenerado(denominador):
    """Test de que denominadores < 1e-12 marcan el ensayo como degenerado."""
    r = make_record(0, "t1", GRID, "log", "cancel", 3.0, denominador)

    assert r.degenerate
    assert r.ratio == 0.0


def test_estimate_constant():
    """Test de que la constante es el máximo de los cocientes."""
    assert estimate_constant(_registros(0.7, 0.9)) == 0.9


def test_estimate_constant_ignora_degenerados():
    """Test de que los ensayos degenerados no cuentan."""
    registros = _registros(0.7, 0.9, degenerados=(1e-14,))

    assert estimate_constant(registros) == 0.9
    assert max_ratio_record(registros).trial == 1


def test_estimate_constant_union_de_semillas():
    """Test de que la estimación sobre la unión es el máximo de las estimaciones."""
    a, b = _registros(0.2, 0.5), _registros(0.8, 0.1)

    assert estimate_constant(a + b) == max(estimate_constant(a), estimate_constant(b))


def test_estimate_constant_todo_degenerado():
    """Test que lanza excepción si todos los ensayos son degenerados."""
    with pytest.raises(DegenerateEnsembleError):
        estimate_constant(_registros(degenerados=(0.0, 1e-20)))


def test_csv_row_coincide_con_cabecera():
    """Test de que las filas CSV tienen la longitud de la cabecera."""
    assert len(_registros(0.5)[0].csv_row()) == len(CSV_HEADER)


# Configuración ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [{"trials": 0}, {"grids": ()}, {"weights": ()}, {"order": 0}, {"dim": 0}, {"workers": 0}],
)
def test_config_invalida(kwargs):
    """Test que rechaza configuraciones sin sentido."""
    with pytest.raises(InvalidArgumentError):
        _cfg(**kwargs)


def test_config_ordena_rejillas():
    """Test de que las rejillas quedan ordenadas por anchura."""
    ancha, estrecha = symmetric_grid(3, 10), symmetric_grid(1, 10)
    cfg = _cfg(grids=(ancha, estrecha))

    assert cfg.grids == (estrecha, ancha)


def test_config_par_por_defecto():
    """Test de que el par por defecto es la escalera de dimensión dim."""
    cfg = _cfg(dim=4)

    assert cfg.src_pair == CouplePair.ladder(3)
    assert cfg.dst_pair == cfg.src_pair


def test_suite_desconocida():
    """Test que lanza excepción con una suite inexistente."""
    with pytest.raises(InvalidArgumentError):
        run_suite("teoB", _cfg())


# Puente con el método K -----------------------------------------------------------------


def test_kbridge_pasa():
    """Test de la identidad Omega^K_w = -Omega_{Gw} en pares aleatorios."""
    cfg = _cfg(weights=({"kind": "log"}, {"kind": "sin_log"}))
    report = verify_kbridge(cfg)

    assert report.passed
    assert report.diagnostics["max_relative_error"] <= 1e-9
    assert len(report.records) == 6


def test_determinismo_byte_a_byte(tmp_path):
    """Test de que dos ejecuciones con la misma semilla escriben el mismo JSON."""
    rutas = []
    for nombre in ("a", "b"):
        report = verify_kbridge(_cfg())
        rutas.append(report.write(tmp_path / nombre)[0])

    assert rutas[0].read_bytes() == rutas[1].read_bytes()
    assert (tmp_path / "a" / "kbridge_trials.csv").exists()


def test_determinismo_en_paralelo():
    """Test de que el informe no depende del número de procesos."""
    secuencial = verify_kbridge(_cfg(trials=4))
    paralelo = verify_kbridge(_cfg(trials=4, workers=2))

    assert json.dumps(secuencial.to_dict(), sort_keys=True) == \
        json.dumps(paralelo.to_dict(), sort_keys=True)


def test_semillas_distintas_cambian_registros():
    """Test de que la semilla controla los ensayos."""
    a = verify_kbridge(_cfg(seed=1)).to_dict()["trials"]
    b = verify_kbridge(_cfg(seed=2)).to_dict()["trials"]

    assert a != b


# Conmutador de primer orden ---------------------------------------------------------------


def test_teoA_identidad():
    """Test de que el conmutador con la identidad da cocientes nulos y pasa."""
    report = verify_teoA(_cfg(operator="identity"))

    assert report.passed
    assert report.max_ratio("commutator") == 0.0
    assert report.diagnostics["max_cancellation"] == 0.0
    assert report.diagnostics["residual_halving"] == 1.0


def test_teoA_peso_nulo_degenerado():
    """Test de que un peso nulo deja todos los ensayos degenerados y no pasa."""
    report = verify_teoA(_cfg(weights=({"kind": "constant", "c": 0.0},)))
    d = report.to_dict()

    assert not report.passed
    assert report.diagnostics["all_degenerate"]
    assert d["max_ratio"] is None
    assert d["degenerate_count"] == len(report.records)


def test_teoA_operador_aleatorio():
    """Test de que los ensayos aleatorios dan cocientes finitos y cancelación exacta."""
    report = verify_teoA(_cfg())

    assert all(math.isfinite(r.ratio) for r in report.records)
    assert report.diagnostics["max_cancellation"] <= 1e-10
    assert report.degenerate_count == 0


def test_residual_halving_primer_orden():
    """Test de que el residuo se divide por dos al doblar los nodos."""
    cfg = _cfg(
        grids=(symmetric_grid(5, 20),),
        pair=CouplePair.scalar(1.0, 1.0),
        dst=CouplePair.scalar(1.0, 0.25),
        operator=((1.0,),),
        dim=1,
    )

    assert 2.0 / 1.5 <= residual_halving(cfg, {"kind": "log"}) <= 2.0 * 1.5


@pytest.mark.parametrize("halving, esperado", [
    (1.0, True), (2.0, True), (1.4, True), (2.9, True), (1.2, False), (4.0, False),
    (math.inf, False), (math.nan, False),
])
def test_halving_ok(halving, esperado):
    """Test del criterio de convergencia de primer orden del residuo."""
    assert halving_ok(halving) is esperado


def test_teoA_falla_sin_primer_orden():
    """Test de que un residuo que no se divide por dos hace fallar la suite."""
    with patch("interp_commutators.harness.residual_halving", return_value=4.0):
        report = verify_teoA(_cfg(operator="identity"))

    assert not report.passed
    assert report.diagnostics["residual_halving"] == 4.0


# Órdenes superiores ---------------------------------------------------------------------------


def test_cancellation_moments_cuenta():
    """Test del número de momentos de cancelación por orden."""
    w = WeightFamily.log()

    assert len(cancellation_moments(w, GRID, 2)) == 3
    assert len(cancellation_moments(w, GRID, 3)) == 7


@pytest.mark.parametrize("n", [2, 3])
def test_reduccion_clasica(n):
    """Test de que anular sum u log^k basta en el caso clásico."""
    assert classical_reduction_residual(symmetric_grid(3, 20), n) <= 1e-8


def test_reduccion_clasica_orden_invalido():
    """Test que exige n >= 2."""
    with pytest.raises(InvalidArgumentError):
        classical_reduction_residual(GRID, 1)


def test_higher_orden_dos():
    """Test de la suite de orden 2 en una rejilla pequeña."""
    report = verify_higher(_cfg(trials=2))

    assert report.diagnostics["homogeneity_error"] <= 1e-12
    assert report.diagnostics["linearity_error"] <= 1e-12
    assert {r.variant for r in report.records} == {"pw_power", "w_power", "commutator",
                                                   "product", "second_order"}
    assert all(math.isfinite(r.ratio) for r in report.records)
    assert len(report.diagnostics["max_ratio_second_order"]) == 1
    assert math.isfinite(report.diagnostics["max_second_order_gap"])
    assert report.passed


def test_higher_orden_tres_sin_segundo_orden():
    """Test de que el estimador de segundo orden solo se registra con n = 2."""
    report = verify_higher(_cfg(trials=1), n=3)

    assert "second_order" not in {r.variant for r in report.records}
    assert "max_second_order_gap" not in report.diagnostics


# Sonda de no acotación ---------------------------------------------------------------------------


def test_probe_crece_con_la_rejilla():
    """Test de que los cocientes de Omega crecen en i y al ensanchar la rejilla."""
    report = probe_unboundedness((symmetric_grid(6, 10), symmetric_grid(4, 10)), TQ1)

    assert report.passed
    assert report.diagnostics["monotone"]
    assert report.diagnostics["widening_nondecreasing"]
    assert report.diagnostics["omega_growth"] > 1.0


def test_t1_cocientes_finitos():
    """Test de la suite del teorema de representación en una rejilla."""
    report = verify_t1(_cfg(grids=(symmetric_grid(4, 10),)))

    assert {r.variant for r in report.records} == {"cancel", "no_cancel"}
    assert all(math.isfinite(r.ratio) for r in report.records)
    assert report.passed


# Escala de aceptación ----------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.parametrize("q", [1, math.inf])
def test_aceptacion_teoA(q):
    """Test de estabilidad del conmutador en [1e-4, 1e4] y [1e-6, 1e6] con 200 ensayos."""
    cfg = EnsembleConfig(trials=200, tq=ThetaQ(0.5, q), dim=3, workers=4)
    report = verify_teoA(cfg)

    assert [g.t_min for g in cfg.grids] == pytest.approx([1e-4, 1e-6])
    assert cfg.src_pair.dim == 3
    assert len(report.records) == 3 * 200 * 2
    assert report.passed
    assert report.diagnostics["spread"] <= 2.0
    assert report.diagnostics["probe_growth"] >= 1.5
    assert report.diagnostics["probe_monotone"]


@pytest.mark.slow
def test_aceptacion_teoA_sin_log():
    """Test de estabilidad del conmutador con el peso sin(log t)."""
    report = verify_teoA(EnsembleConfig(trials=20, weights=({"kind": "log"},
                                                            {"kind": "sin_log"})))

    assert report.passed


@pytest.mark.slow
def test_aceptacion_t1():
    """Test de la variante con cancelación estable y la variante sin cancelación creciente."""
    report = verify_t1(EnsembleConfig(trials=100, workers=4))

    assert report.passed


@pytest.mark.slow
def test_aceptacion_probe():
    """Test de la sonda en las rejillas por defecto con q = 2."""
    report = run_suite("probe", EnsembleConfig())

    assert report.passed
    assert report.diagnostics["c2_growth"] > 1.0


@pytest.mark.slow
def test_aceptacion_higher():
    """Test de la suite de orden 2 en las rejillas por defecto."""
    report = verify_higher(EnsembleConfig(trials=10, weights=({"kind": "log"},)), n=2)

    assert report.passed


@pytest.mark.slow
def test_aceptacion_rejilla_fina():
    """Test de la identidad K en una rejilla de 2001 nodos."""
    report = verify_kbridge(EnsembleConfig(trials=20, grids=(make_grid(1e-6, 1e6, 2001),)))

    assert report.passed
