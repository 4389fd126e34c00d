"""Tests para el módulo weights.py."""

import math

import numpy as np
import pytest

from interp_commutators.exceptions import InvalidArgumentError
from interp_commutators.grid import GridFunction, make_grid, symmetric_grid
from interp_commutators.weights import (
    WeightFamily,
    decompose_l3,
    g_transform,
    hardy_average,
    qbar,
    rearrange,
    sharp,
    w1_seminorm,
    w_norm,
    weight_from_spec,
    weight_profile,
)


@pytest.fixture
def grid_ancha():
    """Rejilla [1e-6, 1e6] con 1201 nodos."""
    return make_grid(1e-6, 1e6, 1201)


@pytest.fixture
def grid_fina():
    """Rejilla [1e-6, 1e6] con 2401 nodos."""
    return make_grid(1e-6, 1e6, 2401)


def _estables(grid):
    return grid.stable_mask(1e3)


# Promedio de Hardy y sharp -----------------------------------------------------


def test_constante_promedio_exacto(grid_ancha):
    """Test de que P(c) = c en modo extensión."""
    w = WeightFamily.constant(2.5)
    pw = hardy_average(w, grid_ancha, mode="extension")

    np.testing.assert_allclose(pw.values, 2.5, rtol=1e-12)
    assert w_norm(w, grid_ancha, mode="extension") < 1e-12
    assert w1_seminorm(w, grid_ancha) == 0.0


def test_log_promedio_cola_exacta(grid_ancha):
    """Test de Pw = log t - 1 para el peso logarítmico."""
    w = WeightFamily.log()
    pw = hardy_average(w, grid_ancha)
    m = _estables(grid_ancha)

    np.testing.assert_allclose(pw.values[m], np.log(grid_ancha.nodes[m]) - 1.0, atol=0.02)
    np.testing.assert_allclose(sharp(w, grid_ancha).values[m], -1.0, atol=0.02)
    assert w_norm(w, grid_ancha) == pytest.approx(1.0, rel=0.02)


def test_log_modo_analitico(grid_ancha):
    """Test de que el modo analítico da w# = -1 en todos los nodos."""
    sh = sharp(WeightFamily.log(), grid_ancha, mode="analytic")

    np.testing.assert_allclose(sh.values, -1.0, atol=1e-10)


def test_peso_identidad_con_cola():
    """Test de P(t) = t / 2 con la primitiva t^2 / 2."""
    grid = make_grid(1e-3, 1e3, 1201)
    w = WeightFamily.from_callable("identity", lambda t: t, tail=lambda t: t ** 2 / 2.0)
    pw = hardy_average(w, grid)

    np.testing.assert_allclose(pw.values, grid.nodes / 2.0, rtol=0.03)


def test_sin_log_sharp(grid_fina):
    """Test de w# = -(sin(log t) + cos(log t)) / 2."""
    sh = sharp(WeightFamily.sin_log(), grid_fina)
    m = _estables(grid_fina)
    x = grid_fina.log_nodes[m]

    np.testing.assert_allclose(sh.values[m], -(np.sin(x) + np.cos(x)) / 2.0, atol=0.02)
    assert w_norm(WeightFamily.sin_log(), grid_fina) == pytest.approx(math.sqrt(2) / 2, rel=0.02)


def test_modos_de_hardy_invalidos(grid_ancha):
    """Test que rechaza modos desconocidos o sin cola exacta."""
    g = GridFunction.constant(grid_ancha, 1.0)

    with pytest.raises(InvalidArgumentError):
        hardy_average(WeightFamily.log(), grid_ancha, mode="trapecio")
    with pytest.raises(InvalidArgumentError):
        hardy_average(g, grid_ancha, mode="exact")
    with pytest.raises(InvalidArgumentError):
        hardy_average(WeightFamily.phi_sampled([-1, 1], [0, 1]), grid_ancha, mode="analytic")


def test_burn_in_sin_nodos(grid_ancha):
    """Test que rechaza un burn-in que deja la rejilla vacía."""
    with pytest.raises(InvalidArgumentError):
        w_norm(WeightFamily.log(), grid_ancha, burn_in=1e20)


# Seminorma W1 ------------------------------------------------------------------


def test_w1_log_exacta(grid_ancha):
    """Test de que la seminorma W1 de log es 1 exactamente."""
    assert w1_seminorm(WeightFamily.log(), grid_ancha) == 1.0


def test_w1_sin_log(grid_ancha):
    """Test de sup |t w'(t)| = 1 para sin(log t)."""
    assert w1_seminorm(WeightFamily.sin_log(), grid_ancha) == pytest.approx(1.0, abs=0.02)


def test_w1_diferencias_hacia_delante(grid_ancha):
    """Test de la seminorma W1 por diferencias sobre muestras de log."""
    muestras = WeightFamily.samples(GridFunction.from_callable(grid_ancha, np.log))

    assert w1_seminorm(muestras, grid_ancha) == pytest.approx(1.0, abs=0.02)


def test_w1_contenido_en_w(grid_fina):
    """Test de que ||w||_W no supera la seminorma W1 salvo O(Delta)."""
    for w in (WeightFamily.log(), WeightFamily.sin_log(),
              WeightFamily.phi_sampled([-20, 0, 3, 20], [0, 2, -1, 5])):
        assert w_norm(w, grid_fina) <= w1_seminorm(w, grid_fina) + 2 * grid_fina.haar_step


# Lemas de acotación --------------------------------------------------------------


def test_sharp_conmuta_con_promedio(grid_ancha):
    """Test de (Pw)# = P(w#) y ||(Pw)#|| <= ||w#|| en 50 pesos acotados aleatorios."""
    rng = np.random.default_rng(20240917)
    for _ in range(50):
        w = GridFunction(grid_ancha, rng.uniform(-1.0, 1.0, grid_ancha.n_nodes))
        w_sharp = sharp(w, grid_ancha, mode="extension")
        izquierda = sharp(hardy_average(w, grid_ancha, mode="extension"), grid_ancha,
                          mode="extension")
        derecha = hardy_average(w_sharp, grid_ancha, mode="extension")

        np.testing.assert_allclose(izquierda.values, derecha.values, rtol=0, atol=1e-12)
        assert np.max(np.abs(izquierda.values)) <= np.max(np.abs(w_sharp.values)) + 1e-12


def test_crecimiento_logaritmico(grid_fina):
    """Test de |Pw(t)| <= |Pw(1)| + ||w||_W |log t| salvo O(Delta)."""
    for w in (WeightFamily.log(), WeightFamily.sin_log()):
        perfil = weight_profile(w, grid_fina)
        m = _estables(grid_fina)
        pw1 = abs(perfil.pw.values[grid_fina.unit_index()])
        cota = pw1 + perfil.w_norm * np.abs(grid_fina.log_nodes[m]) + 0.05

        assert np.all(np.abs(perfil.pw.values[m]) <= cota)


def test_decaimiento_en_rejillas_anidadas():
    """Test de que t^theta w(t) en t_min decrece al ensanchar la rejilla."""
    theta = 0.5
    for w in (WeightFamily.log(), WeightFamily.power_log(2), WeightFamily.sin_log()):
        izq, der = [], []
        for d in (2, 4, 6):
            grid = symmetric_grid(d, 10)
            valores = w.on(grid).values
            izq.append(abs(grid.t_min ** theta * valores[0]))
            der.append(abs(grid.t_max ** -theta * valores[-1]))

        assert izq[0] >= izq[1] >= izq[2]
        assert der[0] >= der[1] >= der[2]


def test_sharp_lineal(grid_ancha):
    """Test de linealidad de sharp sobre la suma de familias."""
    log, sin = WeightFamily.log(), WeightFamily.sin_log()
    combinada = log + sin.scaled(-2.0)

    np.testing.assert_allclose(
        sharp(combinada, grid_ancha).values,
        sharp(log, grid_ancha).values - 2.0 * sharp(sin, grid_ancha).values,
        atol=1e-9,
    )


def test_perfil_consistente(grid_ancha):
    """Test de que el perfil cumple sharp = pw - w y w_norm = max |sharp|."""
    perfil = weight_profile(WeightFamily.sin_log(), grid_ancha)
    m = _estables(grid_ancha)

    assert np.array_equal(perfil.sharp.values, perfil.pw.values - perfil.w.values)
    assert perfil.w_norm == np.max(np.abs(perfil.sharp.values[m]))


# Descomposiciones ------------------------------------------------------------------


def test_decompose_l3_log(grid_ancha):
    """Test de la descomposición del peso logarítmico."""
    acotada, parte_w1 = decompose_l3(WeightFamily.log(), grid_ancha, mode="analytic")

    np.testing.assert_allclose(acotada.values, 1.0, atol=1e-10)
    np.testing.assert_allclose(parte_w1.values, grid_ancha.log_nodes - 1.0, atol=1e-10)


def test_decompose_l3_constante(grid_ancha):
    """Test de la descomposición de una constante en (0, c)."""
    acotada, parte_w1 = decompose_l3(WeightFamily.constant(4.0), grid_ancha)

    np.testing.assert_allclose(acotada.values, 0.0, atol=1e-10)
    np.testing.assert_allclose(parte_w1.values, 4.0, rtol=1e-12)


@pytest.mark.parametrize("w", [WeightFamily.log(), WeightFamily.sin_log(),
                               WeightFamily.power_log(3), WeightFamily.constant(-1.5)])
def test_decompose_l3_reconstruye(grid_ancha, w):
    """Test de que las dos partes suman w."""
    acotada, parte_w1 = decompose_l3(w, grid_ancha)

    np.testing.assert_allclose((acotada + parte_w1).values, w.on(grid_ancha).values,
                               rtol=1e-12, atol=1e-12)


def test_decompose_l3_parte_w1_acotada(grid_fina):
    """Test de que la seminorma W1 de Pw no supera ||w||_W salvo O(Delta)."""
    w = WeightFamily.sin_log()
    acotada, parte_w1 = decompose_l3(w, grid_fina)
    norma = w_norm(w, grid_fina)

    assert np.max(np.abs(acotada.values[_estables(grid_fina)])) == pytest.approx(norma)
    assert w1_seminorm(parte_w1, grid_fina) <= norma + 2 * grid_fina.haar_step


# Transformadas Q y G ---------------------------------------------------------------


def test_qbar_constante():
    """Test de Q(1) = -log t."""
    grid = symmetric_grid(3, 20)

    np.testing.assert_allclose(qbar(GridFunction.constant(grid, 1.0)).values, -grid.log_nodes,
                               atol=1e-9)
    assert np.all(qbar(GridFunction.constant(grid, 0.0)).values == 0.0)


def test_qbar_sin_unidad():
    """Test que qbar exige t = 1 en la rejilla."""
    with pytest.raises(InvalidArgumentError):
        qbar(GridFunction.constant(make_grid(2.0, 20.0, 11), 1.0))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_qbar_en_w(seed):
    """Test de ||Q g||_W <= 2 sup |g| para g acotada aleatoria."""
    grid = symmetric_grid(4, 20)
    g = GridFunction(grid, np.random.default_rng(seed).uniform(-1.0, 1.0, grid.n_nodes))

    assert w_norm(qbar(g), grid) <= 2.0 * np.max(np.abs(g.values))


def test_g_transform_constante():
    """Test de G(1) = log s."""
    grid = symmetric_grid(3, 20)
    gw = g_transform(WeightFamily.constant(1.0), grid)

    np.testing.assert_allclose(gw.values, grid.log_nodes, atol=1e-9)
    assert gw.values[grid.unit_index()] == 0.0
    assert np.all(g_transform(GridFunction.constant(grid, 0.0)).values == 0.0)


def test_g_transform_seminorma():
    """Test de sup |s (Gw)'(s)| = sup |w| salvo un paso."""
    grid = symmetric_grid(4, 40)
    gw = g_transform(WeightFamily.sin_log(), grid)

    assert w1_seminorm(gw, grid) == pytest.approx(1.0, abs=grid.haar_step)


def test_g_transform_requiere_rejilla():
    """Test que g_transform de una familia exige la rejilla."""
    with pytest.raises(InvalidArgumentError):
        g_transform(WeightFamily.log())


# Reordenación ------------------------------------------------------------------------


def test_rearrange_ya_decreciente():
    """Test de que una función decreciente se conserva salvo el último nodo."""
    grid = make_grid(1e-2, 1e2, 81)
    g = GridFunction.from_callable(grid, lambda t: 1.0 / (1.0 + t))

    np.testing.assert_allclose(rearrange(g).values[:-1], g.values[:-1], rtol=1e-10)


def test_rearrange_constante():
    """Test de la reordenación de una constante."""
    grid = make_grid(1e-2, 1e2, 81)

    np.testing.assert_allclose(rearrange(GridFunction.constant(grid, 3.0)).values, 3.0)


def test_rearrange_conserva_masa():
    """Test de conservación de la masa de |sin(log t)| y monotonía."""
    grid = make_grid(1e-3, 1e3, 601)
    g = GridFunction.from_callable(grid, lambda t: np.abs(np.sin(np.log(t))))
    estrella = rearrange(g)
    masa = np.sum(g.values[:-1] * grid.lebesgue_steps)

    assert np.sum(estrella.values[:-1] * grid.lebesgue_steps) == pytest.approx(masa, rel=1e-9)
    assert np.all(np.diff(estrella.values) <= 0)


# Construcción de familias ------------------------------------------------------------


def test_cola_exacta_incoherente():
    """Test que rechaza una cola cerrada que no concuerda con la cuadratura."""
    with pytest.raises(InvalidArgumentError):
        WeightFamily.from_callable("malo", np.log, tail=lambda t: t * np.log(t) + t)


def test_power_log_orden_invalido():
    """Test que power_log exige n >= 1."""
    with pytest.raises(InvalidArgumentError):
        WeightFamily.power_log(0)


def test_phi_sampled_invalida():
    """Test que rechaza muestras no crecientes."""
    with pytest.raises(InvalidArgumentError):
        WeightFamily.phi_sampled([0, 0, 1], [1, 2, 3])


def test_muestras_en_otra_rejilla(grid_ancha):
    """Test que un peso muestreado no se evalúa en otra rejilla."""
    w = WeightFamily.samples(GridFunction.constant(make_grid(1.0, 10.0, 5), 1.0))

    with pytest.raises(InvalidArgumentError):
        w.on(grid_ancha)


def test_weight_from_spec(grid_ancha):
    """Test de construcción de pesos desde la configuración."""
    identidad = weight_from_spec({"kind": "phi_log", "x": [-20, 20], "y": [-20, 20]})

    assert weight_from_spec({"kind": "power_log", "n": 2}).describe() == "power_log(n=2)"
    assert weight_from_spec({"kind": "constant", "c": 2}).params == {"c": 2.0}
    assert w1_seminorm(identidad, grid_ancha) == pytest.approx(1.0)
    assert w_norm(identidad, grid_ancha) == pytest.approx(1.0, rel=0.02)


@pytest.mark.parametrize("spec", [{"kind": "gauss"}, {"kind": "phi_log", "x": [0, 1]}, {}])
def test_weight_from_spec_invalido(spec):
    """Test de tipos desconocidos o parámetros ausentes."""
    with pytest.raises(InvalidArgumentError):
        weight_from_spec(spec)
