"""Pruebas del modelo de lectura: curvas α, muestreo y calibración"""

import numpy as np
import pytest

from nucleo.modelo_lectura import (
    ModeloLectura,
    AnclaCalibracion,
    AnclasCalibracion,
    MODELO_REFERENCIA,
    ANCLAS_REFERENCIA,
    SIGMA_REFERENCIA,
    SEPARACION_NORMALIZADA,
    probabilidades_conversion,
    alfas,
    alfas_lote,
    curvas_conversion,
    densidad_registro,
    argmax_alfa1,
    cdf_normal,
    muestrear_registros,
    muestrear_registro,
    clasificar,
    clasificar_registros,
    calibrar,
)
from nucleo.optimizacion_criterio import encontrar_cruce
from nucleo.errores import CalibracionFallida, ErrorConfiguracion, SubRestringido

FIJOS_REFERENCIA = {'sigma_env': SIGMA_REFERENCIA, 'separacion': SEPARACION_NORMALIZADA}


class TestModelo:

    def test_parametros_invalidos(self):
        with pytest.raises(ValueError):
            ModeloLectura(-1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            ModeloLectura(1.0, 1.0, 0.3)
        with pytest.raises(ValueError):
            ModeloLectura(-1.0, 1.0, 0.3, w_decay=0.6, w_therm=0.5)

    def test_anclas_repetidas(self):
        with pytest.raises(ValueError):
            AnclasCalibracion((AnclaCalibracion(0.1, 1.0), AnclaCalibracion(0.1, alfa1=0.5)))


class TestCurvas:

    def test_valores_de_referencia(self, modelo_referencia):
        a = alfas(modelo_referencia, 0.11)
        assert a.alfa0 == pytest.approx(1.178, abs=1e-3)
        assert a.alfa1 == pytest.approx(0.764, abs=1e-3)
        assert alfas(modelo_referencia, -0.5828).alfa0 == pytest.approx(1.0, abs=5e-3)

    def test_curvas_monotonas(self, modelo_referencia):
        lambdas = np.linspace(-3, 3, 2001)
        p_g0, p_e0 = curvas_conversion(modelo_referencia, lambdas)
        assert np.all(np.diff(p_g0) >= 0)
        assert np.all(np.diff(p_e0) >= 0)
        a0, _ = alfas_lote(modelo_referencia, lambdas)
        assert np.all(np.diff(a0) >= 0)

    def test_umbrales_infinitos(self, modelo_referencia):
        abajo = probabilidades_conversion(modelo_referencia, -np.inf)
        arriba = probabilidades_conversion(modelo_referencia, np.inf)
        assert (abajo.p_g0, abajo.p_e0) == (0.0, 0.0)
        assert (arriba.p_g0, arriba.p_e0) == (1.0, 1.0)

    def test_simetrico_en_punto_medio(self, modelo_simetrico):
        a = alfas(modelo_simetrico, 0.0)
        assert a.alfa0 == pytest.approx(1.0, abs=1e-15)
        assert argmax_alfa1(modelo_simetrico, np.linspace(-1.5, 1.5, 601)) == pytest.approx(0.0, abs=1e-12)

    def test_maximo_de_alfa1_interior(self, modelo_referencia):
        malla = np.linspace(-1.5, 1.5, 601)
        # α1 = (1 − w_decay − w_therm)(Φ_g − Φ_e): máximo en el punto medio de los centros
        modelo = ModeloLectura(-0.8, 1.2, 0.5, w_decay=0.2, w_therm=0.05)
        pico = argmax_alfa1(modelo, malla)
        assert malla[0] < pico < malla[-1]
        assert pico == pytest.approx(0.2, abs=5e-3)
        assert alfas(modelo, pico).alfa1 == pytest.approx(0.75 * (2 * cdf_normal(2.0) - 1), abs=1e-4)

        pico = argmax_alfa1(modelo_referencia, malla)
        assert pico == pytest.approx(0.0, abs=5e-3)
        _, a1 = alfas_lote(modelo_referencia, malla)
        assert a1[0] < a1.max() and a1[-1] < a1.max()

    @pytest.mark.parametrize("excitado", [False, True])
    def test_densidad_normalizada(self, modelo_referencia, excitado):
        x = np.linspace(-6, 6, 20001)
        densidad = densidad_registro(modelo_referencia, x, excitado)
        assert np.trapz(densidad, x) == pytest.approx(1.0, abs=1e-6)

    def test_densidad_integra_a_la_conversion(self, modelo_referencia):
        x = np.linspace(-6, 0.11, 40001)
        area = np.trapz(densidad_registro(modelo_referencia, x, False), x)
        assert area == pytest.approx(probabilidades_conversion(modelo_referencia, 0.11).p_g0, abs=1e-6)


class TestMuestreo:

    def test_frecuencias_de_clasificacion(self, modelo_referencia, rng):
        n = 100000
        conv = probabilidades_conversion(modelo_referencia, 0.11)
        for excitado, p in ((False, conv.p_g0), (True, conv.p_e0)):
            registros = muestrear_registros(modelo_referencia, np.full(n, excitado), rng)
            frecuencia = np.mean(clasificar_registros(registros, 0.11) == 0)
            assert abs(frecuencia - p) < 4.5 * np.sqrt(p * (1 - p) / n)

    def test_registro_individual(self, modelo_referencia, rng):
        assert isinstance(muestrear_registro(modelo_referencia, 'g', rng), float)
        with pytest.raises(ValueError):
            muestrear_registro(modelo_referencia, 'x', rng)

    @pytest.mark.parametrize("excitado, centro", [(False, -1.0), (True, 1.0)])
    def test_gaussiana_sin_contaminacion(self, rng, excitado, centro):
        modelo = ModeloLectura(-1.0, 1.0, 0.3)
        n = 200000
        registros = muestrear_registros(modelo, np.full(n, excitado), rng)
        assert abs(registros.mean() - centro) < 4.5 * 0.3 / np.sqrt(n)
        assert abs(registros.std(ddof=1) - 0.3) < 4.5 * 0.3 / np.sqrt(2 * n)

    def test_peso_de_decaimiento(self, rng):
        """Con envolventes separadas 10σ la fracción con λ_D < 0 estima w_decay"""
        modelo = ModeloLectura(-1.0, 1.0, 0.2, w_decay=0.2)
        n = 200000
        registros = muestrear_registros(modelo, np.ones(n, dtype=bool), rng)
        decaidos = registros < 0.0
        assert abs(decaidos.mean() - 0.2) < 4.5 * np.sqrt(0.2 * 0.8 / n)
        assert abs(registros[decaidos].mean() + 1.0) < 4.5 * 0.2 / np.sqrt(decaidos.sum())

    def test_registro_individual_coincide_con_lote(self, modelo_referencia):
        uno = muestrear_registro(modelo_referencia, 'e', np.random.default_rng(9))
        lote = muestrear_registros(modelo_referencia, np.array([True]), np.random.default_rng(9))
        assert uno == lote[0]

    def test_borde_del_umbral(self):
        assert clasificar(0.11, 0.11) == 1
        assert clasificar(0.1099, 0.11) == 0

    def test_reproducible(self, modelo_referencia):
        excitados = np.array([True, False] * 50)
        a = muestrear_registros(modelo_referencia, excitados, np.random.default_rng(3))
        b = muestrear_registros(modelo_referencia, excitados, np.random.default_rng(3))
        assert np.array_equal(a, b)


class TestCalibracion:

    def test_anclas_de_referencia(self):
        res = calibrar(ANCLAS_REFERENCIA, FIJOS_REFERENCIA)
        assert res.residuo_maximo < 1e-3
        a = alfas(res.modelo, 0.11)
        assert a.alfa0 == pytest.approx(1.178, abs=1e-3)
        assert a.alfa1 == pytest.approx(0.764, abs=1e-3)
        assert res.modelo.mu_e - res.modelo.mu_g == pytest.approx(2.0)
        assert res.modelo.sigma_env == SIGMA_REFERENCIA
        assert set(res.parametros_libres) == {'mu_g', 'w_decay', 'w_therm'}

    def test_modelo_de_referencia_es_el_ajuste_redondeado(self):
        res = calibrar(ANCLAS_REFERENCIA, FIJOS_REFERENCIA)
        ajustado = res.modelo.to_dict()
        for nombre, valor in MODELO_REFERENCIA.to_dict().items():
            assert ajustado[nombre] == pytest.approx(valor, abs=2e-3), nombre
        assert encontrar_cruce(res.modelo) == pytest.approx(-0.5828, abs=5e-4)
        # centros redondeados a ±1
        assert encontrar_cruce(MODELO_REFERENCIA) == pytest.approx(-0.584, abs=1e-3)

    def test_anclas_autogeneradas(self):
        verdadero = ModeloLectura(-0.95, 1.05, SIGMA_REFERENCIA, w_decay=0.15, w_therm=0.04)
        anclas = AnclasCalibracion(tuple(
            AnclaCalibracion(l, alfas(verdadero, l).alfa0, alfas(verdadero, l).alfa1)
            for l in (-0.4, 0.3)
        ))
        res = calibrar(anclas, FIJOS_REFERENCIA, techo_residuo=1e-9)
        assert res.residuo_maximo < 1e-9
        assert res.modelo.w_decay == pytest.approx(0.15, abs=1e-6)
        assert res.modelo.w_therm == pytest.approx(0.04, abs=1e-6)

    def test_ancla_imposible(self):
        anclas = AnclasCalibracion((AnclaCalibracion(0.0, alfa0=1.9, alfa1=0.5),))
        with pytest.raises(CalibracionFallida):
            calibrar(anclas, FIJOS_REFERENCIA)

    def test_anclas_contradictorias(self):
        anclas = AnclasCalibracion((
            AnclaCalibracion(0.0, alfa0=1.8),
            AnclaCalibracion(0.5, alfa0=0.2),
            AnclaCalibracion(1.0, alfa0=1.0),
        ))
        with pytest.raises(CalibracionFallida):
            calibrar(anclas, FIJOS_REFERENCIA)

    @pytest.mark.parametrize("fijos", [
        {'sigma_env': SIGMA_REFERENCIA, 'separcion': 2.0},
        {'mu_g': -1.0, 'mu_e': 1.0, 'separacion': 2.0},
    ])
    def test_parametros_fijos_invalidos(self, fijos):
        with pytest.raises(ErrorConfiguracion) as info:
            calibrar(ANCLAS_REFERENCIA, fijos)
        assert info.value.codigo_salida == 2

    def test_subrestringido(self):
        with pytest.raises(SubRestringido):
            calibrar(ANCLAS_REFERENCIA, fijos={})
