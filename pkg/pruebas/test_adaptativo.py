"""Pruebas del protocolo adaptativo en dos etapas"""

import logging

import numpy as np
import pytest

from nucleo.geometria_bloch import VectorBloch, DIAGONAL, bloch_extremos, varianzas_extremas
from nucleo.modelo_lectura import alfas
from nucleo.tomografia import varianza_empirica
from nucleo.adaptativo import (
    Contabilidad,
    RotacionRetroalimentacion,
    ModeloImperfeccion,
    ConfiguracionProtocolo,
    rotacion_retroalimentacion,
    aplicar_retroalimentacion,
    ejecutar_estandar,
    ejecutar_aqst,
    comparar_brazos,
)
from nucleo.errores import EstimacionNula, EnsayosInsuficientes, PresupuestoInvalido

from conftest import vectores_unitarios

# 27000 de pre-estimación + 30000 de post-estimación
CFG_REFERENCIA = ConfiguracionProtocolo(n_total=57000)


def rodrigues(eje, angulo) -> np.ndarray:
    k = np.asarray(eje, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) * np.cos(angulo) + np.sin(angulo) * K + (1 - np.cos(angulo)) * np.outer(k, k)


def correr_brazos(r, modelo, imp, ensayos, semilla):
    gen = np.random.default_rng(semilla)
    std = [ejecutar_estandar(r, modelo, CFG_REFERENCIA, gen, n_disparos=CFG_REFERENCIA.n_post)
           for _ in range(ensayos)]
    aqst = [ejecutar_aqst(r, modelo, CFG_REFERENCIA, imp, gen) for _ in range(ensayos)]
    return std, aqst


class TestRotacion:

    def test_ejemplos(self):
        rot = rotacion_retroalimentacion([0, 0, 1], [1, 0, 0])
        assert np.allclose(rot.eje, [0, 1, 0])
        assert rot.angulo == pytest.approx(np.pi / 2)
        assert np.allclose(rot.aplicar([0, 0, 1]), [1, 0, 0], atol=1e-12)

    def test_paralelos_identidad(self):
        rot = rotacion_retroalimentacion(DIAGONAL * 0.4, DIAGONAL)
        assert rot.angulo == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(rot.como_matriz(), np.eye(3))

    def test_antiparalelos(self):
        rot = rotacion_retroalimentacion([0, 0, 1], [0, 0, -1])
        assert rot.angulo == pytest.approx(np.pi)
        assert np.allclose(rot.eje, [1, 0, 0])
        assert np.allclose(rot.aplicar([0, 0, 1]), [0, 0, -1], atol=1e-12)

    def test_pares_aleatorios(self, rng):
        desde = vectores_unitarios(rng, 10000) * rng.uniform(0.01, 1, size=(10000, 1))
        hacia = vectores_unitarios(rng, 10000)
        # un tercio casi antiparalelos y algunos exactamente antiparalelos
        hacia[::3] = -desde[::3] / np.linalg.norm(desde[::3], axis=1, keepdims=True) \
            + 1e-8 * rng.normal(size=hacia[::3].shape)
        hacia[::3] /= np.linalg.norm(hacia[::3], axis=1, keepdims=True)
        hacia[1::50] = -desde[1::50] / np.linalg.norm(desde[1::50], axis=1, keepdims=True)

        for a, b in zip(desde, hacia):
            rot = rotacion_retroalimentacion(a, b)
            assert np.allclose(rot.aplicar(a / np.linalg.norm(a)), b, atol=1e-12, rtol=0)
            assert 0.0 <= rot.angulo <= np.pi + 1e-12

    def test_estimacion_nula(self):
        with pytest.raises(EstimacionNula):
            rotacion_retroalimentacion([1e-10, 0, 0], DIAGONAL)

    def test_eje_no_unitario(self):
        with pytest.raises(ValueError):
            RotacionRetroalimentacion(np.array([0, 0, 2.0]), 0.1, None)

    def test_inversa(self, rng):
        a, b = vectores_unitarios(rng, 2)
        rot = rotacion_retroalimentacion(a, b)
        assert np.allclose(rot.aplicar_inversa(rot.aplicar(a)), a, atol=1e-12)


class TestImperfeccion:

    def test_pureza_a_escala(self):
        imp = ModeloImperfeccion.desde_pureza(0.70)
        assert imp.escala_pureza == pytest.approx(np.sqrt(0.4))
        assert imp.habilitado

    def test_pureza_invalida(self):
        with pytest.raises(ValueError):
            ModeloImperfeccion.desde_pureza(0.4)
        with pytest.raises(ValueError):
            ModeloImperfeccion(escala_pureza=0.0)

    def test_ideal_es_identidad(self):
        r = VectorBloch.desde_array(-DIAGONAL)
        rot = RotacionRetroalimentacion.identidad()
        assert np.array_equal(aplicar_retroalimentacion(r, rot, ModeloImperfeccion.ideal()).como_array(), r.como_array())

    def test_solo_pureza(self):
        r = VectorBloch.desde_array(-DIAGONAL)
        rot = rotacion_retroalimentacion(r, DIAGONAL)
        post = aplicar_retroalimentacion(r, rot, ModeloImperfeccion.desde_pureza(0.70))
        assert post.norma == pytest.approx(np.sqrt(0.4))
        assert np.allclose(post.como_array() / post.norma, DIAGONAL, atol=1e-12)

    def test_errores_angulares_contra_rodrigues(self):
        imp = ModeloImperfeccion.experimental()
        r = VectorBloch(0.3, -0.5, 0.6)
        post = aplicar_retroalimentacion(r, RotacionRetroalimentacion.identidad(), imp)

        v = r.como_array()
        eje_elev = np.cross([0, 0, 1], v)
        esperado = rodrigues(eje_elev, np.deg2rad(5.9)) @ v
        esperado = rodrigues([0, 0, 1], np.deg2rad(3.2)) @ esperado
        esperado = np.sqrt(0.4) * esperado
        assert np.allclose(post.como_array(), esperado, atol=1e-12)

    def test_elevacion_en_el_polo(self):
        imp = ModeloImperfeccion.desde_pureza(1.0, error_elevacion_grados=10.0)
        post = aplicar_retroalimentacion(VectorBloch(0, 0, 1), RotacionRetroalimentacion.identidad(), imp)
        assert np.allclose(post.como_array(), rodrigues([1, 0, 0], np.deg2rad(10.0)) @ [0, 0, 1])

    def test_signos_aleatorios_requieren_generador(self):
        imp = ModeloImperfeccion.desde_pureza(0.9, 5.0, 5.0, signos_aleatorios=True)
        with pytest.raises(ValueError):
            aplicar_retroalimentacion(VectorBloch(0, 0, 1), RotacionRetroalimentacion.identidad(), imp)


class TestConfiguracionProtocolo:

    @pytest.mark.parametrize("n_total, n_pre", [(3001, 300), (3000, 3000), (3000, 0), (3000, 301)])
    def test_presupuestos_invalidos(self, n_total, n_pre):
        with pytest.raises(PresupuestoInvalido):
            ConfiguracionProtocolo(n_total=n_total, n_pre=n_pre)

    def test_n_post(self):
        assert CFG_REFERENCIA.n_post == 30000


class TestBrazos:

    def test_estandar_lectura_perfecta(self, modelo_perfecto, rng):
        cfg = ConfiguracionProtocolo(n_total=3000, n_pre=300, lambda_c=0.0)
        res = ejecutar_estandar(VectorBloch(0, 0, 1), modelo_perfecto, cfg, rng)
        assert res.estimacion_final.r_hat_crudo[2] == 1.0
        assert res.pre_estimacion is None
        assert (res.disparos_pre, res.disparos_post) == (0, 3000)
        assert res.rotacion.angulo == 0.0

    def test_contabilidad(self, modelo_referencia, rng):
        res = ejecutar_aqst(VectorBloch.desde_array(-DIAGONAL), modelo_referencia,
                            CFG_REFERENCIA, ModeloImperfeccion.ideal(), rng)
        assert res.disparos_usados(Contabilidad.INCLUIR_PRE) == 57000
        assert res.disparos_usados(Contabilidad.EXCLUIR_PRE) == 30000
        assert res.pre_estimacion is not None
        assert res.pre_estimacion.n_total == 27000

    def test_pre_estimacion_en_el_optimo(self, modelo_referencia, rng):
        mejor, _ = bloch_extremos(alfas(modelo_referencia, 0.11))
        res = ejecutar_aqst(mejor, modelo_referencia, CFG_REFERENCIA, ModeloImperfeccion.ideal(),
                            rng, pre_estimacion_inyectada=mejor)
        assert res.rotacion.angulo == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(res.estado_post.como_array(), mejor.como_array())

    def test_respaldo_con_pre_estimacion_nula(self, modelo_referencia, rng, caplog):
        with caplog.at_level(logging.WARNING):
            res = ejecutar_aqst(VectorBloch.desde_array(-DIAGONAL), modelo_referencia, CFG_REFERENCIA,
                                ModeloImperfeccion.ideal(), rng,
                                pre_estimacion_inyectada=VectorBloch(0, 0, 0))
        assert res.respaldo_sin_retroalimentacion
        assert res.rotacion.angulo == 0.0
        assert (res.disparos_pre, res.disparos_post) == (27000, 30000)
        assert "sin retroalimentación" in caplog.text

    @pytest.mark.parametrize("compensar", [False, True])
    def test_consistencia_de_marcos(self, modelo_referencia, compensar):
        """Con dirección exacta, la media de r̂ final recupera el estado verdadero"""
        r = VectorBloch(0.48, -0.6, -0.64)
        imp = ModeloImperfeccion.desde_pureza(0.70) if compensar else ModeloImperfeccion.ideal()
        gen = np.random.default_rng(99)
        finales = np.array([
            ejecutar_aqst(r, modelo_referencia, CFG_REFERENCIA, imp, gen,
                          compensar_pureza=compensar, pre_estimacion_inyectada=r).estimacion_final.r_hat_crudo
            for _ in range(2000)
        ])
        error_estandar = finales.std(axis=0, ddof=1) / np.sqrt(len(finales))
        assert np.all(np.abs(finales.mean(axis=0) - r.como_array()) < 4.5 * error_estandar)


class TestComparacion:

    def test_brazos_identicos(self, modelo_referencia):
        std, _ = correr_brazos(VectorBloch.desde_array(-DIAGONAL), modelo_referencia,
                               ModeloImperfeccion.ideal(), 50, 5)
        informe = comparar_brazos(std, std)
        assert informe.reduccion == pytest.approx(0.0, abs=1e-15)
        assert informe.semiancho_ic > 0
        assert "no significativa" in informe.generar_resumen_textual()

    def test_entradas_invalidas(self, modelo_referencia):
        std, aqst = correr_brazos(VectorBloch.desde_array(-DIAGONAL), modelo_referencia,
                                  ModeloImperfeccion.ideal(), 3, 5)
        with pytest.raises(EnsayosInsuficientes):
            comparar_brazos(std, aqst[:2])
        with pytest.raises(EnsayosInsuficientes):
            comparar_brazos(std[:1], aqst[:1])

    def test_identidad_de_contabilidad(self, modelo_referencia):
        std, aqst = correr_brazos(VectorBloch.desde_array(-DIAGONAL), modelo_referencia,
                                  ModeloImperfeccion.ideal(), 200, 8)
        excl = comparar_brazos(std, aqst, Contabilidad.EXCLUIR_PRE)
        incl = comparar_brazos(std, aqst, Contabilidad.INCLUIR_PRE)
        assert 1 - incl.reduccion == pytest.approx((57000 / 30000) * (1 - excl.reduccion), rel=1e-12)
        assert incl.to_dict()['contabilidad'] == 'incluir_pre'

    @pytest.mark.lento
    def test_reduccion_ideal(self, modelo_referencia):
        std, aqst = correr_brazos(VectorBloch.desde_array(-DIAGONAL), modelo_referencia,
                                  ModeloImperfeccion.ideal(), 20000, 2024)
        informe = comparar_brazos(std, aqst)
        assert informe.reduccion == pytest.approx(0.3374, abs=0.02)
        assert informe.reduccion_significativa

    @pytest.mark.lento
    def test_reduccion_con_imperfecciones(self, modelo_referencia):
        std, aqst = correr_brazos(VectorBloch.desde_array(-DIAGONAL), modelo_referencia,
                                  ModeloImperfeccion.experimental(), 20000, 14810)
        informe = comparar_brazos(std, aqst)
        assert informe.reduccion == pytest.approx(0.148, abs=0.03)

    @pytest.mark.lento
    def test_varianza_por_estado_inicial(self, modelo_referencia):
        """El brazo adaptativo llega a V_min sin importar el estado de partida"""
        a = alfas(modelo_referencia, 0.11)
        v_min, _ = varianzas_extremas(a)
        varianzas_std = []
        for i, r in enumerate((VectorBloch.desde_array(-DIAGONAL), VectorBloch(0, 0, -1), VectorBloch(1, 0, 0))):
            std, aqst = correr_brazos(r, modelo_referencia, ModeloImperfeccion.ideal(), 5000, 300 + i)
            inf_aqst = varianza_empirica([x.delta_varianza for x in aqst], 30000)
            inf_std = varianza_empirica([x.delta_varianza for x in std], 30000)
            assert inf_aqst.varianza_por_n == pytest.approx(v_min, rel=0.05)
            varianzas_std.append(inf_std.varianza_por_n)
        assert varianzas_std[0] > varianzas_std[1] > varianzas_std[2]
