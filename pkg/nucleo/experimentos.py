"""
Orquestación de Experimentos Reproducibles

Comandos: calibrar, barrido, escalado, comparar, individual.

Cada ensayo usa su propio generador derivado de (semilla maestra, nombre del
flujo, índice del ensayo) con numpy.random.SeedSequence, de modo que la
ejecución en paralelo y la secuencial producen exactamente los mismos números.
Los resultados se ordenan por índice antes de agregarse.
"""

import numpy as np
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple
from dataclasses import dataclass
import logging
import zlib

from .geometria_bloch import VectorBloch
from .modelo_lectura import (
    ModeloLectura,
    ResultadoCalibracion,
    PARAMETROS_MODELO,
    alfas,
    calibrar,
)
from .tomografia import varianza_empirica
from .adaptativo import (
    ConfiguracionProtocolo,
    ModeloImperfeccion,
    Contabilidad,
    ResultadoProtocolo,
    ejecutar_estandar,
    ejecutar_aqst,
    comparar_brazos,
)
from .optimizacion_criterio import (
    barrido,
    criterio_optimo,
    encontrar_cruce,
    fila_barrido,
)
from .configuracion import ConfiguracionExperimento
from .exportador_resultados import TablaResultados, encabezado_procedencia
from .errores import SinCambioSigno

logger = logging.getLogger(__name__)

BRAZO_ESTANDAR = 'estandar'
BRAZO_AQST = 'aqst'

# Bloques por proceso; solo afecta al reparto, no a los resultados
BLOQUES_POR_HILO = 4


def derivar_generador(semilla: int, flujo: str, indice: int) -> np.random.Generator:
    """
    Generador independiente para el ensayo `indice` del flujo `flujo`

    SeedSequence mezcla la entropía (semilla maestra de 64 bits) con la clave
    (crc32 del nombre, índice).
    """
    clave = (zlib.crc32(flujo.encode('utf-8')), int(indice))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(semilla), spawn_key=clave))


@dataclass(frozen=True)
class TareaEnsayos:
    """Descripción inmutable de un lote de ensayos de un brazo"""
    flujo: str
    semilla: int
    brazo: str
    r_verdadero: VectorBloch
    modelo: ModeloLectura
    protocolo: ConfiguracionProtocolo
    imperfeccion: ModeloImperfeccion = ModeloImperfeccion()
    compensar_pureza: bool = False
    n_disparos: Optional[int] = None

    def __post_init__(self):
        if self.brazo not in (BRAZO_ESTANDAR, BRAZO_AQST):
            raise ValueError(f"Brazo desconocido: {self.brazo!r}")


def ejecutar_ensayo(tarea: TareaEnsayos, indice: int) -> ResultadoProtocolo:
    rng = derivar_generador(tarea.semilla, tarea.flujo, indice)
    if tarea.brazo == BRAZO_ESTANDAR:
        return ejecutar_estandar(
            tarea.r_verdadero, tarea.modelo, tarea.protocolo, rng, n_disparos=tarea.n_disparos
        )
    return ejecutar_aqst(
        tarea.r_verdadero, tarea.modelo, tarea.protocolo, tarea.imperfeccion, rng,
        compensar_pureza=tarea.compensar_pureza
    )


def _ejecutar_bloque(tarea: TareaEnsayos, indices: Sequence[int]) -> List[Tuple[int, ResultadoProtocolo]]:
    return [(int(i), ejecutar_ensayo(tarea, int(i))) for i in indices]


def ejecutar_ensayos(tarea: TareaEnsayos, ensayos: int, hilos: int = 1) -> List[ResultadoProtocolo]:
    """
    Ejecuta `ensayos` repeticiones, en paralelo si hilos > 1

    Returns:
        Resultados ordenados por índice de ensayo
    """
    if hilos <= 1 or ensayos < 2:
        pares = _ejecutar_bloque(tarea, range(ensayos))
    else:
        bloques = [b for b in np.array_split(np.arange(ensayos), hilos * BLOQUES_POR_HILO) if b.size]
        pares = []
        with ProcessPoolExecutor(max_workers=hilos) as ejecutor:
            futuros = [ejecutor.submit(_ejecutar_bloque, tarea, bloque.tolist()) for bloque in bloques]
            for futuro in futuros:
                pares.extend(futuro.result())

    pares.sort(key=lambda par: par[0])
    logger.debug(f"{tarea.flujo}: {ensayos} ensayos completados ({hilos} hilos)")
    return [resultado for _, resultado in pares]


class OrquestadorExperimentos:
    """
    Ejecuta los comandos del simulador sobre una configuración validada

    El número de hilos no forma parte de la configuración ni del encabezado:
    no cambia ningún resultado.
    """

    def __init__(self, cfg: ConfiguracionExperimento, hilos: int = 1):
        self.cfg = cfg
        self.hilos = max(1, int(hilos))
        self._modelo: Optional[ModeloLectura] = None
        self._calibracion: Optional[ResultadoCalibracion] = None

    # ------------------------------------------------------------------
    # Recursos compartidos
    # ------------------------------------------------------------------

    def calibracion(self) -> ResultadoCalibracion:
        if self._calibracion is None:
            seccion = self.cfg.calibracion
            self._calibracion = calibrar(
                seccion.construir_anclas(),
                dict(seccion.fijos),
                techo_residuo=seccion.techo_residuo
            )
        return self._calibracion

    def modelo(self) -> ModeloLectura:
        if self._modelo is None:
            if self.cfg.modelo.calibrar_desde_anclas:
                self._modelo = self.calibracion().modelo
            else:
                self._modelo = self.cfg.modelo.construir()
        return self._modelo

    def estado_inicial(self) -> VectorBloch:
        return self.cfg.estado.resolver(alfas(self.modelo(), self.cfg.protocolo.lambda_c))

    def _tabla(self, comando: str, columnas: List[str]) -> TablaResultados:
        return TablaResultados(columnas=columnas, encabezado=encabezado_procedencia(self.cfg, comando))

    def _tarea(
        self,
        flujo: str,
        brazo: str,
        protocolo: ConfiguracionProtocolo,
        imperfeccion: ModeloImperfeccion = ModeloImperfeccion(),
        n_disparos: Optional[int] = None
    ) -> TareaEnsayos:
        return TareaEnsayos(
            flujo=f"{self.cfg.nombre}/{flujo}",
            semilla=self.cfg.semilla,
            brazo=brazo,
            r_verdadero=self.estado_inicial(),
            modelo=self.modelo(),
            protocolo=protocolo,
            imperfeccion=imperfeccion,
            compensar_pureza=self.cfg.protocolo.compensar_pureza,
            n_disparos=n_disparos
        )

    def imperfeccion_experimental(self) -> ModeloImperfeccion:
        """La imperfección configurada o, si está deshabilitada, la de comparación"""
        if self.cfg.imperfeccion.habilitado:
            return self.cfg.imperfeccion.construir()
        c = self.cfg.comparacion
        return ModeloImperfeccion.desde_pureza(c.pureza, c.error_elevacion_grados, c.error_azimut_grados)

    # ------------------------------------------------------------------
    # Comandos
    # ------------------------------------------------------------------

    def comando_calibrar(self) -> TablaResultados:
        """Parámetros ajustados y residuos por ancla"""
        res = self.calibracion()
        tabla = self._tabla('calibrar', ['elemento', 'lambda_c', 'valor', 'objetivo', 'residuo'])
        nan = float('nan')

        parametros = res.modelo.to_dict()
        for nombre in PARAMETROS_MODELO:
            tabla.agregar([nombre, nan, parametros[nombre], nan, nan])

        for i, ancla in enumerate(res.anclas.anclas):
            a = alfas(res.modelo, ancla.lambda_c)
            if ancla.alfa0 is not None:
                tabla.agregar(['alfa0', ancla.lambda_c, a.alfa0, ancla.alfa0, float(res.residuos_alfa0[i])])
            if ancla.alfa1 is not None:
                tabla.agregar(['alfa1', ancla.lambda_c, a.alfa1, ancla.alfa1, float(res.residuos_alfa1[i])])

        tabla.agregar(['residuo_maximo', nan, res.residuo_maximo, nan, nan])
        return tabla

    def comando_barrido(self) -> TablaResultados:
        """Curvas del barrido y filas de referencia (óptimo, cruce, máximo de α1)"""
        m = self.modelo()
        malla = self.cfg.barrido.construir()
        columnas = ['marca', 'lambda_c', 'alfa0', 'alfa1', 'var_min', 'var_max', 'reduccion', 'degenerada']
        tabla = self._tabla('barrido', columnas)

        def agregar(marca: str, lambda_c: float):
            a = alfas(m, lambda_c)
            fila = fila_barrido(lambda_c, a.alfa0, a.alfa1).to_dict()
            tabla.agregar({'marca': marca, **fila})

        for fila in barrido(m, malla):
            tabla.agregar({'marca': 'malla', **fila.to_dict()})

        optimo = criterio_optimo(m, malla)
        agregar('optimo', optimo.lambda_c)
        try:
            agregar('cruce', encontrar_cruce(m, (malla.lambda_min, malla.lambda_max)))
        except SinCambioSigno as e:
            logger.warning(f"Sin fila de cruce: {e.mensaje}")
        agregar('max_alfa1', optimo.lambda_max_alfa1)
        return tabla

    def comando_escalado(self) -> TablaResultados:
        """
        N·E[Δ²] frente a N por brazo

        N es el presupuesto de la etapa final: el brazo AQST usa N + N_pre en
        total y sus filas incluir_pre se grafican en N + N_pre.
        """
        cfg = self.cfg
        columnas = [
            'tipo', 'brazo', 'contabilidad', 'n', 'varianza_por_n', 'semiancho_por_n',
            'media_delta2', 'semiancho_ic', 'ensayos', 'pendiente_loglog'
        ]
        tabla = self._tabla('escalado', columnas)
        nan = float('nan')
        imperfeccion = cfg.imperfeccion.construir()
        n_pre = cfg.protocolo.n_pre

        # (brazo, etiqueta, contabilidad); el brazo estándar no tiene pre-estimación
        claves = [
            (BRAZO_ESTANDAR, BRAZO_ESTANDAR, Contabilidad.INCLUIR_PRE),
            (BRAZO_AQST, Contabilidad.INCLUIR_PRE.value, Contabilidad.INCLUIR_PRE),
            (BRAZO_AQST, Contabilidad.EXCLUIR_PRE.value, Contabilidad.EXCLUIR_PRE),
        ]
        series = {clave: [] for clave in claves}

        for n in cfg.escalado.valores_n:
            protocolo = cfg.protocolo.construir(n_total=n + n_pre)

            std = ejecutar_ensayos(
                self._tarea(f"escalado/estandar/{n}", BRAZO_ESTANDAR, protocolo, n_disparos=n),
                cfg.ensayos, self.hilos
            )
            aqst = ejecutar_ensayos(
                self._tarea(f"escalado/aqst/{n}", BRAZO_AQST, protocolo, imperfeccion),
                cfg.ensayos, self.hilos
            )

            for clave in claves:
                resultados = std if clave[0] == BRAZO_ESTANDAR else aqst
                informe = varianza_empirica(
                    [r.delta_varianza for r in resultados],
                    resultados[0].disparos_usados(clave[2])
                )
                series[clave].append(informe)
                tabla.agregar([
                    'punto', clave[0], clave[1], informe.n_total, informe.varianza_por_n,
                    informe.semiancho_por_n, informe.media_delta2, informe.semiancho_ic,
                    informe.ensayos, nan
                ])

        for (brazo, etiqueta, _), informes in series.items():
            ns = np.array([i.n_total for i in informes], dtype=float)
            niveles = np.array([i.varianza_por_n for i in informes])
            pesos = np.array([1.0 / max(i.semiancho_por_n, 1e-300)**2 for i in informes])
            constante = float(np.average(niveles, weights=pesos))
            semiancho = float(1.0 / np.sqrt(np.sum(pesos)))
            if len(informes) >= 2:
                pendiente = float(np.polyfit(np.log(ns), np.log([i.media_delta2 for i in informes]), 1)[0])
            else:
                pendiente = nan
            tabla.agregar([
                'ajuste', brazo, etiqueta, nan, constante, semiancho,
                nan, nan, cfg.ensayos, pendiente
            ])
            logger.info(f"{brazo}/{etiqueta}: N·σ² ≈ {constante:.4f}, pendiente {pendiente:.3f}")

        return tabla

    def comando_comparar(self) -> TablaResultados:
        """Reducción AQST vs estándar, ideal e imperfecta, en ambas contabilidades"""
        cfg = self.cfg
        protocolo = cfg.protocolo.construir()
        columnas = [
            'imperfeccion', 'contabilidad', 'reduccion', 'semiancho_ic',
            'varianza_estandar', 'varianza_aqst', 'ensayos'
        ]
        tabla = self._tabla('comparar', columnas)

        std = ejecutar_ensayos(
            self._tarea("comparar/estandar", BRAZO_ESTANDAR, protocolo),
            cfg.ensayos, self.hilos
        )

        for etiqueta, imperfeccion in (
            ('ideal', ModeloImperfeccion.ideal()),
            ('experimental', self.imperfeccion_experimental()),
        ):
            aqst = ejecutar_ensayos(
                self._tarea(f"comparar/aqst/{etiqueta}", BRAZO_AQST, protocolo, imperfeccion),
                cfg.ensayos, self.hilos
            )
            for contabilidad in (Contabilidad.EXCLUIR_PRE, Contabilidad.INCLUIR_PRE):
                informe = comparar_brazos(std, aqst, contabilidad)
                tabla.agregar({'imperfeccion': etiqueta, **informe.to_dict()})
                logger.info(f"[{etiqueta}]\n{informe.generar_resumen_textual()}")

        return tabla

    def comando_individual(self) -> TablaResultados:
        """Traza completa de un ensayo AQST con la configuración dada"""
        cfg = self.cfg
        r = self.estado_inicial()
        protocolo = cfg.protocolo.construir()
        rng = derivar_generador(cfg.semilla, f"{cfg.nombre}/individual", 0)
        res = ejecutar_aqst(
            r, self.modelo(), protocolo, cfg.imperfeccion.construir(), rng,
            compensar_pureza=cfg.protocolo.compensar_pureza
        )

        tabla = self._tabla('individual', ['campo', 'x', 'y', 'z', 'valor'])
        nan = float('nan')

        def vector(campo: str, v, valor: float = nan):
            v = np.asarray(v, dtype=float)
            tabla.agregar([campo, v[0], v[1], v[2], valor])

        vector('estado_verdadero', r.como_array(), r.norma)
        if res.pre_estimacion is not None:
            vector('pre_estimacion', res.pre_estimacion.r_hat.como_array(), res.pre_estimacion.r_hat.norma)
            vector('pre_estimacion_cruda', res.pre_estimacion.r_hat_crudo)
            if r.norma > 0 and res.pre_estimacion.r_hat.norma > 0:
                coseno = np.dot(r.como_array(), res.pre_estimacion.r_hat.como_array()) / (
                    r.norma * res.pre_estimacion.r_hat.norma
                )
                tabla.agregar(['error_angular_pre_grados', nan, nan, nan,
                               float(np.degrees(np.arccos(np.clip(coseno, -1.0, 1.0))))])
        vector('rotacion_eje', res.rotacion.eje, res.rotacion.angulo)
        vector('estado_post', res.estado_post.como_array(), res.estado_post.norma)
        vector('estimacion_final', res.estimacion_final.r_hat.como_array(), res.estimacion_final.r_hat.norma)
        vector('estimacion_final_cruda', res.estimacion_final.r_hat_crudo)

        for nombre, valor in res.metricas.to_dict().items():
            tabla.agregar([nombre, nan, nan, nan, valor])
        tabla.agregar(['delta_varianza', nan, nan, nan, res.delta_varianza])
        tabla.agregar(['disparos_pre', nan, nan, nan, res.disparos_pre])
        tabla.agregar(['disparos_post', nan, nan, nan, res.disparos_post])
        tabla.agregar(['respaldo_sin_retroalimentacion', nan, nan, nan, res.respaldo_sin_retroalimentacion])
        return tabla

    def ejecutar(self, comando: str) -> TablaResultados:
        comandos = {
            'calibrar': self.comando_calibrar,
            'barrido': self.comando_barrido,
            'escalado': self.comando_escalado,
            'comparar': self.comando_comparar,
            'individual': self.comando_individual,
        }
        if comando not in comandos:
            raise ValueError(f"Comando desconocido: {comando!r}")
        logger.info(f"Ejecutando '{comando}' (semilla {self.cfg.semilla}, {self.hilos} hilos)")
        return comandos[comando]()
