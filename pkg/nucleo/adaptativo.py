"""
Protocolo de Tomografía Adaptativa en Dos Etapas

1. Pre-estimación con N_pre disparos
2. Rotación de retroalimentación que lleva la estimación al estado óptimo
3. Aplicación (posiblemente imperfecta) de la rotación al estado físico
4. Post-estimación con el presupuesto restante
5. Regreso de la estimación al marco original con la rotación comandada

Incluye el brazo de control (tomografía estándar) y la comparación de
ambos brazos.
"""

import numpy as np
from scipy.spatial.transform import Rotation
from typing import Optional, Sequence
from dataclasses import dataclass
from enum import Enum
import logging

from .geometria_bloch import (
    VectorBloch,
    PuntoProbabilidad,
    ParAlfa,
    TOLERANCIA_NORMA,
    bloch_extremos,
)
from .modelo_lectura import ModeloLectura, alfas
from .tomografia import (
    ResultadoEstimador,
    MetricasError,
    simular_conteos,
    invertir,
    proyectar_bola,
    metricas_error,
    varianza_empirica,
    validar_presupuesto,
)
from .errores import EstimacionNula, EnsayosInsuficientes, PresupuestoInvalido

logger = logging.getLogger(__name__)

# |r| por debajo de esto no define dirección
TOLERANCIA_DIRECCION = 1e-9

N_PRE_REFERENCIA = 27000
LAMBDA_C_REFERENCIA = 0.11
PUREZA_REFERENCIA = 0.70
ERROR_ELEVACION_GRADOS = 5.9
ERROR_AZIMUT_GRADOS = 3.2

EJE_Z = np.array([0.0, 0.0, 1.0])
EJE_X = np.array([1.0, 0.0, 0.0])


class Contabilidad(Enum):
    """Cómo se cuentan los disparos de pre-estimación en el costo total"""
    INCLUIR_PRE = "incluir_pre"
    EXCLUIR_PRE = "excluir_pre"


# =========================================================================
# ROTACIÓN DE RETROALIMENTACIÓN
# =========================================================================

@dataclass(frozen=True, eq=False)
class RotacionRetroalimentacion:
    """
    Rotación R_p en el espacio de Bloch

    El eje y el ángulo se reportan; la aplicación usa siempre el objeto
    Rotation almacenado.
    """
    eje: np.ndarray
    angulo: float
    rotacion: Rotation

    def __post_init__(self):
        if abs(np.linalg.norm(self.eje) - 1.0) > TOLERANCIA_NORMA:
            raise ValueError(f"El eje debe ser unitario, norma: {np.linalg.norm(self.eje)}")
        if not 0.0 <= self.angulo <= np.pi + TOLERANCIA_NORMA:
            raise ValueError(f"Ángulo fuera de [0, π]: {self.angulo}")

    @classmethod
    def identidad(cls) -> 'RotacionRetroalimentacion':
        return cls(EJE_Z.copy(), 0.0, Rotation.identity())

    def aplicar(self, v) -> np.ndarray:
        return self.rotacion.apply(np.asarray(v, dtype=float))

    def aplicar_inversa(self, v) -> np.ndarray:
        return self.rotacion.inv().apply(np.asarray(v, dtype=float))

    def como_matriz(self) -> np.ndarray:
        return self.rotacion.as_matrix()


def _normalizar(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _rotacion_directa(a: np.ndarray, b: np.ndarray) -> Rotation:
    """Rotación mínima a → b para unitarios con a·b ≥ 0"""
    cruz = np.cross(a, b)
    seno = np.linalg.norm(cruz)
    if seno == 0.0:
        return Rotation.identity()
    angulo = np.arctan2(seno, float(np.dot(a, b)))
    return Rotation.from_rotvec(angulo * cruz / seno)


def _eje_antiparalelo(b: np.ndarray) -> np.ndarray:
    """Eje coordenado de menor |componente| de b, ortogonalizado contra b"""
    eje = np.zeros(3)
    eje[int(np.argmin(np.abs(b)))] = 1.0
    eje = eje - np.dot(eje, b) * b
    return _normalizar(eje)


def rotacion_retroalimentacion(r_desde, r_hacia) -> RotacionRetroalimentacion:
    """
    Rotación que lleva la dirección de r_desde exactamente a r_hacia

    Casos:
    - paralelos: identidad (ángulo 0)
    - antiparalelos: ángulo π sobre el eje coordenado de menor |componente|
      de r_hacia, ortogonalizado
    - a·b < 0: composición a → m → b pasando por la dirección m ⟂ a del plano
      (a, b), así cada paso tiene ángulo ≤ π/2

    Args:
        r_desde: Vector de Bloch (o array) estimado
        r_hacia: Dirección objetivo unitaria

    Raises:
        EstimacionNula: si |r_desde| < 1e-9
    """
    a = np.asarray(r_desde.como_array() if isinstance(r_desde, VectorBloch) else r_desde, dtype=float)
    b = np.asarray(r_hacia.como_array() if isinstance(r_hacia, VectorBloch) else r_hacia, dtype=float)

    norma_a = float(np.linalg.norm(a))
    if norma_a < TOLERANCIA_DIRECCION:
        raise EstimacionNula(
            f"Pre-estimación con |r| = {norma_a:.3e}: dirección indefinida",
            norma=norma_a
        )
    a = a / norma_a
    b = _normalizar(b)

    producto = float(np.dot(a, b))
    cruz = np.cross(a, b)

    if np.linalg.norm(cruz) == 0.0:
        if producto > 0:
            return RotacionRetroalimentacion.identidad()
        eje = _eje_antiparalelo(b)
        return RotacionRetroalimentacion(eje, float(np.pi), Rotation.from_rotvec(np.pi * eje))

    if producto >= 0:
        rot = _rotacion_directa(a, b)
    else:
        m = b - producto * a
        m = m - np.dot(m, a) * a
        if np.linalg.norm(m) < TOLERANCIA_NORMA:
            # casi antiparalelos: el plano (a, b) queda indefinido
            m = _eje_antiparalelo(b)
            m = m - np.dot(m, a) * a
        m = _normalizar(m)
        rot = _rotacion_directa(m, b) * _rotacion_directa(a, m)

    vector_rot = rot.as_rotvec()
    angulo = float(np.linalg.norm(vector_rot))
    if angulo == 0.0:
        return RotacionRetroalimentacion(EJE_Z.copy(), 0.0, rot)
    return RotacionRetroalimentacion(vector_rot / angulo, min(angulo, float(np.pi)), rot)


# =========================================================================
# IMPERFECCIONES DE LA RETROALIMENTACIÓN
# =========================================================================

@dataclass(frozen=True)
class ModeloImperfeccion:
    """
    Imperfecciones del paso de retroalimentación

    escala_pureza multiplica directamente la longitud del vector de Bloch.
    Los errores angulares se aplican como desplazamientos fijos (o con signo
    aleatorio por ensayo si signos_aleatorios).
    """
    escala_pureza: float = 1.0
    error_elevacion: float = 0.0   # radianes
    error_azimut: float = 0.0      # radianes
    habilitado: bool = False
    signos_aleatorios: bool = False

    def __post_init__(self):
        if not 0.0 < self.escala_pureza <= 1.0:
            raise ValueError(f"escala_pureza fuera de (0, 1]: {self.escala_pureza}")
        if not (np.isfinite(self.error_elevacion) and np.isfinite(self.error_azimut)):
            raise ValueError("Los errores angulares deben ser finitos")

    @classmethod
    def ideal(cls) -> 'ModeloImperfeccion':
        return cls()

    @classmethod
    def desde_pureza(
        cls,
        pureza: float,
        error_elevacion_grados: float = 0.0,
        error_azimut_grados: float = 0.0,
        signos_aleatorios: bool = False
    ) -> 'ModeloImperfeccion':
        """
        Modelo a partir de la pureza Tr ρ² tras la retroalimentación

        Tr ρ² = (1 + |r|²)/2  →  |r| = √(2P − 1)
        """
        if not 0.5 < pureza <= 1.0:
            raise ValueError(f"La pureza Tr ρ² debe estar en (1/2, 1], recibido: {pureza}")
        return cls(
            escala_pureza=float(np.sqrt(2 * pureza - 1)),
            error_elevacion=float(np.deg2rad(error_elevacion_grados)),
            error_azimut=float(np.deg2rad(error_azimut_grados)),
            habilitado=True,
            signos_aleatorios=signos_aleatorios
        )

    @classmethod
    def experimental(cls) -> 'ModeloImperfeccion':
        """Pureza 0.70 y errores de 5.9° (elevación) y 3.2° (azimut)"""
        return cls.desde_pureza(PUREZA_REFERENCIA, ERROR_ELEVACION_GRADOS, ERROR_AZIMUT_GRADOS)


def aplicar_retroalimentacion(
    r_verdadero: VectorBloch,
    rot: RotacionRetroalimentacion,
    imp: ModeloImperfeccion,
    rng: Optional[np.random.Generator] = None
) -> VectorBloch:
    """
    Aplica la retroalimentación al estado físico

    Con imp.habilitado, tras la rotación comandada se compone un error de
    elevación alrededor de la dirección polar local e_φ = ẑ × v̂ (x̂ si v ∥ ẑ),
    luego un error de azimut alrededor de ẑ, y finalmente se escala la
    longitud por escala_pureza.

    Args:
        r_verdadero: Estado antes de la retroalimentación
        rot: Rotación comandada
        imp: Modelo de imperfección
        rng: Necesario solo si imp.signos_aleatorios
    """
    v = rot.aplicar(r_verdadero.como_array())

    if imp.habilitado:
        signo_elev, signo_az = 1.0, 1.0
        if imp.signos_aleatorios:
            if rng is None:
                raise ValueError("signos_aleatorios requiere un generador")
            signo_elev, signo_az = rng.choice([-1.0, 1.0], size=2)

        polar = np.cross(EJE_Z, v)
        norma_polar = np.linalg.norm(polar)
        eje_elev = polar / norma_polar if norma_polar > TOLERANCIA_NORMA else EJE_X

        v = Rotation.from_rotvec(signo_elev * imp.error_elevacion * eje_elev).apply(v)
        v = Rotation.from_rotvec(signo_az * imp.error_azimut * EJE_Z).apply(v)
        v = imp.escala_pureza * v

    norma = np.linalg.norm(v)
    if norma > 1.0:
        v = v / norma
    return VectorBloch.desde_array(v)


# =========================================================================
# CONFIGURACIÓN Y RESULTADOS
# =========================================================================

@dataclass(frozen=True)
class ConfiguracionProtocolo:
    """Presupuestos y umbral de una ejecución del protocolo"""
    n_total: int
    n_pre: int = N_PRE_REFERENCIA
    lambda_c: float = LAMBDA_C_REFERENCIA
    contabilidad: Contabilidad = Contabilidad.EXCLUIR_PRE
    modo_disparo: str = 'binomial'
    usar_proyectado: bool = False

    def __post_init__(self):
        validar_presupuesto(self.n_total)
        validar_presupuesto(self.n_pre)
        if not self.n_pre < self.n_total:
            raise PresupuestoInvalido(
                f"n_pre ({self.n_pre}) debe ser menor que n_total ({self.n_total})",
                n_pre=self.n_pre, n_total=self.n_total
            )

    @property
    def n_post(self) -> int:
        return self.n_total - self.n_pre


@dataclass(frozen=True, eq=False)
class ResultadoProtocolo:
    """
    Resultado de un ensayo de cualquiera de los dos brazos

    estimacion_final está en el marco original. delta_varianza es el error
    de la estimación cruda de la última etapa respecto del estado físico que
    se midió en ella (en el brazo estándar coincide con el Δ crudo).
    """
    pre_estimacion: Optional[ResultadoEstimador]
    rotacion: RotacionRetroalimentacion
    estado_post: VectorBloch
    estimacion_final: ResultadoEstimador
    metricas: MetricasError
    delta_varianza: float
    disparos_pre: int
    disparos_post: int
    respaldo_sin_retroalimentacion: bool = False

    def disparos_usados(self, contabilidad: Contabilidad) -> int:
        if contabilidad is Contabilidad.INCLUIR_PRE:
            return self.disparos_pre + self.disparos_post
        return self.disparos_post


def _estimador_en_marco(r_crudo: np.ndarray, a: ParAlfa, n_total: int) -> ResultadoEstimador:
    """Estimador expresado a partir de un r̂ crudo ya transformado"""
    p = np.clip((a.alfa0 + a.alfa1 * r_crudo) / 2, 0.0, 1.0)
    return ResultadoEstimador(
        p_hat=PuntoProbabilidad.desde_array(p),
        r_hat_crudo=r_crudo,
        r_hat=proyectar_bola(r_crudo),
        n_total=n_total
    )


# =========================================================================
# BRAZOS DEL EXPERIMENTO
# =========================================================================

def ejecutar_estandar(
    r_verdadero: VectorBloch,
    m: ModeloLectura,
    cfg: ConfiguracionProtocolo,
    rng: np.random.Generator,
    n_disparos: Optional[int] = None
) -> ResultadoProtocolo:
    """
    Tomografía estándar en un solo paso

    Args:
        r_verdadero: Estado a estimar
        m: Modelo de lectura
        cfg: Configuración (se usa n_total salvo que se indique n_disparos)
        rng: Generador del ensayo
        n_disparos: Presupuesto alternativo
    """
    n = cfg.n_total if n_disparos is None else n_disparos
    a = alfas(m, cfg.lambda_c)

    conteos = simular_conteos(r_verdadero, m, cfg.lambda_c, n, rng, cfg.modo_disparo)
    est = invertir(conteos, a)
    metricas = metricas_error(r_verdadero, est, cfg.usar_proyectado)

    return ResultadoProtocolo(
        pre_estimacion=None,
        rotacion=RotacionRetroalimentacion.identidad(),
        estado_post=r_verdadero,
        estimacion_final=est,
        metricas=metricas,
        delta_varianza=float(np.linalg.norm(est.r_hat_crudo - r_verdadero.como_array())),
        disparos_pre=0,
        disparos_post=n
    )


def ejecutar_aqst(
    r_verdadero: VectorBloch,
    m: ModeloLectura,
    cfg: ConfiguracionProtocolo,
    imp: ModeloImperfeccion,
    rng: np.random.Generator,
    compensar_pureza: bool = False,
    pre_estimacion_inyectada: Optional[VectorBloch] = None
) -> ResultadoProtocolo:
    """
    Tomografía adaptativa en dos etapas

    La estimación posterior se regresa al marco original con la inversa de
    la rotación comandada (no la física imperfecta). Si la pre-estimación
    cae en el centro de la esfera se continúa sin retroalimentación con el
    presupuesto restante y se marca el resultado.

    Args:
        r_verdadero: Estado a estimar
        m: Modelo de lectura
        cfg: Presupuestos, umbral y contabilidad
        imp: Imperfecciones de la retroalimentación
        rng: Generador del ensayo
        compensar_pureza: Reescalar por 1/escala_pureza al volver al marco
        pre_estimacion_inyectada: Sustituye la pre-estimación simulada
            (dirección exacta para verificar consistencia de marcos)

    Returns:
        ResultadoProtocolo con métricas contra r_verdadero
    """
    a = alfas(m, cfg.lambda_c)
    objetivo, _ = bloch_extremos(a)

    pre_est = None
    if pre_estimacion_inyectada is None:
        conteos_pre = simular_conteos(r_verdadero, m, cfg.lambda_c, cfg.n_pre, rng, cfg.modo_disparo)
        pre_est = invertir(conteos_pre, a)
        direccion = pre_est.r_hat
    else:
        direccion = pre_estimacion_inyectada

    try:
        rot = rotacion_retroalimentacion(direccion, objetivo)
    except EstimacionNula as e:
        logger.warning(f"{e.mensaje}; se continúa sin retroalimentación")
        std = ejecutar_estandar(r_verdadero, m, cfg, rng, n_disparos=cfg.n_post)
        return ResultadoProtocolo(
            pre_estimacion=pre_est,
            rotacion=std.rotacion,
            estado_post=std.estado_post,
            estimacion_final=std.estimacion_final,
            metricas=std.metricas,
            delta_varianza=std.delta_varianza,
            disparos_pre=cfg.n_pre,
            disparos_post=cfg.n_post,
            respaldo_sin_retroalimentacion=True
        )

    estado_post = aplicar_retroalimentacion(r_verdadero, rot, imp, rng)

    conteos_post = simular_conteos(estado_post, m, cfg.lambda_c, cfg.n_post, rng, cfg.modo_disparo)
    post_est = invertir(conteos_post, a)

    r_final = rot.aplicar_inversa(post_est.r_hat_crudo)
    if compensar_pureza and imp.habilitado:
        r_final = r_final / imp.escala_pureza
    final = _estimador_en_marco(r_final, a, cfg.n_post)

    logger.debug(
        f"AQST: ángulo {np.rad2deg(rot.angulo):.2f}°, "
        f"|r_post| = {estado_post.norma:.4f}"
    )

    return ResultadoProtocolo(
        pre_estimacion=pre_est,
        rotacion=rot,
        estado_post=estado_post,
        estimacion_final=final,
        metricas=metricas_error(r_verdadero, final, cfg.usar_proyectado),
        delta_varianza=float(np.linalg.norm(post_est.r_hat_crudo - estado_post.como_array())),
        disparos_pre=cfg.n_pre,
        disparos_post=cfg.n_post
    )


# =========================================================================
# COMPARACIÓN DE BRAZOS
# =========================================================================

@dataclass
class InformeReduccion:
    """
    Reducción del número de mediciones requeridas del brazo adaptativo
    frente al estándar
    """
    contabilidad: Contabilidad
    ensayos: int
    varianza_estandar: float   # N·σ² del brazo estándar
    varianza_aqst: float       # N·σ² del brazo adaptativo
    reduccion: float
    semiancho_ic: float

    @property
    def reduccion_significativa(self) -> bool:
        return self.reduccion - self.semiancho_ic > 0

    def to_dict(self) -> dict:
        return {
            'contabilidad': self.contabilidad.value,
            'ensayos': self.ensayos,
            'varianza_estandar': self.varianza_estandar,
            'varianza_aqst': self.varianza_aqst,
            'reduccion': self.reduccion,
            'semiancho_ic': self.semiancho_ic
        }

    def generar_resumen_textual(self) -> str:
        lineas = [
            f"Comparación AQST vs estándar ({self.contabilidad.value}, {self.ensayos} ensayos)",
            f"  N·σ² estándar: {self.varianza_estandar:.4f}",
            f"  N·σ² AQST:     {self.varianza_aqst:.4f}",
            f"  Reducción de mediciones: {100 * self.reduccion:.2f}% ± {100 * self.semiancho_ic:.2f}%",
        ]
        if self.reduccion_significativa:
            lineas.append("  Reducción significativa (IC 95%)")
        else:
            lineas.append("  Reducción no significativa")
        return "\n".join(lineas)


def comparar_brazos(
    resultados_std: Sequence[ResultadoProtocolo],
    resultados_aqst: Sequence[ResultadoProtocolo],
    contabilidad: Contabilidad = Contabilidad.EXCLUIR_PRE
) -> InformeReduccion:
    """
    1 − (N·σ²)_aqst / (N·σ²)_std

    El semiancho del IC se obtiene por el método delta tratando los brazos
    como independientes.

    Raises:
        EnsayosInsuficientes: menos de 2 ensayos o brazos de distinto tamaño
    """
    if len(resultados_std) != len(resultados_aqst):
        raise EnsayosInsuficientes(
            f"Los brazos deben tener el mismo número de ensayos: "
            f"{len(resultados_std)} vs {len(resultados_aqst)}"
        )
    if len(resultados_std) < 2:
        raise EnsayosInsuficientes(f"Se requieren al menos 2 ensayos, recibido: {len(resultados_std)}")

    inf_std = varianza_empirica(
        [r.delta_varianza for r in resultados_std],
        resultados_std[0].disparos_usados(contabilidad)
    )
    inf_aqst = varianza_empirica(
        [r.delta_varianza for r in resultados_aqst],
        resultados_aqst[0].disparos_usados(contabilidad)
    )

    cociente = inf_aqst.varianza_por_n / inf_std.varianza_por_n
    error_rel = np.hypot(
        inf_aqst.semiancho_ic / inf_aqst.media_delta2,
        inf_std.semiancho_ic / inf_std.media_delta2
    )

    informe = InformeReduccion(
        contabilidad=contabilidad,
        ensayos=len(resultados_std),
        varianza_estandar=inf_std.varianza_por_n,
        varianza_aqst=inf_aqst.varianza_por_n,
        reduccion=float(1.0 - cociente),
        semiancho_ic=float(cociente * error_rel)
    )
    logger.info(
        f"Reducción ({contabilidad.value}): {100 * informe.reduccion:.2f}% "
        f"± {100 * informe.semiancho_ic:.2f}%"
    )
    return informe
