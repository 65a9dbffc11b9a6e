"""
Modelo Fenomenológico de Lectura Débil

Cada disparo produce un registro normalizado λ_D (coordenada a lo largo de la
dirección pico a pico de las dos envolventes del plano IQ). Los registros se
modelan como una mezcla gaussiana:

    |g⟩ → N(μ_g, σ) con prob. 1 − w_therm,  N(μ_e, σ) con prob. w_therm
    |e⟩ → N(μ_e, σ) con prob. 1 − w_decay,  N(μ_g, σ) con prob. w_decay

y se clasifican como "0" si λ_D < λ_c. De ahí salen las curvas de calibración
P_{g→0}(λ_c), P_{e→0}(λ_c), α0(λ_c) y α1(λ_c).
"""

import numpy as np
from scipy.special import erfc
from scipy.optimize import least_squares
from typing import Dict, Optional, Tuple
from dataclasses import dataclass, field, asdict
import logging

from .geometria_bloch import ParAlfa
from .errores import CalibracionFallida, ErrorConfiguracion, SubRestringido

logger = logging.getLogger(__name__)

PARAMETROS_MODELO = ('mu_g', 'mu_e', 'sigma_env', 'w_decay', 'w_therm')

# 2σ = 0.7896 en coordenadas normalizadas
SIGMA_REFERENCIA = 0.3948

# Picos de las envolventes en ±1 (distancia pico a pico normalizada = 2)
SEPARACION_NORMALIZADA = 2.0


@dataclass(frozen=True)
class ModeloLectura:
    """Parámetros de la mezcla gaussiana de registros λ_D"""
    mu_g: float
    mu_e: float
    sigma_env: float
    w_decay: float = 0.0   # prob. de que un disparo |e⟩ caiga en la envolvente g
    w_therm: float = 0.0   # prob. de que un disparo |g⟩ caiga en la envolvente e

    def __post_init__(self):
        if not self.sigma_env > 0:
            raise ValueError(f"sigma_env debe ser positiva, recibido: {self.sigma_env}")
        if self.mu_g == self.mu_e:
            raise ValueError("Los centros mu_g y mu_e deben ser distintos")
        for nombre in ('w_decay', 'w_therm'):
            w = getattr(self, nombre)
            if not 0.0 <= w < 1.0:
                raise ValueError(f"{nombre} fuera de [0, 1): {w}")
        if self.w_decay + self.w_therm >= 1.0:
            raise ValueError(
                f"w_decay + w_therm debe ser < 1, suma actual: {self.w_decay + self.w_therm}"
            )

    def to_dict(self) -> Dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class ProbabilidadesConversion:
    """P_{g→0} y P_{e→0} para un umbral dado"""
    p_g0: float
    p_e0: float

    def __post_init__(self):
        for nombre in ('p_g0', 'p_e0'):
            valor = getattr(self, nombre)
            if not 0.0 <= valor <= 1.0:
                raise ValueError(f"{nombre} fuera de [0, 1]: {valor}")


@dataclass(frozen=True)
class AnclaCalibracion:
    """Valor objetivo de (α0, α1) en un umbral; None deja la componente libre"""
    lambda_c: float
    alfa0: Optional[float] = None
    alfa1: Optional[float] = None
    peso: float = 1.0

    @property
    def num_restricciones(self) -> int:
        return int(self.alfa0 is not None) + int(self.alfa1 is not None)


@dataclass(frozen=True)
class AnclasCalibracion:
    anclas: Tuple[AnclaCalibracion, ...]

    def __post_init__(self):
        if not self.anclas:
            raise ValueError("Se requiere al menos un ancla de calibración")
        umbrales = [a.lambda_c for a in self.anclas]
        if len(set(umbrales)) != len(umbrales):
            raise ValueError(f"Umbrales de ancla repetidos: {umbrales}")

    @property
    def num_restricciones(self) -> int:
        return sum(a.num_restricciones for a in self.anclas)


@dataclass
class ResultadoCalibracion:
    """Modelo ajustado y residuos por ancla"""
    modelo: ModeloLectura
    anclas: AnclasCalibracion
    residuos_alfa0: np.ndarray
    residuos_alfa1: np.ndarray
    residuo_maximo: float
    parametros_libres: Tuple[str, ...] = field(default_factory=tuple)


# Ajuste a las anclas con los centros redondeados a ±1 (ver datos/configuracion/modelo_lectura.yaml)
MODELO_REFERENCIA = ModeloLectura(
    mu_g=-1.0,
    mu_e=1.0,
    sigma_env=SIGMA_REFERENCIA,
    w_decay=0.1978,
    w_therm=0.0269
)

ANCLAS_REFERENCIA = AnclasCalibracion((
    AnclaCalibracion(lambda_c=0.11, alfa0=1.178, alfa1=0.764, peso=1.0),
    AnclaCalibracion(lambda_c=-0.5828, alfa0=1.0, alfa1=None, peso=1.0),
))


# =========================================================================
# CURVAS DE CONVERSIÓN
# =========================================================================

def cdf_normal(x):
    """Φ(x) = erfc(−x/√2)/2"""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / np.sqrt(2.0))


def curvas_conversion(
    m: ModeloLectura,
    lambdas
) -> Tuple[np.ndarray, np.ndarray]:
    """P_{g→0}(λ_c) y P_{e→0}(λ_c) evaluadas sobre un arreglo de umbrales"""
    lambdas = np.asarray(lambdas, dtype=float)
    phi_g = cdf_normal((lambdas - m.mu_g) / m.sigma_env)
    phi_e = cdf_normal((lambdas - m.mu_e) / m.sigma_env)
    p_g0 = (1.0 - m.w_therm) * phi_g + m.w_therm * phi_e
    p_e0 = m.w_decay * phi_g + (1.0 - m.w_decay) * phi_e
    return p_g0, p_e0


def probabilidades_conversion(m: ModeloLectura, lambda_c: float) -> ProbabilidadesConversion:
    """
    Probabilidades de clasificar como "0" cada estado base

    Args:
        m: Modelo de lectura
        lambda_c: Umbral de clasificación (admite ±inf)

    Returns:
        ProbabilidadesConversion, ambas no decrecientes en λ_c
    """
    p_g0, p_e0 = curvas_conversion(m, lambda_c)
    return ProbabilidadesConversion(
        float(np.clip(p_g0, 0.0, 1.0)),
        float(np.clip(p_e0, 0.0, 1.0))
    )


def alfas(m: ModeloLectura, lambda_c: float) -> ParAlfa:
    """(α0, α1) = (P_{g→0} + P_{e→0}, P_{g→0} − P_{e→0})"""
    conv = probabilidades_conversion(m, lambda_c)
    return ParAlfa.desde_conversion(conv.p_g0, conv.p_e0)


def alfas_lote(m: ModeloLectura, lambdas) -> Tuple[np.ndarray, np.ndarray]:
    p_g0, p_e0 = curvas_conversion(m, lambdas)
    return p_g0 + p_e0, p_g0 - p_e0


def densidad_registro(m: ModeloLectura, lambda_d, excitado: bool) -> np.ndarray:
    """Densidad de probabilidad de λ_D condicionada al estado preparado"""
    lambda_d = np.asarray(lambda_d, dtype=float)
    normal = lambda mu: np.exp(-0.5 * ((lambda_d - mu) / m.sigma_env)**2) / (
        m.sigma_env * np.sqrt(2 * np.pi)
    )
    if excitado:
        return m.w_decay * normal(m.mu_g) + (1.0 - m.w_decay) * normal(m.mu_e)
    return (1.0 - m.w_therm) * normal(m.mu_g) + m.w_therm * normal(m.mu_e)


def argmax_alfa1(m: ModeloLectura, lambdas) -> float:
    """Umbral de máxima discriminación α1 sobre una malla"""
    lambdas = np.asarray(lambdas, dtype=float)
    _, a1 = alfas_lote(m, lambdas)
    return float(lambdas[int(np.argmax(a1))])


# =========================================================================
# MUESTREO Y CLASIFICACIÓN
# =========================================================================

def muestrear_registros(
    m: ModeloLectura,
    excitados: np.ndarray,
    rng: np.random.Generator
) -> np.ndarray:
    """
    Registros λ_D para una secuencia de disparos

    Primero se sortea la rama de contaminación (uniformes) y después la
    desviación gaussiana, siempre en ese orden.

    Args:
        m: Modelo de lectura
        excitados: Arreglo booleano, True para disparos en |e⟩
        rng: Generador propio de esta ejecución

    Returns:
        Arreglo de registros λ_D
    """
    excitados = np.asarray(excitados, dtype=bool)
    u = rng.random(excitados.shape)
    contaminado = np.where(excitados, u < m.w_decay, u < m.w_therm)
    # rama g-like: |g⟩ limpio o |e⟩ decaído
    en_envolvente_g = excitados == contaminado
    centros = np.where(en_envolvente_g, m.mu_g, m.mu_e)
    return rng.normal(centros, m.sigma_env)


def muestrear_registro(m: ModeloLectura, estado: str, rng: np.random.Generator) -> float:
    """Un registro λ_D para estado 'g' o 'e'"""
    if estado not in ('g', 'e'):
        raise ValueError(f"Estado base desconocido: {estado!r} (usar 'g' o 'e')")
    return float(muestrear_registros(m, np.array([estado == 'e']), rng)[0])


def clasificar(lambda_d: float, lambda_c: float) -> int:
    """0 si λ_D < λ_c, si no 1 (el borde va a 1)"""
    return 0 if lambda_d < lambda_c else 1


def clasificar_registros(registros: np.ndarray, lambda_c: float) -> np.ndarray:
    return np.where(np.asarray(registros) < lambda_c, 0, 1)


# =========================================================================
# CALIBRACIÓN CONTRA ANCLAS
# =========================================================================

def _validar_anclas(anclas: AnclasCalibracion):
    for ancla in anclas.anclas:
        a0, a1 = ancla.alfa0, ancla.alfa1
        if a0 is not None and not 0.0 <= a0 <= 2.0:
            raise CalibracionFallida(f"alfa0 objetivo fuera de [0, 2]: {a0}", lambda_c=ancla.lambda_c)
        if a1 is not None and abs(a1) > 1.0:
            raise CalibracionFallida(f"alfa1 objetivo fuera de [-1, 1]: {a1}", lambda_c=ancla.lambda_c)
        if a0 is not None and a1 is not None and abs(a1) > min(a0, 2.0 - a0):
            raise CalibracionFallida(
                f"Ancla en λ_c={ancla.lambda_c} exige |α1|={abs(a1)} > min(α0, 2−α0); "
                f"viola los límites de probabilidad",
                lambda_c=ancla.lambda_c
            )


def _parametros_libres(fijos: Dict[str, float]) -> Tuple[str, ...]:
    desconocidos = set(fijos) - set(PARAMETROS_MODELO) - {'separacion'}
    if desconocidos:
        raise ErrorConfiguracion(
            f"Parámetros fijos desconocidos: {sorted(desconocidos)}",
            desconocidos=sorted(desconocidos)
        )
    libres = [p for p in PARAMETROS_MODELO if p not in fijos]
    if 'separacion' in fijos:
        # uno de los centros queda determinado por el otro
        if 'mu_g' in fijos and 'mu_e' in fijos:
            raise ErrorConfiguracion("No se puede fijar mu_g, mu_e y separacion a la vez")
        libres.remove('mu_e' if 'mu_e' in libres else 'mu_g')
    return tuple(libres)


def _construir_modelo(valores: Dict[str, float], fijos: Dict[str, float]) -> Dict[str, float]:
    parametros = {**valores, **{k: v for k, v in fijos.items() if k != 'separacion'}}
    if 'separacion' in fijos:
        if 'mu_e' not in parametros:
            parametros['mu_e'] = parametros['mu_g'] + fijos['separacion']
        else:
            parametros['mu_g'] = parametros['mu_e'] - fijos['separacion']
    return parametros


def calibrar(
    anclas: AnclasCalibracion,
    fijos: Dict[str, float],
    inicial: Optional[Dict[str, float]] = None,
    techo_residuo: float = 1e-3
) -> ResultadoCalibracion:
    """
    Ajusta el modelo por mínimos cuadrados ponderados contra las anclas

    Args:
        anclas: Objetivos (λ_c, α0, α1, peso)
        fijos: Parámetros que no se ajustan; admite 'separacion' = μ_e − μ_g
        inicial: Punto de partida para los parámetros libres
        techo_residuo: Máximo |α_modelo − α_objetivo| aceptado

    Returns:
        ResultadoCalibracion con el modelo ajustado y residuos por ancla

    Raises:
        ErrorConfiguracion: parámetros fijos desconocidos o incompatibles
        SubRestringido: más parámetros libres que restricciones
        CalibracionFallida: anclas imposibles o residuo sobre el techo
    """
    _validar_anclas(anclas)
    libres = _parametros_libres(fijos)

    if len(libres) > anclas.num_restricciones:
        raise SubRestringido(
            f"{len(libres)} parámetros libres {libres} y solo "
            f"{anclas.num_restricciones} restricciones",
            libres=list(libres)
        )

    punto_inicial = {
        'mu_g': -1.0, 'mu_e': 1.0, 'sigma_env': SIGMA_REFERENCIA,
        'w_decay': 0.1, 'w_therm': 0.02
    }
    punto_inicial.update(inicial or {})

    limites = {
        'mu_g': (-10.0, 10.0), 'mu_e': (-10.0, 10.0), 'sigma_env': (1e-6, 10.0),
        'w_decay': (0.0, 0.999), 'w_therm': (0.0, 0.999)
    }

    umbrales = np.array([a.lambda_c for a in anclas.anclas])
    pesos = np.sqrt(np.array([a.peso for a in anclas.anclas]))
    mascara0 = np.array([a.alfa0 is not None for a in anclas.anclas])
    mascara1 = np.array([a.alfa1 is not None for a in anclas.anclas])
    objetivo0 = np.array([a.alfa0 if a.alfa0 is not None else 0.0 for a in anclas.anclas])
    objetivo1 = np.array([a.alfa1 if a.alfa1 is not None else 0.0 for a in anclas.anclas])

    def curvas(x) -> Tuple[np.ndarray, np.ndarray]:
        parametros = _construir_modelo(dict(zip(libres, x)), fijos)
        # se evalúa sin validar: el optimizador puede pisar w_decay + w_therm ≥ 1
        m = _ModeloSinValidar(**parametros)
        return alfas_lote(m, umbrales)

    def residuos(x) -> np.ndarray:
        a0, a1 = curvas(x)
        return np.concatenate([
            (pesos * (a0 - objetivo0))[mascara0],
            (pesos * (a1 - objetivo1))[mascara1]
        ])

    if libres:
        x0 = np.array([punto_inicial[p] for p in libres])
        inferiores = np.array([limites[p][0] for p in libres])
        superiores = np.array([limites[p][1] for p in libres])
        x0 = np.clip(x0, inferiores + 1e-9, superiores - 1e-9)
        ajuste = least_squares(
            residuos, x0,
            bounds=(inferiores, superiores),
            method='trf',
            xtol=1e-14, ftol=1e-14, gtol=1e-14,
            max_nfev=2000
        )
        x_final = ajuste.x
        logger.debug(f"least_squares: {ajuste.message} (nfev={ajuste.nfev}, costo={ajuste.cost:.3e})")
    else:
        x_final = np.array([])

    parametros = _construir_modelo(dict(zip(libres, x_final)), fijos)
    try:
        modelo = ModeloLectura(**{k: float(parametros[k]) for k in PARAMETROS_MODELO})
    except ValueError as e:
        raise CalibracionFallida(f"El ajuste produjo un modelo inválido: {e}")

    a0, a1 = alfas_lote(modelo, umbrales)
    residuos_alfa0 = np.where(mascara0, a0 - objetivo0, np.nan)
    residuos_alfa1 = np.where(mascara1, a1 - objetivo1, np.nan)
    todos = np.concatenate([residuos_alfa0[mascara0], residuos_alfa1[mascara1]])
    residuo_maximo = float(np.max(np.abs(todos))) if todos.size else 0.0

    if residuo_maximo > techo_residuo:
        raise CalibracionFallida(
            f"Residuo máximo {residuo_maximo:.3e} supera el techo {techo_residuo:.1e}",
            residuo_maximo=residuo_maximo,
            modelo=modelo.to_dict()
        )

    logger.info(
        f"Calibración completada: {modelo.to_dict()}, residuo máximo {residuo_maximo:.2e}"
    )

    return ResultadoCalibracion(
        modelo=modelo,
        anclas=anclas,
        residuos_alfa0=residuos_alfa0,
        residuos_alfa1=residuos_alfa1,
        residuo_maximo=residuo_maximo,
        parametros_libres=libres
    )


@dataclass(frozen=True)
class _ModeloSinValidar:
    """Mismos campos que ModeloLectura, sin validación (uso interno del ajuste)"""
    mu_g: float
    mu_e: float
    sigma_env: float
    w_decay: float
    w_therm: float
