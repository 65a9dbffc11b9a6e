"""
Optimización del Criterio de Clasificación λ_c

Barrido del umbral: curvas α0/α1, varianzas en V_min y V_max, reducción
del número de mediciones, el cruce α0 = 1 y el λ_c* que minimiza la
varianza mínima.
"""

import numpy as np
from scipy.optimize import minimize_scalar, bisect
from typing import List, Tuple
from dataclasses import dataclass, field
import logging

from .geometria_bloch import ParAlfa, TOLERANCIA_ALFA1, varianzas_extremas
from .modelo_lectura import ModeloLectura, alfas, alfas_lote, argmax_alfa1
from .errores import SinCambioSigno, MinimoNoUnico

logger = logging.getLogger(__name__)

# Dos mínimos refinados empatan si difieren menos que esto (relativo)
TOLERANCIA_EMPATE = 1e-9

# Separación mínima entre candidatos distintos
TOLERANCIA_LAMBDA = 1e-4

# Intervalo por defecto: cubre λ ≈ −0.58 y λ ≈ 0.11 con margen
INTERVALO_POR_DEFECTO = (-1.5, 1.5)


@dataclass(frozen=True)
class MallaBarrido:
    lambda_min: float = INTERVALO_POR_DEFECTO[0]
    lambda_max: float = INTERVALO_POR_DEFECTO[1]
    puntos: int = 601

    def __post_init__(self):
        if not self.lambda_min < self.lambda_max:
            raise ValueError(
                f"lambda_min ({self.lambda_min}) debe ser menor que lambda_max ({self.lambda_max})"
            )
        if self.puntos < 2:
            raise ValueError(f"La malla requiere al menos 2 puntos, recibido: {self.puntos}")

    def valores(self) -> np.ndarray:
        return np.linspace(self.lambda_min, self.lambda_max, self.puntos)


@dataclass(frozen=True)
class FilaBarrido:
    """
    Una fila del barrido; las varianzas son N·σ² (por disparo).

    Si α1 ≈ 0 la fila queda marcada como degenerada con varianzas NaN.
    """
    lambda_c: float
    alfa0: float
    alfa1: float
    var_min_por_disparo: float
    var_max_por_disparo: float
    reduccion: float
    degenerada: bool = False

    def to_dict(self) -> dict:
        return {
            'lambda_c': self.lambda_c,
            'alfa0': self.alfa0,
            'alfa1': self.alfa1,
            'var_min': self.var_min_por_disparo,
            'var_max': self.var_max_por_disparo,
            'reduccion': self.reduccion,
            'degenerada': int(self.degenerada)
        }


@dataclass
class ResultadoCriterio:
    """λ_c* y diagnóstico de la búsqueda"""
    lambda_c: float
    var_min_por_disparo: float
    no_unico: bool = False
    candidatos: List[float] = field(default_factory=list)
    lambda_max_alfa1: float = float('nan')


def fila_barrido(lambda_c: float, alfa0: float, alfa1: float) -> FilaBarrido:
    if abs(alfa1) < TOLERANCIA_ALFA1:
        return FilaBarrido(
            float(lambda_c), float(alfa0), float(alfa1),
            float('nan'), float('nan'), float('nan'), degenerada=True
        )
    v_min, v_max = varianzas_extremas(ParAlfa(alfa0, alfa1))
    return FilaBarrido(
        lambda_c=float(lambda_c),
        alfa0=float(alfa0),
        alfa1=float(alfa1),
        var_min_por_disparo=v_min,
        var_max_por_disparo=v_max,
        reduccion=1.0 - v_min / v_max
    )


def barrido(m: ModeloLectura, malla: MallaBarrido = MallaBarrido()) -> List[FilaBarrido]:
    """
    Recorre la malla de umbrales en orden creciente

    Returns:
        Lista de FilaBarrido; las filas con α1 ≈ 0 se marcan, no se omiten
    """
    lambdas = malla.valores()
    a0, a1 = alfas_lote(m, lambdas)
    filas = [fila_barrido(l, x0, x1) for l, x0, x1 in zip(lambdas, a0, a1)]

    degeneradas = sum(f.degenerada for f in filas)
    if degeneradas:
        logger.debug(f"Barrido: {degeneradas} filas degeneradas (α1 ≈ 0)")

    return filas


def _var_min(m: ModeloLectura, lambda_c: float) -> float:
    a = alfas(m, lambda_c)
    if abs(a.alfa1) < TOLERANCIA_ALFA1:
        return float('inf')
    return varianzas_extremas(a)[0]


def criterio_optimo(
    m: ModeloLectura,
    malla: MallaBarrido = MallaBarrido(),
    estricto: bool = False
) -> ResultadoCriterio:
    """
    λ_c que minimiza N·σ² en V_min

    Barrido de la malla, luego refinamiento por sección áurea alrededor de
    cada mínimo local interior. Si varios mínimos empatan se devuelve el de
    menor λ_c y se marca no_unico (en modo estricto se lanza MinimoNoUnico).

    Args:
        m: Modelo de lectura
        malla: Malla de búsqueda
        estricto: Lanzar excepción ante mínimos empatados

    Returns:
        ResultadoCriterio con λ_c*, su varianza, candidatos y el argmax de α1
    """
    lambdas = malla.valores()
    valores = np.array([_var_min(m, l) for l in lambdas])

    interiores = [
        i for i in range(1, len(lambdas) - 1)
        if np.isfinite(valores[i]) and valores[i] < valores[i - 1] and valores[i] < valores[i + 1]
    ]

    refinados: List[Tuple[float, float]] = []
    for i in interiores:
        res = minimize_scalar(
            lambda l: _var_min(m, l),
            bracket=(lambdas[i - 1], lambdas[i], lambdas[i + 1]),
            method='golden'
        )
        refinados.append((float(res.x), float(res.fun)))

    if not refinados:
        i = int(np.nanargmin(valores))
        logger.warning(f"Sin mínimo interior en la malla; se usa el borde λ_c = {lambdas[i]:.4f}")
        refinados.append((float(lambdas[i]), float(valores[i])))

    mejor_valor = min(v for _, v in refinados)
    empatados = sorted(
        l for l, v in refinados
        if abs(v - mejor_valor) <= TOLERANCIA_EMPATE * abs(mejor_valor)
    )
    distintos = [empatados[0]]
    for l in empatados[1:]:
        if l - distintos[-1] > TOLERANCIA_LAMBDA:
            distintos.append(l)

    no_unico = len(distintos) > 1
    if no_unico:
        if estricto:
            raise MinimoNoUnico(
                f"Mínimos empatados en λ_c = {distintos}",
                candidatos=distintos
            )
        logger.warning(f"Mínimo no único en λ_c = {distintos}; se devuelve el menor")

    resultado = ResultadoCriterio(
        lambda_c=distintos[0],
        var_min_por_disparo=mejor_valor,
        no_unico=no_unico,
        candidatos=distintos,
        lambda_max_alfa1=argmax_alfa1(m, lambdas)
    )
    logger.info(
        f"λ_c* = {resultado.lambda_c:.4f} (N·σ²_min = {mejor_valor:.4f}), "
        f"argmax α1 = {resultado.lambda_max_alfa1:.4f}"
    )
    return resultado


def encontrar_cruce(
    m: ModeloLectura,
    intervalo: Tuple[float, float] = INTERVALO_POR_DEFECTO
) -> float:
    """
    Umbral donde α0 = 1 (allí V_min y V_max intercambian papeles)

    Raises:
        SinCambioSigno: si α0 − 1 no cambia de signo en el intervalo
    """
    izq, der = intervalo

    def sesgo(l: float) -> float:
        return alfas(m, l).alfa0 - 1.0

    s_izq, s_der = sesgo(izq), sesgo(der)
    if s_izq == 0.0:
        return float(izq)
    if s_der == 0.0:
        return float(der)
    if s_izq * s_der > 0:
        raise SinCambioSigno(
            f"α0 − 1 no cambia de signo en [{izq}, {der}]",
            intervalo=[izq, der], sesgo_izq=s_izq, sesgo_der=s_der
        )

    cruce = float(bisect(sesgo, izq, der, xtol=1e-12, maxiter=200))
    logger.info(f"Cruce α0 = 1 en λ_c = {cruce:.6f}")
    return cruce


def disparos_equivalentes(a: ParAlfa, n: float) -> float:
    """
    N' tal que la varianza en V_min con N' disparos iguala la de V_max con N

    1 − N'/N coincide con la reducción del barrido.
    """
    v_min, v_max = varianzas_extremas(a)
    return n * v_min / v_max
