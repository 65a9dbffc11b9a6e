"""
Tomografía de Tres Ejes a Nivel de Disparo

- Simulación de conteos X_k ~ B(N/3, p_k) a partir de la lectura débil
- Estimador de inversión directa p̂_k = X_k/(N/3) → r̂
- Proyección a la bola de Bloch
- Métricas de error: Δ, Hilbert-Schmidt, distancia de traza, infidelidad
- Agregación de varianza empírica N·E[Δ²] con intervalo de confianza
"""

import numpy as np
from scipy.stats import norm
from typing import Sequence
from dataclasses import dataclass
import logging

from .geometria_bloch import (
    VectorBloch,
    PuntoProbabilidad,
    ParAlfa,
    probabilidad_a_bloch,
    matriz_densidad,
)
from .modelo_lectura import (
    ModeloLectura,
    probabilidades_conversion,
    muestrear_registros,
)
from .errores import PresupuestoInvalido, EnsayosInsuficientes

logger = logging.getLogger(__name__)

MODOS_DISPARO = ('binomial', 'registros')

Z_95 = float(norm.ppf(0.975))


@dataclass(frozen=True)
class TripleConteos:
    """Número de resultados "0" en cada eje"""
    n_por_eje: int
    ceros_x: int
    ceros_y: int
    ceros_z: int

    def __post_init__(self):
        for nombre in ('ceros_x', 'ceros_y', 'ceros_z'):
            valor = getattr(self, nombre)
            if not 0 <= valor <= self.n_por_eje:
                raise ValueError(f"{nombre} = {valor} fuera de [0, {self.n_por_eje}]")

    @property
    def n_total(self) -> int:
        return 3 * self.n_por_eje

    def como_array(self) -> np.ndarray:
        return np.array([self.ceros_x, self.ceros_y, self.ceros_z])


@dataclass(frozen=True, eq=False)
class ResultadoEstimador:
    """Estimador de inversión directa, crudo y proyectado"""
    p_hat: PuntoProbabilidad
    r_hat_crudo: np.ndarray
    r_hat: VectorBloch
    n_total: int


@dataclass(frozen=True)
class MetricasError:
    delta: float
    distancia_hs: float
    distancia_traza: float
    infidelidad: float

    def to_dict(self) -> dict:
        return {
            'delta': self.delta,
            'distancia_hs': self.distancia_hs,
            'distancia_traza': self.distancia_traza,
            'infidelidad': self.infidelidad
        }


@dataclass(frozen=True)
class InformeVarianza:
    """
    Agregado de Monte Carlo de Δ²

    media_delta2 es el segundo momento respecto de cero (el estimador es
    insesgado); semiancho_ic es el semiancho al 95% de media_delta2.
    """
    n_total: int
    ensayos: int
    media_delta2: float
    varianza_por_n: float
    semiancho_ic: float

    @property
    def semiancho_por_n(self) -> float:
        return self.n_total * self.semiancho_ic


def validar_presupuesto(n_total: int) -> int:
    """Devuelve N/3; exige N > 0 y divisible entre 3"""
    if n_total <= 0 or n_total % 3 != 0:
        raise PresupuestoInvalido(
            f"El número de disparos debe ser positivo y divisible entre 3, recibido: {n_total}",
            n_total=n_total
        )
    return n_total // 3


# =========================================================================
# SIMULACIÓN DE CONTEOS
# =========================================================================

def simular_conteos(
    r: VectorBloch,
    m: ModeloLectura,
    lambda_c: float,
    n_total: int,
    rng: np.random.Generator,
    modo: str = 'binomial'
) -> TripleConteos:
    """
    Simula N/3 disparos por eje

    En cada disparo del eje k el estado colapsa a |g⟩ con probabilidad
    (1 + r_k)/2 (rotación previa ideal), se genera el registro λ_D y se
    clasifica contra λ_c.

    Args:
        r: Estado verdadero
        m: Modelo de lectura
        lambda_c: Umbral de clasificación
        n_total: Disparos totales, divisible entre 3
        rng: Generador propio de esta ejecución
        modo: 'registros' muestrea cada λ_D; 'binomial' muestrea la misma ley
            en forma compuesta (bits ~ B(n, (1+r_k)/2), luego ceros por rama)

    Returns:
        TripleConteos con ceros_k ~ B(N/3, (α0 + α1 r_k)/2)
    """
    n = validar_presupuesto(n_total)
    if modo not in MODOS_DISPARO:
        raise ValueError(f"Modo de disparo desconocido: {modo!r}")

    prob_g = np.clip((1.0 + r.como_array()) / 2, 0.0, 1.0)

    if modo == 'binomial':
        conv = probabilidades_conversion(m, lambda_c)
        n_g = rng.binomial(n, prob_g)
        ceros = rng.binomial(n_g, conv.p_g0) + rng.binomial(n - n_g, conv.p_e0)
    else:
        ceros = np.empty(3, dtype=int)
        for k in range(3):
            excitados = rng.random(n) >= prob_g[k]
            registros = muestrear_registros(m, excitados, rng)
            ceros[k] = int(np.count_nonzero(registros < lambda_c))

    return TripleConteos(n, int(ceros[0]), int(ceros[1]), int(ceros[2]))


# =========================================================================
# ESTIMACIÓN
# =========================================================================

def proyectar_bola(r_crudo) -> VectorBloch:
    """Punto más cercano de la bola unidad (norma euclídea)"""
    r_crudo = np.asarray(r_crudo, dtype=float)
    norma = np.linalg.norm(r_crudo)
    if norma <= 1.0:
        return VectorBloch.desde_array(r_crudo)
    return VectorBloch.desde_array(r_crudo / norma)


def invertir(c: TripleConteos, a: ParAlfa) -> ResultadoEstimador:
    """
    Inversión directa de los conteos

    p̂_k = X_k/(N/3),  r̂_k = (2 p̂_k − α0)/α1,  r̂ = proyección de r̂ crudo
    """
    p_hat = PuntoProbabilidad.desde_array(c.como_array() / c.n_por_eje)
    r_crudo = probabilidad_a_bloch(p_hat, a)
    return ResultadoEstimador(
        p_hat=p_hat,
        r_hat_crudo=r_crudo,
        r_hat=proyectar_bola(r_crudo),
        n_total=c.n_total
    )


# =========================================================================
# MÉTRICAS
# =========================================================================

def fidelidad(r, s) -> float:
    """
    F = Tr(ρσ) + 2√(det ρ · det σ) para qubits, sobre las matrices 2×2
    """
    rho = matriz_densidad(r)
    sig = matriz_densidad(s)
    det_rho = max(float(np.real(np.linalg.det(rho))), 0.0)
    det_sig = max(float(np.real(np.linalg.det(sig))), 0.0)
    f = float(np.real(np.trace(rho @ sig))) + 2.0 * np.sqrt(det_rho * det_sig)
    return float(np.clip(f, 0.0, 1.0))


def metricas_error(
    r_verdadero: VectorBloch,
    est: ResultadoEstimador,
    usar_proyectado: bool = False
) -> MetricasError:
    """
    Métricas del estimador frente al estado verdadero

    Args:
        r_verdadero: Estado verdadero
        est: Resultado de invertir()
        usar_proyectado: Δ con r̂ proyectado (reporte de fidelidad) o crudo
            (estudios de varianza). La infidelidad siempre usa el proyectado.

    Returns:
        MetricasError con hs = Δ²/2 y traza = Δ/2
    """
    r_est = est.r_hat.como_array() if usar_proyectado else est.r_hat_crudo
    delta = float(np.linalg.norm(r_est - r_verdadero.como_array()))
    return MetricasError(
        delta=delta,
        distancia_hs=delta**2 / 2,
        distancia_traza=delta / 2,
        infidelidad=max(0.0, 1.0 - fidelidad(r_verdadero, est.r_hat))
    )


def varianza_empirica(deltas: Sequence[float], n_total: int) -> InformeVarianza:
    """
    Agrega Δ de T ensayos en N·E[Δ²] con IC normal al 95%

    Raises:
        EnsayosInsuficientes: menos de 2 ensayos
    """
    deltas = np.asarray(deltas, dtype=float)
    ensayos = int(deltas.size)
    if ensayos < 2:
        raise EnsayosInsuficientes(f"Se requieren al menos 2 ensayos, recibido: {ensayos}")

    delta2 = deltas**2
    media = float(np.mean(delta2))
    semiancho = Z_95 * float(np.std(delta2, ddof=1)) / np.sqrt(ensayos)

    logger.debug(f"N={n_total}, T={ensayos}: N·E[Δ²] = {n_total * media:.4f} ± {n_total * semiancho:.4f}")

    return InformeVarianza(
        n_total=n_total,
        ensayos=ensayos,
        media_delta2=media,
        varianza_por_n=n_total * media,
        semiancho_ic=semiancho
    )
