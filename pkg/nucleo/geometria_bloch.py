"""
Módulo de Geometría de Bloch y Estadística Cerrada

Relaciona el espacio de Bloch B con el espacio de probabilidades P de una
lectura imperfecta:

    p_k = (α0 + α1·r_k) / 2        k ∈ {x, y, z}

y calcula la varianza del error de estimación tomográfica:

    σ²(Δ) = 12 / (N·α1²) · (3/4 − |R|²),    R = p − (1/2, 1/2, 1/2)

Convenciones:
- El resultado "0" se identifica con |g⟩, y |g⟩ tiene r_z = +1
- |ψ⟩ = cos θ|g⟩ + e^{iφ} sin θ|e⟩  →  r = (sin 2θ cos φ, sin 2θ sin φ, cos 2θ)

Todas las funciones son puras y los tipos inmutables.
"""

import numpy as np
from typing import Tuple
from dataclasses import dataclass
import logging

from .errores import CalibracionDegenerada, GeometriaDegenerada

logger = logging.getLogger(__name__)

TOLERANCIA_NORMA = 1e-12
TOLERANCIA_ALFA1 = 1e-9
TOLERANCIA_ALFA0 = 1e-9

DIAGONAL = np.ones(3) / np.sqrt(3.0)

# Matrices de Pauli
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTIDAD = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class EstadoQubit:
    """Estado puro cos θ|g⟩ + e^{iφ} sin θ|e⟩ con θ ∈ [0, π/2], φ ∈ [0, 2π)"""
    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta)
        if theta < -TOLERANCIA_NORMA or theta > np.pi / 2 + TOLERANCIA_NORMA:
            raise ValueError(f"theta fuera de [0, π/2]: {theta}")
        object.__setattr__(self, 'theta', float(np.clip(theta, 0.0, np.pi / 2)))
        phi = float(np.mod(self.phi, 2 * np.pi))
        # np.mod puede devolver exactamente 2π por redondeo
        if phi >= 2 * np.pi:
            phi = 0.0
        object.__setattr__(self, 'phi', phi)


@dataclass(frozen=True)
class VectorBloch:
    """Punto r dentro (o sobre) la esfera de Bloch"""
    rx: float
    ry: float
    rz: float

    def __post_init__(self):
        norma = float(np.sqrt(self.rx**2 + self.ry**2 + self.rz**2))
        if not np.isfinite(norma) or norma > 1.0 + TOLERANCIA_NORMA:
            raise ValueError(
                f"El vector de Bloch debe cumplir |r| ≤ 1, norma actual: {norma}"
            )

    @classmethod
    def desde_array(cls, r) -> 'VectorBloch':
        r = np.asarray(r, dtype=float)
        return cls(float(r[0]), float(r[1]), float(r[2]))

    def como_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz])

    @property
    def norma(self) -> float:
        return float(np.linalg.norm(self.como_array()))


@dataclass(frozen=True)
class PuntoProbabilidad:
    """
    Probabilidades de obtener "0" en cada eje

    Para puntos generados desde un estado válido se cumple
    P_{e→0} ≤ p_k ≤ P_{g→0}.
    """
    px: float
    py: float
    pz: float

    def __post_init__(self):
        for nombre in ('px', 'py', 'pz'):
            valor = float(getattr(self, nombre))
            if valor < -TOLERANCIA_NORMA or valor > 1.0 + TOLERANCIA_NORMA:
                raise ValueError(f"{nombre} fuera de [0, 1]: {valor}")
            object.__setattr__(self, nombre, float(np.clip(valor, 0.0, 1.0)))

    @classmethod
    def desde_array(cls, p) -> 'PuntoProbabilidad':
        p = np.asarray(p, dtype=float)
        return cls(float(p[0]), float(p[1]), float(p[2]))

    def como_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.pz])


@dataclass(frozen=True)
class ParAlfa:
    """
    Par de calibración (α0, α1)

    α0 = P_{g→0} + P_{e→0}   (sesgo de población)
    α1 = P_{g→0} − P_{e→0}   (contraste de lectura)
    """
    alfa0: float
    alfa1: float

    def __post_init__(self):
        a0, a1 = float(self.alfa0), float(self.alfa1)
        if not (0.0 - TOLERANCIA_NORMA <= a0 <= 2.0 + TOLERANCIA_NORMA):
            raise ValueError(f"alfa0 fuera de [0, 2]: {a0}")
        if abs(a1) > min(a0, 2.0 - a0) + TOLERANCIA_NORMA:
            raise ValueError(
                f"|alfa1| = {abs(a1)} excede min(alfa0, 2 - alfa0) = {min(a0, 2.0 - a0)}"
            )

    @classmethod
    def desde_conversion(cls, p_g0: float, p_e0: float) -> 'ParAlfa':
        return cls(p_g0 + p_e0, p_g0 - p_e0)

    @property
    def p_g0(self) -> float:
        return (self.alfa0 + self.alfa1) / 2

    @property
    def p_e0(self) -> float:
        return (self.alfa0 - self.alfa1) / 2


def _exigir_contraste(a: ParAlfa, tolerancia: float = TOLERANCIA_ALFA1):
    if abs(a.alfa1) < tolerancia:
        raise CalibracionDegenerada(
            f"alfa1 = {a.alfa1:.3e}: lectura sin contraste, estados indistinguibles",
            alfa0=a.alfa0, alfa1=a.alfa1
        )


# =========================================================================
# MAPAS ENTRE ESPACIOS
# =========================================================================

def estado_a_bloch(s: EstadoQubit) -> VectorBloch:
    """Vector de Bloch del estado puro s (norma 1)"""
    return VectorBloch(
        float(np.sin(2 * s.theta) * np.cos(s.phi)),
        float(np.sin(2 * s.theta) * np.sin(s.phi)),
        float(np.cos(2 * s.theta))
    )


def bloch_a_estado(r: VectorBloch) -> EstadoQubit:
    """
    Estado puro en la dirección de r

    Para r no unitario se usa su dirección. En los polos φ queda en 0.
    """
    v = r.como_array()
    norma = np.linalg.norm(v)
    if norma < TOLERANCIA_NORMA:
        raise ValueError("El centro de la esfera no define un estado puro")
    v = v / norma
    theta = 0.5 * np.arctan2(np.hypot(v[0], v[1]), v[2])
    phi = np.arctan2(v[1], v[0]) if np.hypot(v[0], v[1]) > TOLERANCIA_NORMA else 0.0
    return EstadoQubit(float(theta), float(phi))


def amplitudes(s: EstadoQubit) -> np.ndarray:
    """Ket [cos θ, e^{iφ} sin θ] en la base {|g⟩, |e⟩}"""
    return np.array([np.cos(s.theta), np.exp(1j * s.phi) * np.sin(s.theta)])


def matriz_densidad(r) -> np.ndarray:
    """ρ = (I + r·σ) / 2"""
    v = r.como_array() if isinstance(r, VectorBloch) else np.asarray(r, dtype=float)
    return 0.5 * (IDENTIDAD + v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z)


def bloch_a_probabilidad(r: VectorBloch, a: ParAlfa) -> PuntoProbabilidad:
    """p_k = (α0 + α1·r_k) / 2"""
    return PuntoProbabilidad.desde_array((a.alfa0 + a.alfa1 * r.como_array()) / 2)


def probabilidad_a_bloch(p: PuntoProbabilidad, a: ParAlfa) -> np.ndarray:
    """
    Inversión directa r_k = (2 p_k − α0) / α1

    El resultado puede quedar fuera de la esfera (se devuelve como array;
    quien llama decide si proyecta).
    """
    _exigir_contraste(a)
    return (2 * p.como_array() - a.alfa0) / a.alfa1


def vector_desplazamiento(p: PuntoProbabilidad) -> np.ndarray:
    """R = p − (1/2, 1/2, 1/2), distancia al centro P0 del cubo"""
    return p.como_array() - 0.5


# =========================================================================
# VARIANZA DEL ERROR DE ESTIMACIÓN
# =========================================================================

def _varianza_desde_r(r: np.ndarray, alfa0: float, alfa1: float, n: float) -> np.ndarray:
    """Versión vectorizada sobre filas de r (forma (..., 3))"""
    R = (alfa0 + alfa1 * np.asarray(r, dtype=float)) / 2 - 0.5
    return 12.0 / (n * alfa1**2) * (0.75 - np.sum(R**2, axis=-1))


def varianza_analitica(r: VectorBloch, a: ParAlfa, n: float) -> float:
    """
    Varianza σ²(Δ) del estimador de inversión directa con N disparos

    Args:
        r: Estado verdadero
        a: Par de calibración
        n: Disparos totales (N/3 por eje)

    Returns:
        12/(N α1²) · (3/4 − |R|²)
    """
    _exigir_contraste(a)
    if n < 3:
        raise ValueError(f"Se requieren al menos 3 disparos, recibido: {n}")
    return float(_varianza_desde_r(r.como_array(), a.alfa0, a.alfa1, n))


def varianza_analitica_lote(r: np.ndarray, a: ParAlfa, n: float) -> np.ndarray:
    """varianza_analitica sobre un arreglo (M, 3) de vectores de Bloch"""
    _exigir_contraste(a)
    return _varianza_desde_r(r, a.alfa0, a.alfa1, n)


def varianzas_extremas(a: ParAlfa, n: float = 1.0) -> Tuple[float, float]:
    """
    Varianzas en V_min y V_max

    Con u = |α0 − 1| y v = |α1|:
        V_min = 9 (1 − (u + v/√3)²) / (N v²)
        V_max = 9 (1 − (u − v/√3)²) / (N v²)
    Definidas también en α0 = 1, donde coinciden.
    """
    _exigir_contraste(a)
    u = abs(a.alfa0 - 1.0)
    v = abs(a.alfa1)
    v_min = 9.0 * (1.0 - (u + v / np.sqrt(3.0))**2) / (n * v**2)
    v_max = 9.0 * (1.0 - (u - v / np.sqrt(3.0))**2) / (n * v**2)
    return float(v_min), float(v_max)


# =========================================================================
# ESTADOS EXTREMOS
# =========================================================================

def bloch_extremos(
    a: ParAlfa,
    exigir_unico: bool = True
) -> Tuple[VectorBloch, VectorBloch]:
    """
    Estados de varianza mínima (mejor) y máxima (peor)

    mejor = s·(1,1,1)/√3, peor = −mejor, con s = signo((α0 − 1)·α1).
    Para α1 > 0 coincide con s = signo(α0 − 1).

    Args:
        a: Par de calibración
        exigir_unico: Si True, α0 = 1 lanza GeometriaDegenerada; si False
            se toma s = +1

    Returns:
        (mejor, peor)
    """
    _exigir_contraste(a)
    sesgo = a.alfa0 - 1.0
    if abs(sesgo) < TOLERANCIA_ALFA0:
        if exigir_unico:
            raise GeometriaDegenerada(
                f"alfa0 = {a.alfa0}: todas las direcciones dan la misma varianza",
                alfa0=a.alfa0, alfa1=a.alfa1
            )
        signo = 1.0
    else:
        signo = float(np.sign(sesgo * a.alfa1))

    mejor = VectorBloch.desde_array(signo * DIAGONAL)
    peor = VectorBloch.desde_array(-signo * DIAGONAL)

    logger.debug(f"Extremos para α=({a.alfa0:.4f}, {a.alfa1:.4f}): signo {signo:+.0f}")

    return mejor, peor


def kets_extremos(a: ParAlfa) -> Tuple[EstadoQubit, EstadoQubit]:
    """
    Ángulos de |ψ⟩_mejor y |ψ⟩_peor (versión normalizada de los kets)

    Para α0 > 1: cos²θ_mejor = (3+√3)/6, φ_mejor = π/4;
                 cos²θ_peor = (3−√3)/6, φ_peor = 5π/4.
    """
    mejor, peor = bloch_extremos(a)
    return bloch_a_estado(mejor), bloch_a_estado(peor)
