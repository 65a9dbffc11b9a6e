"""
Configuración del Sistema

- AjustesSistema: ajustes de proceso (.env / entorno)
- ConfiguracionExperimento: archivo YAML de experimento con claves planas
  con punto (modelo.mu_g: -1.0); las claves desconocidas son error
- configurar_logging: consola con colorlog y archivo opcional
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union
import logging

import colorlog
import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .geometria_bloch import VectorBloch, ParAlfa, bloch_extremos, estado_a_bloch, EstadoQubit
from .modelo_lectura import (
    ModeloLectura,
    AnclaCalibracion,
    AnclasCalibracion,
    PARAMETROS_MODELO,
    MODELO_REFERENCIA,
    SIGMA_REFERENCIA,
    SEPARACION_NORMALIZADA,
)
from .adaptativo import (
    ConfiguracionProtocolo,
    ModeloImperfeccion,
    Contabilidad,
    N_PRE_REFERENCIA,
    LAMBDA_C_REFERENCIA,
    PUREZA_REFERENCIA,
    ERROR_ELEVACION_GRADOS,
    ERROR_AZIMUT_GRADOS,
)
from .optimizacion_criterio import MallaBarrido
from .tomografia import validar_presupuesto
from .errores import ErrorConfiguracion

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).parent.parent
CONFIG_DIR = BASE_DIR / "datos" / "configuracion"


class AjustesSistema(BaseSettings):
    """Ajustes de proceso; no afectan a los resultados numéricos"""

    APP_NAME: str = "Simulador de Tomografía Adaptativa (AQST)"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[Path] = None

    # Paralelismo
    AQST_UN_HILO: bool = Field(default=False, description="Fuerza ejecución en un solo proceso")
    AQST_HILOS: int = Field(default=1, ge=1)

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    def hilos_efectivos(self, solicitados: Optional[int] = None) -> int:
        if self.AQST_UN_HILO:
            return 1
        return max(1, solicitados if solicitados is not None else self.AQST_HILOS)


def configurar_logging(nivel: Optional[str] = None, archivo: Optional[Path] = None):
    """Configura el logger raíz una sola vez (consola a stderr con color)"""
    raiz = logging.getLogger()
    for handler in list(raiz.handlers):
        raiz.removeHandler(handler)

    consola = colorlog.StreamHandler()
    consola.setFormatter(colorlog.ColoredFormatter(
        "%(log_color)s%(asctime)s - %(name)s - %(levelname)s%(reset)s - %(message)s",
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
    ))
    raiz.addHandler(consola)

    if archivo is not None:
        archivo = Path(archivo)
        archivo.parent.mkdir(parents=True, exist_ok=True)
        manejador_archivo = logging.FileHandler(archivo, encoding='utf-8')
        manejador_archivo.setFormatter(
            logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        )
        raiz.addHandler(manejador_archivo)

    raiz.setLevel((nivel or "INFO").upper())


# =========================================================================
# SECCIONES DEL ARCHIVO DE EXPERIMENTO
# =========================================================================

class _Seccion(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SeccionModelo(_Seccion):
    """Parámetros de la mezcla de registros (o calibrar desde las anclas)"""
    mu_g: float = MODELO_REFERENCIA.mu_g
    mu_e: float = MODELO_REFERENCIA.mu_e
    sigma_env: float = Field(default=MODELO_REFERENCIA.sigma_env, gt=0)
    w_decay: float = Field(default=MODELO_REFERENCIA.w_decay, ge=0, lt=1)
    w_therm: float = Field(default=MODELO_REFERENCIA.w_therm, ge=0, lt=1)
    calibrar_desde_anclas: bool = False

    def construir(self) -> ModeloLectura:
        try:
            return ModeloLectura(self.mu_g, self.mu_e, self.sigma_env, self.w_decay, self.w_therm)
        except ValueError as e:
            raise ErrorConfiguracion(f"Modelo de lectura inválido: {e}") from e


class SeccionAncla(_Seccion):
    lambda_c: float
    alfa0: Optional[float] = None
    alfa1: Optional[float] = None
    peso: float = Field(default=1.0, gt=0)


class SeccionCalibracion(_Seccion):
    anclas: List[SeccionAncla] = Field(default_factory=lambda: [
        SeccionAncla(lambda_c=0.11, alfa0=1.178, alfa1=0.764),
        SeccionAncla(lambda_c=-0.5828, alfa0=1.0),
    ])
    fijos: Dict[str, float] = Field(default_factory=lambda: {
        'sigma_env': SIGMA_REFERENCIA,
        'separacion': SEPARACION_NORMALIZADA,
    })
    techo_residuo: float = Field(default=1e-3, gt=0)

    @field_validator('fijos')
    @classmethod
    def _validar_fijos(cls, fijos: Dict[str, float]) -> Dict[str, float]:
        desconocidos = sorted(set(fijos) - set(PARAMETROS_MODELO) - {'separacion'})
        if desconocidos:
            raise ValueError(
                f"parámetros fijos desconocidos {desconocidos}; "
                f"válidos: {list(PARAMETROS_MODELO) + ['separacion']}"
            )
        if {'mu_g', 'mu_e', 'separacion'} <= set(fijos):
            raise ValueError("no se puede fijar mu_g, mu_e y separacion a la vez")
        return fijos

    def construir_anclas(self) -> AnclasCalibracion:
        try:
            return AnclasCalibracion(tuple(
                AnclaCalibracion(a.lambda_c, a.alfa0, a.alfa1, a.peso) for a in self.anclas
            ))
        except ValueError as e:
            raise ErrorConfiguracion(f"Anclas inválidas: {e}") from e


class SeccionBarrido(_Seccion):
    lambda_min: float = -1.5
    lambda_max: float = 1.5
    puntos: int = Field(default=601, ge=2)

    @model_validator(mode='after')
    def _validar_intervalo(self):
        if not self.lambda_min < self.lambda_max:
            raise ValueError("barrido.lambda_min debe ser menor que barrido.lambda_max")
        return self

    def construir(self) -> MallaBarrido:
        return MallaBarrido(self.lambda_min, self.lambda_max, self.puntos)


class SeccionProtocolo(_Seccion):
    n_total: int = 300000
    n_pre: int = N_PRE_REFERENCIA
    lambda_c: float = LAMBDA_C_REFERENCIA
    contabilidad: Literal['incluir_pre', 'excluir_pre'] = 'excluir_pre'
    modo_disparo: Literal['binomial', 'registros'] = 'binomial'
    usar_proyectado: bool = False
    compensar_pureza: bool = False

    def construir(self, n_total: Optional[int] = None) -> ConfiguracionProtocolo:
        return ConfiguracionProtocolo(
            n_total=self.n_total if n_total is None else n_total,
            n_pre=self.n_pre,
            lambda_c=self.lambda_c,
            contabilidad=Contabilidad(self.contabilidad),
            modo_disparo=self.modo_disparo,
            usar_proyectado=self.usar_proyectado
        )


class SeccionImperfeccion(_Seccion):
    """
    Si se indica pureza (Tr ρ²) la escala de longitud es √(2P − 1); si no,
    se usa escala_pureza directamente.
    """
    habilitado: bool = False
    pureza: Optional[float] = Field(default=None, gt=0.5, le=1.0)
    escala_pureza: float = Field(default=1.0, gt=0, le=1.0)
    error_elevacion_grados: float = 0.0
    error_azimut_grados: float = 0.0
    signos_aleatorios: bool = False

    def construir(self) -> ModeloImperfeccion:
        if not self.habilitado:
            return ModeloImperfeccion.ideal()
        if self.pureza is not None:
            return ModeloImperfeccion.desde_pureza(
                self.pureza,
                self.error_elevacion_grados,
                self.error_azimut_grados,
                self.signos_aleatorios
            )
        return ModeloImperfeccion(
            escala_pureza=self.escala_pureza,
            error_elevacion=float(np.deg2rad(self.error_elevacion_grados)),
            error_azimut=float(np.deg2rad(self.error_azimut_grados)),
            habilitado=True,
            signos_aleatorios=self.signos_aleatorios
        )


class SeccionEstado(_Seccion):
    """Estado inicial: preset ('mejor', 'peor', 'centro') o ángulos (θ, φ)"""
    preset: Optional[Literal['mejor', 'peor', 'centro']] = 'peor'
    theta: Optional[float] = None
    phi: Optional[float] = None

    @model_validator(mode='before')
    @classmethod
    def _angulos_sin_preset(cls, datos: Any) -> Any:
        # con ángulos explícitos el preset por defecto no aplica
        if isinstance(datos, dict) and ('theta' in datos or 'phi' in datos) and 'preset' not in datos:
            return {**datos, 'preset': None}
        return datos

    @model_validator(mode='after')
    def _validar_eleccion(self):
        angulos = (self.theta is not None, self.phi is not None)
        if self.preset is None and not all(angulos):
            raise ValueError("estado requiere preset o ambos ángulos theta y phi")
        if self.preset is not None and any(angulos):
            raise ValueError("estado: usar preset o ángulos, no ambos")
        return self

    def resolver(self, a: ParAlfa) -> VectorBloch:
        if self.preset == 'centro':
            return VectorBloch(0.0, 0.0, 0.0)
        if self.preset is not None:
            mejor, peor = bloch_extremos(a)
            return mejor if self.preset == 'mejor' else peor
        try:
            return estado_a_bloch(EstadoQubit(self.theta, self.phi))
        except ValueError as e:
            raise ErrorConfiguracion(f"Estado inicial inválido: {e}") from e


class SeccionEscalado(_Seccion):
    """Presupuestos N de la etapa final (divisibles entre 3)"""
    valores_n: List[int] = Field(default_factory=lambda: [3000, 9999, 30000, 99999, 300000])

    @model_validator(mode='after')
    def _validar_no_vacio(self):
        if not self.valores_n:
            raise ValueError("escalado.valores_n no puede estar vacío")
        return self


class SeccionComparacion(_Seccion):
    """Imperfección usada por 'comparar' cuando imperfeccion no está habilitada"""
    pureza: float = Field(default=PUREZA_REFERENCIA, gt=0.5, le=1.0)
    error_elevacion_grados: float = ERROR_ELEVACION_GRADOS
    error_azimut_grados: float = ERROR_AZIMUT_GRADOS


class ConfiguracionExperimento(_Seccion):
    """Configuración completa de un experimento reproducible"""
    nombre: str = "aqst"
    semilla: int = Field(default=20240917, ge=0, lt=2**64)
    ensayos: int = Field(default=1000, ge=1)
    salida: Optional[str] = None

    modelo: SeccionModelo = Field(default_factory=SeccionModelo)
    calibracion: SeccionCalibracion = Field(default_factory=SeccionCalibracion)
    barrido: SeccionBarrido = Field(default_factory=SeccionBarrido)
    protocolo: SeccionProtocolo = Field(default_factory=SeccionProtocolo)
    imperfeccion: SeccionImperfeccion = Field(default_factory=SeccionImperfeccion)
    estado: SeccionEstado = Field(default_factory=SeccionEstado)
    escalado: SeccionEscalado = Field(default_factory=SeccionEscalado)
    comparacion: SeccionComparacion = Field(default_factory=SeccionComparacion)

    def validar_presupuestos(self):
        """Lanza PresupuestoInvalido antes de cualquier cálculo"""
        self.protocolo.construir()
        for n in self.escalado.valores_n:
            validar_presupuesto(n)
            self.protocolo.construir(n_total=n + self.protocolo.n_pre)

    def como_plano(self) -> Dict[str, Any]:
        return aplanar(self.model_dump(mode='json'))


# =========================================================================
# CLAVES PLANAS CON PUNTO
# =========================================================================

def aplanar(datos: Dict[str, Any], prefijo: str = "") -> Dict[str, Any]:
    """{'modelo': {'mu_g': -1}} → {'modelo.mu_g': -1}; las listas son hojas"""
    plano: Dict[str, Any] = {}
    for clave, valor in datos.items():
        completa = f"{prefijo}{clave}"
        if isinstance(valor, dict) and valor:
            plano.update(aplanar(valor, f"{completa}."))
        else:
            plano[completa] = valor
    return plano


def desaplanar(plano: Dict[str, Any]) -> Dict[str, Any]:
    """Inversa de aplanar; acepta también secciones ya anidadas"""
    anidado: Dict[str, Any] = {}
    for clave, valor in plano.items():
        partes = str(clave).split('.')
        actual = anidado
        for parte in partes[:-1]:
            siguiente = actual.setdefault(parte, {})
            if not isinstance(siguiente, dict):
                raise ErrorConfiguracion(f"Clave en conflicto: {clave!r}", clave=clave)
            actual = siguiente
        hoja = partes[-1]
        if hoja in actual and isinstance(actual[hoja], dict) and isinstance(valor, dict):
            actual[hoja].update(valor)
        elif hoja in actual:
            raise ErrorConfiguracion(f"Clave repetida: {clave!r}", clave=clave)
        else:
            actual[hoja] = valor
    return anidado


def validar_configuracion(datos: Dict[str, Any]) -> ConfiguracionExperimento:
    """Valida un mapeo (plano o anidado) y sus presupuestos"""
    try:
        cfg = ConfiguracionExperimento.model_validate(desaplanar(datos))
    except ValidationError as e:
        errores = [
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        ]
        raise ErrorConfiguracion(
            "Configuración inválida: " + "; ".join(errores),
            errores=errores
        ) from e
    cfg.validar_presupuestos()
    return cfg


def cargar_configuracion(
    ruta: Optional[Union[str, Path]] = None,
    **sobrescrituras
) -> ConfiguracionExperimento:
    """
    Lee un archivo YAML de experimento

    Args:
        ruta: Archivo YAML (None usa solo valores por defecto)
        **sobrescrituras: Claves planas que reemplazan las del archivo
            (valores None se ignoran), p. ej. semilla=7, ensayos=100

    Raises:
        ErrorConfiguracion: archivo ilegible, claves desconocidas o valores
            fuera de rango
    """
    datos: Dict[str, Any] = {}
    if ruta is not None:
        ruta = Path(ruta)
        try:
            with open(ruta, 'r', encoding='utf-8') as f:
                datos = yaml.safe_load(f) or {}
        except OSError as e:
            raise ErrorConfiguracion(f"No se pudo leer la configuración {ruta}: {e}") from e
        except yaml.YAMLError as e:
            raise ErrorConfiguracion(f"YAML inválido en {ruta}: {e}") from e
        if not isinstance(datos, dict):
            raise ErrorConfiguracion(f"La configuración {ruta} debe ser un mapeo de claves")

    plano = aplanar(desaplanar(datos))
    plano.update({k: v for k, v in sobrescrituras.items() if v is not None})

    cfg = validar_configuracion(plano)
    logger.debug(f"Configuración cargada: {cfg.nombre} (semilla {cfg.semilla})")
    return cfg


def volcar_configuracion(cfg: ConfiguracionExperimento, ruta: Union[str, Path]):
    """Escribe la configuración como YAML plano"""
    ruta = Path(ruta)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    with open(ruta, 'w', encoding='utf-8') as f:
        yaml.safe_dump(cfg.como_plano(), f, sort_keys=False, allow_unicode=True)
