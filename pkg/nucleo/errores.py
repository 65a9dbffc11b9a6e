"""
Errores del Simulador de Tomografía Adaptativa

Cada error lleva un código (estilo ErrorResponse.codigo) y el código de
salida que usa la línea de comandos:
- 2: configuración o validación
- 3: calibración
- 4: fallo numérico
"""


class ErrorAQST(Exception):
    """Error base del sistema"""

    codigo: str = "ERROR_AQST"
    codigo_salida: int = 4

    def __init__(self, mensaje: str, **detalles):
        super().__init__(mensaje)
        self.mensaje = mensaje
        self.detalles = detalles

    def to_dict(self) -> dict:
        """Convierte a diccionario para diagnóstico"""
        return {
            'error': type(self).__name__,
            'codigo': self.codigo,
            'detalle': self.mensaje,
            **self.detalles
        }


# Configuración / validación (salida 2)

class ErrorConfiguracion(ErrorAQST):
    codigo = "CONFIGURACION_INVALIDA"
    codigo_salida = 2


class PresupuestoInvalido(ErrorConfiguracion):
    """Número de disparos no divisible entre 3 o presupuestos incoherentes"""
    codigo = "PRESUPUESTO_INVALIDO"


# Calibración (salida 3)

class CalibracionFallida(ErrorAQST):
    codigo = "CALIBRACION_FALLIDA"
    codigo_salida = 3


class SubRestringido(ErrorAQST):
    """Más parámetros libres que restricciones de anclaje"""
    codigo = "CALIBRACION_SUBRESTRINGIDA"
    codigo_salida = 3


# Numéricos (salida 4)

class CalibracionDegenerada(ErrorAQST):
    """|alfa1| ~ 0: los estados |g> y |e> son indistinguibles"""
    codigo = "CALIBRACION_DEGENERADA"


class GeometriaDegenerada(ErrorAQST):
    """alfa0 = 1: no existe dirección extrema única"""
    codigo = "GEOMETRIA_DEGENERADA"


class EstimacionNula(ErrorAQST):
    """Pre-estimación en el centro de la esfera: dirección indefinida"""
    codigo = "ESTIMACION_NULA"


class EnsayosInsuficientes(ErrorAQST):
    codigo = "ENSAYOS_INSUFICIENTES"


class SinCambioSigno(ErrorAQST):
    """El intervalo no encierra alfa0 = 1"""
    codigo = "SIN_CAMBIO_SIGNO"


class MinimoNoUnico(ErrorAQST):
    codigo = "MINIMO_NO_UNICO"
