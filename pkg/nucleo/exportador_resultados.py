"""
Exportador de Resultados

Tablas de resultados en CSV con un encabezado de procedencia ('# clave: valor')
que contiene la versión, el comando y la configuración completa en claves
planas. El encabezado es YAML válido una vez quitado el prefijo '# ', de modo
que se puede reconstruir la configuración que produjo el archivo.

Opcionalmente exporta la misma tabla a formato MATLAB (.mat).
"""

import numpy as np
from scipy.io import savemat
import csv
import io
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple, Union
from dataclasses import dataclass, field
import logging

import yaml

from . import __version__
from .configuracion import ConfiguracionExperimento, validar_configuracion

logger = logging.getLogger(__name__)

VERSION = f"v{__version__}"

PREFIJO_ENCABEZADO = "# "

# Claves del encabezado que no son parte de la configuración
CLAVES_META = ('version', 'comando')


@dataclass
class TablaResultados:
    """Filas rectangulares de columnas con nombre y su procedencia"""
    columnas: List[str]
    filas: List[List[Any]] = field(default_factory=list)
    encabezado: Dict[str, Any] = field(default_factory=dict)

    def agregar(self, fila: Union[Sequence[Any], Dict[str, Any]]):
        if isinstance(fila, dict):
            faltantes = set(self.columnas) - set(fila)
            if faltantes:
                raise ValueError(f"Faltan columnas en la fila: {sorted(faltantes)}")
            fila = [fila[c] for c in self.columnas]
        fila = list(fila)
        if len(fila) != len(self.columnas):
            raise ValueError(
                f"La fila tiene {len(fila)} valores, se esperaban {len(self.columnas)}"
            )
        self.filas.append(fila)

    def columna(self, nombre: str) -> List[Any]:
        i = self.columnas.index(nombre)
        return [f[i] for f in self.filas]

    def __len__(self) -> int:
        return len(self.filas)


def encabezado_procedencia(cfg: ConfiguracionExperimento, comando: str) -> Dict[str, Any]:
    """Versión, comando y configuración plana (sin fecha ni número de hilos)"""
    return {'version': VERSION, 'comando': comando, **cfg.como_plano()}


def _valor_celda(valor: Any) -> Any:
    if isinstance(valor, (bool, np.bool_)):
        return int(valor)
    if isinstance(valor, (np.floating, float)):
        return repr(float(valor))
    if isinstance(valor, np.integer):
        return int(valor)
    return valor


def _linea_encabezado(clave: str, valor: Any) -> str:
    texto = yaml.safe_dump(
        {clave: valor},
        default_flow_style=True,
        sort_keys=False,
        allow_unicode=True,
        width=float('inf')
    ).strip()
    # safe_dump en flujo produce '{clave: valor}'
    return PREFIJO_ENCABEZADO + texto[1:-1]


def escribir_csv(tabla: TablaResultados, destino: Union[str, Path, TextIO]):
    """
    Escribe la tabla en CSV

    Args:
        tabla: Tabla a escribir
        destino: Ruta o flujo de texto abierto
    """
    if isinstance(destino, (str, Path)):
        ruta = Path(destino)
        ruta.parent.mkdir(parents=True, exist_ok=True)
        with open(ruta, 'w', newline='', encoding='utf-8') as f:
            escribir_csv(tabla, f)
        logger.info(f"CSV exportado: {ruta} ({len(tabla)} filas)")
        return

    for clave, valor in tabla.encabezado.items():
        destino.write(_linea_encabezado(clave, valor) + "\n")
    writer = csv.writer(destino, lineterminator="\n")
    writer.writerow(tabla.columnas)
    for fila in tabla.filas:
        writer.writerow([_valor_celda(v) for v in fila])


def tabla_a_texto(tabla: TablaResultados) -> str:
    buffer = io.StringIO()
    escribir_csv(tabla, buffer)
    return buffer.getvalue()


def leer_csv(origen: Union[str, Path, TextIO]) -> TablaResultados:
    """Lee un CSV escrito por escribir_csv (las celdas quedan como texto)"""
    if isinstance(origen, (str, Path)):
        with open(origen, 'r', newline='', encoding='utf-8') as f:
            return leer_csv(f)

    lineas = origen.read().splitlines()
    comentarios = [l for l in lineas if l.startswith('#')]
    datos = [l for l in lineas if not l.startswith('#')]

    encabezado = yaml.safe_load(
        "\n".join(l[len(PREFIJO_ENCABEZADO):] for l in comentarios)
    ) or {}
    filas = list(csv.reader(datos))
    if not filas:
        raise ValueError("CSV sin fila de columnas")
    return TablaResultados(columnas=filas[0], filas=filas[1:], encabezado=encabezado)


def configuracion_desde_encabezado(
    encabezado: Dict[str, Any]
) -> Tuple[Dict[str, Any], ConfiguracionExperimento]:
    """Separa metadatos y reconstruye la configuración validada"""
    meta = {k: encabezado[k] for k in CLAVES_META if k in encabezado}
    plano = {k: v for k, v in encabezado.items() if k not in CLAVES_META}
    return meta, validar_configuracion(plano)


def exportar_mat(tabla: TablaResultados, ruta: Union[str, Path]):
    """Exporta columnas a MATLAB; las columnas de texto quedan como celdas"""
    ruta = Path(ruta)
    ruta.parent.mkdir(parents=True, exist_ok=True)

    datos_mat: Dict[str, Any] = {}
    for nombre in tabla.columnas:
        valores = tabla.columna(nombre)
        if all(isinstance(v, (int, float, bool, np.number, np.bool_)) for v in valores):
            datos_mat[nombre] = np.asarray(valores, dtype=float)
        else:
            datos_mat[nombre] = np.asarray([str(v) for v in valores], dtype=object)

    datos_mat['procedencia'] = "\n".join(
        _linea_encabezado(k, v) for k, v in tabla.encabezado.items()
    )
    savemat(ruta, datos_mat)
    logger.info(f"MATLAB exportado: {ruta}")
