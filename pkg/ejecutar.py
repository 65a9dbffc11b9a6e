# -*- coding: utf-8 -*-
"""
Simulador de Tomografía Adaptativa (AQST)

EJECUTAR.PY - Punto de entrada de línea de comandos

Comandos:
- calibrar:   ajusta el modelo de lectura a las anclas
- barrido:    curvas α, varianzas extremas y reducción frente a λ_c
- escalado:   N·E[Δ²] frente a N para cada brazo
- comparar:   reducción AQST vs estándar (ideal e imperfecta)
- individual: traza completa de un ensayo AQST

Códigos de salida: 0 éxito, 2 configuración, 3 calibración, 4 numérico

Ejecutar con: python ejecutar.py barrido --config datos/configuracion/experimento.yaml
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from nucleo import __version__
from nucleo.configuracion import AjustesSistema, cargar_configuracion, configurar_logging
from nucleo.errores import ErrorAQST
from nucleo.experimentos import OrquestadorExperimentos
from nucleo.exportador_resultados import escribir_csv, exportar_mat

logger = logging.getLogger(__name__)

# comando -> alias en inglés
COMANDOS = {
    'calibrar': 'calibrate',
    'barrido': 'sweep',
    'escalado': 'scaling',
    'comparar': 'compare',
    'individual': 'single',
}


def construir_parser(ajustes: AjustesSistema) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ejecutar.py',
        description=f'{ajustes.APP_NAME}: simulación Monte Carlo de tomografía con lectura débil'
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s v{__version__}')

    comunes = argparse.ArgumentParser(add_help=False)
    comunes.add_argument('--config', type=Path, help='Archivo YAML de experimento')
    comunes.add_argument('--seed', type=int, dest='semilla', help='Semilla maestra (u64)')
    comunes.add_argument('--out', type=Path, dest='salida', help='Archivo CSV de salida (por defecto stdout)')
    comunes.add_argument('--threads', type=int, dest='hilos', help='Procesos de trabajo')
    comunes.add_argument('--trials', type=int, dest='ensayos', help='Número de ensayos')
    comunes.add_argument('--mat', type=Path, help='Exportar también a MATLAB (.mat)')

    subparsers = parser.add_subparsers(dest='comando', required=True)
    for comando, alias in COMANDOS.items():
        sub = subparsers.add_parser(comando, aliases=[alias], parents=[comunes])
        sub.set_defaults(comando=comando)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    ajustes = AjustesSistema()
    args = construir_parser(ajustes).parse_args(argv)
    configurar_logging(ajustes.LOG_LEVEL, ajustes.LOG_FILE)

    try:
        cfg = cargar_configuracion(
            args.config,
            semilla=args.semilla,
            ensayos=args.ensayos,
            salida=str(args.salida) if args.salida else None
        )
        orquestador = OrquestadorExperimentos(cfg, hilos=ajustes.hilos_efectivos(args.hilos))
        tabla = orquestador.ejecutar(args.comando)
    except ErrorAQST as e:
        logger.error(f"[{e.codigo}] {e.mensaje}")
        return e.codigo_salida

    if cfg.salida:
        escribir_csv(tabla, cfg.salida)
    else:
        escribir_csv(tabla, sys.stdout)
    if args.mat:
        exportar_mat(tabla, args.mat)
    return 0


if __name__ == "__main__":
    sys.exit(main())
