"""Pruebas del exportador CSV con encabezado de procedencia"""

import io

import numpy as np
import pytest
from scipy.io import loadmat

from nucleo.configuracion import CONFIG_DIR, cargar_configuracion
from nucleo.exportador_resultados import (
    VERSION,
    TablaResultados,
    encabezado_procedencia,
    escribir_csv,
    tabla_a_texto,
    leer_csv,
    configuracion_desde_encabezado,
    exportar_mat,
)


@pytest.fixture
def tabla():
    cfg = cargar_configuracion(CONFIG_DIR / "anclas_referencia.yaml", semilla=11)
    t = TablaResultados(
        columnas=['marca', 'lambda_c', 'reduccion', 'degenerada'],
        encabezado=encabezado_procedencia(cfg, 'barrido')
    )
    t.agregar(['malla', 0.1, 0.3374, False])
    t.agregar({'marca': 'optimo', 'lambda_c': 0.1100000001, 'reduccion': 1 / 3, 'degenerada': True})
    return t


class TestTabla:

    def test_filas_rectangulares(self, tabla):
        with pytest.raises(ValueError):
            tabla.agregar(['malla', 0.2])
        with pytest.raises(ValueError):
            tabla.agregar({'marca': 'malla'})
        assert len(tabla) == 2
        assert tabla.columna('marca') == ['malla', 'optimo']


class TestCsv:

    def test_encabezado_reconstruye_configuracion(self, tabla):
        leida = leer_csv(io.StringIO(tabla_a_texto(tabla)))
        meta, cfg = configuracion_desde_encabezado(leida.encabezado)
        assert meta == {'version': VERSION, 'comando': 'barrido'}
        esperado = cargar_configuracion(CONFIG_DIR / "anclas_referencia.yaml", semilla=11)
        assert cfg == esperado

    def test_sin_marcas_de_tiempo(self, tabla):
        claves = set(tabla.encabezado)
        assert {'version', 'comando'} <= claves
        assert not any('fecha' in c or 'hora' in c or 'hilos' in c for c in claves)

    def test_formato_de_celdas(self, tabla):
        texto = tabla_a_texto(tabla)
        lineas = [l for l in texto.splitlines() if not l.startswith('#')]
        assert lineas[0] == 'marca,lambda_c,reduccion,degenerada'
        assert lineas[1] == 'malla,0.1,0.3374,0'
        assert lineas[2] == f'optimo,0.1100000001,{1 / 3!r},1'
        assert float(lineas[2].split(',')[2]) == 1 / 3

    def test_lineas_de_encabezado(self, tabla):
        texto = tabla_a_texto(tabla)
        assert texto.startswith(f"# version: {VERSION}\n# comando: barrido\n")
        assert "# semilla: 11\n" in texto

    def test_archivo(self, tabla, tmp_path):
        ruta = tmp_path / "salida" / "barrido.csv"
        escribir_csv(tabla, ruta)
        leida = leer_csv(ruta)
        assert leida.columnas == tabla.columnas
        assert leida.filas[0] == ['malla', '0.1', '0.3374', '0']
        assert leida.encabezado == tabla.encabezado

    def test_csv_vacio(self):
        with pytest.raises(ValueError):
            leer_csv(io.StringIO("# version: v1.0.0\n"))


def test_exportar_mat(tabla, tmp_path):
    ruta = tmp_path / "barrido.mat"
    exportar_mat(tabla, ruta)
    datos = loadmat(ruta)
    assert np.allclose(np.ravel(datos['reduccion']), [0.3374, 1 / 3])
    assert np.array_equal(np.ravel(datos['degenerada']), [0.0, 1.0])
    assert 'comando: barrido' in datos['procedencia'][0]
