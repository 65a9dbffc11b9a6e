"""Fixtures compartidas de las pruebas"""

import logging
from typing import List

import numpy as np
import pytest

from nucleo.geometria_bloch import ParAlfa
from nucleo.modelo_lectura import ModeloLectura, MODELO_REFERENCIA, SIGMA_REFERENCIA


@pytest.fixture
def modelo_referencia() -> ModeloLectura:
    return MODELO_REFERENCIA


@pytest.fixture
def alfa_referencia() -> ParAlfa:
    """α(0.11) medido"""
    return ParAlfa(1.178, 0.764)


@pytest.fixture
def modelo_simetrico() -> ModeloLectura:
    """Sin contaminación; punto medio en λ = 0"""
    return ModeloLectura(mu_g=-1.0, mu_e=1.0, sigma_env=SIGMA_REFERENCIA)


@pytest.fixture
def modelo_perfecto() -> ModeloLectura:
    """Con λ_c = 0 da P_{g→0} = 1 y P_{e→0} = 0"""
    return ModeloLectura(mu_g=-1.0, mu_e=1.0, sigma_env=1e-3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def vectores_unitarios(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def pares_alfa_aleatorios(
    rng: np.random.Generator,
    n: int,
    separacion_uno: float = 0.0,
    contraste_minimo: float = 1e-6
) -> List[ParAlfa]:
    """Pares válidos con |α0 − 1| > separacion_uno, |α1| log-uniforme y signo alternado"""
    pares: List[ParAlfa] = []
    while len(pares) < n:
        a0 = rng.uniform(0.1, 1.9)
        if abs(a0 - 1.0) <= separacion_uno:
            continue
        limite = min(a0, 2.0 - a0)
        a1 = float(np.exp(rng.uniform(np.log(contraste_minimo), np.log(limite))))
        pares.append(ParAlfa(a0, a1 if len(pares) % 2 else -a1))
    return pares


@pytest.fixture(autouse=True)
def logging_restaurado():
    """configurar_logging reemplaza los manejadores del logger raíz"""
    raiz = logging.getLogger()
    manejadores, nivel = list(raiz.handlers), raiz.level
    yield
    for handler in list(raiz.handlers):
        if handler not in manejadores:
            raiz.removeHandler(handler)
            handler.close()
    for handler in manejadores:
        if handler not in raiz.handlers:
            raiz.addHandler(handler)
    raiz.setLevel(nivel)
