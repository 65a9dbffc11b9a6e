"""
Núcleo del Simulador de Tomografía Adaptativa (AQST)

Este paquete contiene los módulos principales del sistema:
- geometria_bloch: Mapas Bloch ↔ probabilidad, varianza analítica, estados extremos
- modelo_lectura: Mezcla gaussiana de registros λ_D, curvas α y calibración
- tomografia: Simulación de disparos, inversión directa y métricas de error
- adaptativo: Protocolo de dos etapas con retroalimentación imperfecta
- optimizacion_criterio: Barrido de λ_c, cruce α0 = 1 y λ_c óptimo
- experimentos: Orquestación reproducible de los comandos
"""

__version__ = "1.0.0"
__author__ = "Simulador de Tomografía Adaptativa"
