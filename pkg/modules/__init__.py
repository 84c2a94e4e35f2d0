"""
Paquete de módulos para SphereConv
"""

__version__ = "1.0.0"
__author__ = "SphereConv"
