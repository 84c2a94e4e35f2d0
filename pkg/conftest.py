"""
Configuración común de pytest
"""


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: pruebas a escala de aceptación (más lentas)")
