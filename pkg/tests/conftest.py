"""
Fixtures compartidas: sólidos de prueba construidos con trimesh
"""

import numpy as np
import pytest
import trimesh

from modules.kernels import KnotSet3, KnotSet4
from modules.solids import Solid, UniformGrid


@pytest.fixture
def sphere_mesh():
    return trimesh.creation.icosphere(subdivisions=3, radius=0.9)


@pytest.fixture
def sphere(sphere_mesh):
    return Solid(sphere_mesh.vertices, sphere_mesh.faces, 1.0)


@pytest.fixture
def cube_mesh():
    return trimesh.creation.box(extents=(1.2, 1.2, 1.2))


@pytest.fixture
def cube(cube_mesh):
    return Solid(cube_mesh.vertices, cube_mesh.faces, 1.0)


@pytest.fixture
def sphere_obj(tmp_path, sphere_mesh):
    path = tmp_path / "sphere.obj"
    sphere_mesh.export(str(path))
    return path


@pytest.fixture
def cube_stl(tmp_path, cube_mesh):
    path = tmp_path / "cube.stl"
    cube_mesh.export(str(path), file_type="stl_ascii")
    return path


@pytest.fixture
def grid16():
    return UniformGrid(1.0, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_knots3(rng):
    """Dos conjuntos equirradio pequeños cerca del origen"""
    k1 = KnotSet3(rng.uniform(-0.1, 0.1, size=(3, 3)), 0.25)
    k2 = KnotSet3(rng.uniform(-0.1, 0.1, size=(2, 3)), 0.25)
    return k1, k2


@pytest.fixture
def small_knots4(rng):
    """Dos conjuntos no equirradio con altura de recorte 0.5"""
    k1 = KnotSet4(rng.uniform(-0.1, 0.1, size=(3, 3)), [0.2, 0.15, 0.25], None, 0.5)
    k2 = KnotSet4(rng.uniform(-0.1, 0.1, size=(2, 3)), [0.2, 0.1], None, 0.5)
    return k1, k2
