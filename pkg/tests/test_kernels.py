import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from modules.errors import FormatError, GridMismatchError, MeshIOError, ValidationError
from modules.kernels import (
    KnotSet3,
    KnotSet4,
    MollifierParams,
    ball_bump,
    cone_bump,
    inner_product,
    mollifier,
    rasterize_balls,
    rasterize_bumps3,
    rasterize_bumps4,
    read_knots,
    slice_field4,
    sublevel_extract,
    union_membership,
    volume_functional,
    write_knots,
)
from modules.solids import ScalarField, UniformGrid


class TestMollifier:
    def test_values(self):
        assert mollifier(0.0) == 1.0
        assert mollifier(0.5) == pytest.approx(math.exp(-1.0 / 3.0))
        assert mollifier(1.0) == 0.0
        assert mollifier(-1.5) == 0.0

    def test_even_and_vectorized(self):
        x = np.linspace(-0.99, 0.99, 11)
        np.testing.assert_allclose(mollifier(x), mollifier(-x))
        assert np.all(mollifier(x) > 0)

    def test_sharp_is_indicator(self):
        sharp = MollifierParams(math.inf)
        np.testing.assert_array_equal(mollifier(np.array([0.0, 0.99, 1.0, 2.0]), sharp),
                                      [1.0, 1.0, 0.0, 0.0])

    def test_invalid_alpha(self):
        with pytest.raises(ValidationError):
            MollifierParams(0.0)

    def test_ball_bump(self):
        assert ball_bump([0.1, 0.0, 0.0], [0.1, 0.0, 0.0], 0.3) == 1.0
        assert ball_bump([0.25, 0.0, 0.0], [0.0, 0.0, 0.0], 0.5) == pytest.approx(math.exp(-1.0 / 3.0))
        with pytest.raises(ValidationError):
            ball_bump([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0.0)

    def test_bumps_are_radial(self, rng):
        center = np.array([0.1, -0.2, 0.05])
        x = center + rng.uniform(-0.3, 0.3, size=(50, 3))
        apex = np.array([0.1, -0.2, 0.05, 0.3])
        a = np.column_stack([x, rng.uniform(-0.2, 0.3, size=50)])
        for R in Rotation.random(5, random_state=1).as_matrix():
            turned = center + (x - center) @ R.T
            np.testing.assert_allclose(ball_bump(turned, center, 0.4), ball_bump(x, center, 0.4),
                                       atol=1e-12)
            turned4 = np.column_stack([turned, a[:, 3]])
            np.testing.assert_allclose(cone_bump(turned4, apex, 0.6), cone_bump(a, apex, 0.6),
                                       atol=1e-12)


class TestCone:
    def test_profile_along_axis(self):
        L = 0.8
        apex = [0.0, 0.0, 0.0, 0.0]
        assert cone_bump([0.0, 0.0, 0.0, -L / 2], apex, L) == pytest.approx(1.0)
        assert cone_bump([0.0, 0.0, 0.0, -L / 4], apex, L) == pytest.approx(math.exp(-1.0 / 3.0))
        assert cone_bump([0.0, 0.0, 0.0, 0.0], apex, L) == 0.0
        assert cone_bump([0.0, 0.0, 0.0, -L], apex, L) == 0.0
        assert cone_bump([0.0, 0.0, 0.0, 0.1], apex, L) == 0.0

    def test_support_is_a_cone(self):
        apex = [0.1, 0.0, 0.0, 0.3]
        # Nivel r' = −0.2: sección de radio 0.2
        assert cone_bump([0.25, 0.0, 0.0, 0.1], apex, 1.0) > 0
        assert cone_bump([0.31, 0.0, 0.0, 0.1], apex, 1.0) == 0.0


class TestKnotSets:
    def test_knotset3_radii(self):
        k = KnotSet3(np.zeros((2, 3)), 0.3)
        np.testing.assert_array_equal(k.radii, [0.3, 0.3])
        np.testing.assert_array_equal(k.weights, [1.0, 1.0])

    def test_knotset4_radius_bound(self):
        with pytest.raises(ValidationError):
            KnotSet4(np.zeros((1, 3)), [0.5], None, 0.5)
        with pytest.raises(ValidationError):
            KnotSet4(np.zeros((1, 3)), [-0.1], None, 0.5)

    def test_mirror_flips_radius_sign(self):
        k = KnotSet4(np.zeros((1, 3)), [0.2], None, 0.5, mirrored=True)
        np.testing.assert_allclose(k.knots(), [[0.0, 0.0, 0.0, -0.2]])

    def test_nonpositive_weight(self):
        with pytest.raises(ValidationError):
            KnotSet3(np.zeros((1, 3)), 0.2, [0.0])


class TestRasterize:
    def test_single_ball_support(self, grid16):
        f = rasterize_balls(np.zeros((1, 3)), [0.5], [1.0], grid16)
        bits = sublevel_extract(f)
        i = np.arange(-8, 8)
        norms = i[:, None, None] ** 2 + i[None, :, None] ** 2 + i[None, None, :] ** 2
        assert bits.count() == int(np.count_nonzero(norms < 16))

    def test_weights_scale(self, grid16):
        k = KnotSet3(np.zeros((1, 3)), 0.4)
        heavy = KnotSet3(np.zeros((1, 3)), 0.4, [3.0])
        np.testing.assert_allclose(rasterize_bumps3(heavy, grid16).values,
                                   3.0 * rasterize_bumps3(k, grid16).values)

    def test_sharp_volume_counts_nodes(self, grid16):
        sharp = MollifierParams(math.inf)
        f = rasterize_balls(np.zeros((1, 3)), [0.5], [1.0], grid16, sharp)
        count = sublevel_extract(f).count()
        assert volume_functional(f) == pytest.approx(count * grid16.cell_volume)

    def test_cone_apex_slice(self):
        g = UniformGrid(1.0, 8, 4)
        k = KnotSet4(np.zeros((1, 3)), [0.25], None, 0.5)
        f = rasterize_bumps4(k, g)
        # Nivel r = 0: a 0.25 bajo el ápice, mitad del cono
        section = slice_field4(f)
        assert section.grid.dim == 3
        assert section.values[4, 4, 4] == pytest.approx(1.0)

    def test_cone_field_matches_pointwise_bump(self):
        g = UniformGrid(1.0, 8, 4)
        k = KnotSet4([[0.0, 0.0, 0.0], [0.25, -0.25, 0.0]], [0.2, 0.125], None, 0.5)
        f = rasterize_bumps4(k, g)
        nodes = np.stack(g.mesh(), axis=-1)
        expected = sum(cone_bump(nodes, apex, k.L) for apex in k.knots())
        assert f.values.shape == g.shape
        np.testing.assert_allclose(f.values, expected, atol=1e-12)

    def test_mirror_reflects_levels(self):
        g = UniformGrid(1.0, 8, 4)
        centers = np.array([[0.0, 0.0, 0.0], [0.25, 0.0, 0.0]])
        direct = rasterize_bumps4(KnotSet4(centers, [0.25, 0.125], None, 0.5), g).values
        mirrored = rasterize_bumps4(KnotSet4(centers, [0.25, 0.125], None, 0.5, mirrored=True), g).values
        for k in range(1, 8):
            np.testing.assert_allclose(mirrored[..., k], direct[..., 8 - k], atol=1e-12)

    def test_wrong_dimension(self, grid16):
        with pytest.raises(ValidationError):
            rasterize_bumps4(KnotSet4(np.zeros((1, 3)), [0.1], None, 0.5), grid16)


class TestFunctionals:
    def test_inner_product(self, grid16):
        ones = ScalarField(grid16, np.ones(grid16.shape))
        twos = ScalarField(grid16, 2.0 * np.ones(grid16.shape))
        assert inner_product(ones, twos) == pytest.approx(2.0 * 8.0)

    def test_inner_product_is_volume_of_product(self, grid16):
        f1 = rasterize_balls(np.array([[0.1, 0.0, 0.0]]), [0.4], [1.0], grid16)
        f2 = rasterize_balls(np.array([[-0.2, 0.1, 0.0]]), [0.35], [2.0], grid16)
        product = volume_functional(ScalarField(grid16, f1.values * f2.values))
        assert product > 0
        assert inner_product(f1, f2) == pytest.approx(product, rel=1e-12)

    def test_grid_mismatch(self, grid16):
        a = ScalarField(grid16, np.zeros(grid16.shape))
        b = ScalarField(UniformGrid(1.0, 8), np.zeros((8, 8, 8)))
        with pytest.raises(GridMismatchError):
            inner_product(a, b)

    def test_sublevel_is_strict(self, grid16):
        values = np.zeros(grid16.shape)
        values[0, 0, 0] = 0.5
        values[1, 0, 0] = 1.0
        bits = sublevel_extract(ScalarField(grid16, values), 0.5)
        assert bits.count() == 1
        with pytest.raises(ValidationError):
            sublevel_extract(ScalarField(grid16, values), -1.0)

    def test_union_membership_boundary(self):
        points = np.array([[0.5, 0.0, 0.0], [0.2, 0.0, 0.0], [0.6, 0.0, 0.0]])
        centers = np.zeros((1, 3))
        np.testing.assert_array_equal(union_membership(points, centers, [0.5]), [False, True, False])
        np.testing.assert_array_equal(union_membership(points, centers, [0.5], closed=True),
                                      [True, True, False])


class TestKnotFiles:
    def test_equal_radii_read_as_knotset3(self, tmp_path):
        path = write_knots(tmp_path / "k.csv", KnotSet3(np.eye(3) * 0.1, 0.2, [1.0, 2.0, 3.0]))
        k = read_knots(path)
        assert isinstance(k, KnotSet3)
        assert k.radius == pytest.approx(0.2)
        np.testing.assert_allclose(k.weights, [1.0, 2.0, 3.0])

    def test_mixed_radii_default_trim(self, tmp_path):
        path = write_knots(tmp_path / "k.csv", KnotSet4(np.zeros((2, 3)), [0.1, 0.3], None, 1.0))
        k = read_knots(path)
        assert isinstance(k, KnotSet4)
        assert k.L == pytest.approx(0.6)
        assert read_knots(path, trim=2.0).L == 2.0

    def test_zero_radius_is_reported(self, tmp_path, caplog):
        path = write_knots(tmp_path / "k.csv", KnotSet4(np.eye(3) * 0.1, [0.0, 0.2, 0.3], None, 1.0))
        with caplog.at_level("WARNING", logger="modules.kernels"):
            k = read_knots(path)
        assert isinstance(k, KnotSet4)
        assert k.radii[0] == 0.0
        assert "radio 0" in caplog.text

    def test_forced_knotset4(self, tmp_path):
        path = write_knots(tmp_path / "k.csv", KnotSet3(np.zeros((2, 3)), 0.2))
        assert isinstance(read_knots(path, trim=1.0, kind="4"), KnotSet4)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "k.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(FormatError):
            read_knots(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MeshIOError):
            read_knots(tmp_path / "nada.csv")
