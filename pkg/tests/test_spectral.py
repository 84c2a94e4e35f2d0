import numpy as np
import pytest

from modules.correlation import gap_field_spatial
from modules.errors import FormatError, GridMismatchError, ValidationError
from modules.kernels import (
    KnotSet3,
    KnotSet4,
    MollifierParams,
    inner_product,
    rasterize_balls,
    slice_field4,
    volume_functional,
)
from modules.motions import RigidMotion, transform_knots
from modules.solids import ScalarField, UniformGrid
from modules.spectral import (
    BallKernel,
    ConeKernel,
    SpectralField,
    SpectralQuery,
    TruncationSpec,
    dft_direct,
    dft_forward,
    dft_inverse,
    fourier_gap,
    frequency_axis,
    frequency_inner_product,
    hermitian_error,
    kernel_spectrum,
    ndft_knots,
    read_spectral_field,
    reconstruct_truncated,
    retained_indices,
    rotate_spectrum,
    shape_spectrum,
    single_query,
    spectral_slice,
    truncation_order,
    write_spectral_field,
)


def random_field(rng, g, complex_values=False):
    values = rng.normal(size=g.shape)
    if complex_values:
        values = values + 1j * rng.normal(size=g.shape)
    return ScalarField(g, values)


class TestUniformDFT:
    @pytest.mark.parametrize("n", [8, 7])
    def test_fft_matches_definition(self, rng, n):
        f = random_field(rng, UniformGrid(1.0, n))
        np.testing.assert_allclose(dft_forward(f).coefficients, dft_direct(f).coefficients,
                                   atol=1e-10)

    def test_inverse(self, rng):
        f = random_field(rng, UniformGrid(0.5, 6))
        back = dft_inverse(dft_forward(f))
        assert not back.is_complex
        np.testing.assert_allclose(back.values, f.values, atol=1e-12)

    def test_parseval(self, rng):
        g = UniformGrid(1.5, 8)
        f1, f2 = random_field(rng, g), random_field(rng, g)
        spatial = inner_product(f1, f2)
        spectral = frequency_inner_product(dft_forward(f1), dft_forward(f2))
        assert spectral.real == pytest.approx(spatial, rel=1e-10)
        assert abs(spectral.imag) < 1e-10

    def test_shift_is_a_phase(self, rng):
        g = UniformGrid(1.0, 8)
        f = random_field(rng, g)
        shifted = ScalarField(g, np.roll(f.values, 1, axis=0))
        omega = frequency_axis(g.L, g.n)
        phase = np.exp(-2j * np.pi * omega * g.spacing)[:, None, None]
        np.testing.assert_allclose(dft_forward(shifted).coefficients,
                                   dft_forward(f).coefficients * phase, atol=1e-10)

    def test_hermitian_symmetry(self, rng):
        g = UniformGrid(1.0, 8)
        assert hermitian_error(dft_forward(random_field(rng, g))) < 1e-12
        assert hermitian_error(dft_forward(random_field(rng, g, complex_values=True))) > 1e-3

    def test_product_is_padded_linear_convolution(self, rng):
        g = UniformGrid(1.0, 16)
        block = (slice(6, 10),) * 3
        f = np.zeros(g.shape)
        h = np.zeros(g.shape)
        f[block] = rng.normal(size=(4, 4, 4))
        h[block] = rng.normal(size=(4, 4, 4))
        # Los soportes caben en la caja: la convolución no da la vuelta
        expected = np.zeros(g.shape)
        for a in zip(*np.nonzero(f)):
            expected += f[a] * np.roll(h, tuple(int(i) - g.n // 2 for i in a), axis=(0, 1, 2))
        expected *= g.cell_volume
        product = dft_forward(ScalarField(g, f)).coefficients * dft_forward(ScalarField(g, h)).coefficients
        result = dft_inverse(SpectralField(g.L, product)).values
        np.testing.assert_allclose(result, expected, atol=1e-9 * np.abs(expected).max())

    def test_lattice_mismatch(self, rng):
        F1 = dft_forward(random_field(rng, UniformGrid(1.0, 8)))
        F2 = dft_forward(random_field(rng, UniformGrid(2.0, 8)))
        with pytest.raises(GridMismatchError):
            frequency_inner_product(F1, F2)

    def test_non_cubic_lattice(self):
        with pytest.raises(ValidationError):
            SpectralField(1.0, np.zeros((4, 4, 5)))


class TestNDFT:
    def test_point_masses_on_nodes_3d(self, rng):
        g = UniformGrid(1.0, 8)
        nodes = rng.choice(g.m, size=5, replace=False)
        weights = rng.uniform(0.5, 2.0, size=5)
        values = np.zeros(g.m)
        values[nodes] = weights / g.cell_volume
        expected = dft_forward(ScalarField(g, values))
        k = KnotSet3(g.node_coords(nodes), 0.1, weights)
        np.testing.assert_allclose(ndft_knots(k, g).coefficients, expected.coefficients, atol=1e-10)

    def test_point_masses_on_nodes_4d(self, rng):
        g = UniformGrid(1.0, 6, 4)
        axis = g.axis_coords()
        spatial = rng.integers(0, 6, size=(4, 3))
        levels = np.array([3, 4, 5, 4])                 # r = 0, 1/3, 2/3, 1/3
        values = np.zeros(g.shape)
        for (i, j, l), r in zip(spatial, levels):
            values[i, j, l, r] += 1.0 / g.cell_volume
        k = KnotSet4(axis[spatial], axis[levels], None, 1.0)
        expected = dft_forward(ScalarField(g, values))
        np.testing.assert_allclose(ndft_knots(k, g).coefficients, expected.coefficients, atol=1e-10)

    def test_4d_needs_radii(self):
        with pytest.raises(ValidationError):
            ndft_knots(KnotSet3(np.zeros((1, 3)), 0.1), UniformGrid(1.0, 4, 4))


class TestKernels:
    def test_ball_spectrum_at_zero_is_volume(self):
        lattice = UniformGrid(1.0, 8)
        fine = UniformGrid(1.0, 16)
        K = kernel_spectrum(BallKernel(0.4), MollifierParams(), lattice)
        volume = volume_functional(rasterize_balls(np.zeros((1, 3)), 0.4, 1.0, fine))
        assert K.coefficients[4, 4, 4].real == pytest.approx(volume)

    def test_cone_needs_4d(self, grid16):
        with pytest.raises(ValidationError):
            kernel_spectrum(ConeKernel(0.5), MollifierParams(), grid16)

    def test_slice_at_node_level(self, rng):
        g = UniformGrid(1.0, 6, 4)
        f = random_field(rng, g)
        F4 = dft_forward(f)
        for index in (1, 3, 5):
            level = g.axis_coords()[index]
            expected = dft_forward(slice_field4(f, index))
            np.testing.assert_allclose(spectral_slice(F4, level).coefficients,
                                       expected.coefficients, atol=1e-10)

    def test_single_pair_assembly(self):
        lattice = UniformGrid(1.0, 6, 4)
        k1 = KnotSet4([[0.1, -0.2, 0.05]], [0.2], None, 0.5)
        k2 = KnotSet4([[-0.1, 0.1, 0.0]], [0.15], None, 0.4)
        gap4 = fourier_gap(k1, k2, None, lattice)
        K = kernel_spectrum(ConeKernel(0.9), MollifierParams(), lattice).coefficients
        omega = frequency_axis(lattice.L, lattice.n)
        w = np.meshgrid(omega, omega, omega, omega, indexing="ij")
        shift = np.array([0.2, -0.3, 0.05])
        phase = np.exp(-2j * np.pi * (w[0] * shift[0] + w[1] * shift[1] + w[2] * shift[2]
                                      + w[3] * 0.35))
        np.testing.assert_allclose(gap4.coefficients, K * phase, atol=1e-12)


class TestShapeSpectrum:
    def test_ndft_matches_raster_for_node_centers(self, rng):
        lattice = UniformGrid(1.0, 8)
        fine = UniformGrid(1.0, 16)
        centers = fine.node_coords(rng.choice(np.arange(fine.m)[
            np.all(np.abs(fine.node_coords()) <= 0.3, axis=1)], size=3, replace=False))
        k = KnotSet3(centers, 0.3, [1.0, 2.0, 0.5])
        ndft = shape_spectrum(k, lattice, method="ndft")
        raster = shape_spectrum(k, lattice, method="raster")
        np.testing.assert_allclose(ndft.coefficients, raster.coefficients,
                                   atol=1e-9 * np.abs(raster.coefficients).max())

    def test_identity_rotation(self, small_knots3):
        lattice = UniformGrid(1.0, 8)
        k, _ = small_knots3
        plain = shape_spectrum(k, lattice, method="raster")
        rotated = shape_spectrum(k, lattice, method="raster", rotate_by=np.eye(3))
        np.testing.assert_allclose(rotated.coefficients, plain.coefficients, atol=1e-12)

    def test_quarter_turn(self):
        lattice = UniformGrid(1.0, 8)
        k = KnotSet3([[0.125, 0.0, 0.0], [0.0, -0.25, 0.125]], 0.3, [1.0, 2.0])
        R = RigidMotion.from_axis_angle([0, 0, 1], 90.0)
        interpolated = rotate_spectrum(shape_spectrum(k, lattice, method="raster"), R.R)
        direct = shape_spectrum(transform_knots(R, k), lattice, method="raster")
        inner = (slice(1, None),) * 3
        scale = np.abs(direct.coefficients).max()
        np.testing.assert_allclose(interpolated.coefficients[inner], direct.coefficients[inner],
                                   atol=1e-9 * scale)

    def test_nonequiradius_spectrum(self):
        k = KnotSet4([[0.0, 0.0, 0.0], [0.125, -0.125, 0.0]], [0.2, 0.1], None, 0.5)
        F = shape_spectrum(k, UniformGrid(1.0, 8))
        assert F.coefficients.shape == (8, 8, 8)
        assert np.all(np.isfinite(F.coefficients))
        assert np.abs(F.coefficients).max() > 0

    def test_unknown_method(self, small_knots3):
        with pytest.raises(ValidationError):
            shape_spectrum(small_knots3[0], UniformGrid(1.0, 8), method="splines")


def gap_paths_error(n):
    """Error L2 relativo entre el hueco espectral y el espacial en una red n³"""
    rng = np.random.default_rng(0)
    lattice = UniformGrid(1.0, n)
    k1 = KnotSet3(rng.uniform(-0.1, 0.1, size=(3, 3)), 0.3)
    k2 = KnotSet3(rng.uniform(-0.1, 0.1, size=(2, 3)), 0.3)
    R = RigidMotion.from_axis_angle([1, 0, 1], 45.0).R
    spectral = np.real(dft_inverse(fourier_gap(k1, k2, R, lattice)).values)
    spatial = gap_field_spatial(k1, k2, R, lattice).values
    return float(np.linalg.norm(spectral - spatial) / np.linalg.norm(spatial))


class TestFourierGap:
    def test_equal_radius_gap_matches_spatial(self):
        assert gap_paths_error(32) < 1e-2

    @pytest.mark.slow
    def test_paths_agree_on_fine_lattices(self):
        coarse = gap_paths_error(64)
        fine = gap_paths_error(128)
        assert coarse < 1e-2
        assert fine < 0.5 * coarse

    def test_mixed_kinds(self, small_knots3, small_knots4):
        with pytest.raises(ValidationError):
            fourier_gap(small_knots3[0], small_knots4[0], None, UniformGrid(1.0, 8))

    def test_4d_knots_on_3d_lattice(self, small_knots4):
        k1, k2 = small_knots4
        R = RigidMotion.from_axis_angle([0, 0, 1], 30.0).R
        gap3 = fourier_gap(k1, k2, R, UniformGrid(1.0, 8))
        gap4 = fourier_gap(k1, k2, R, UniformGrid(1.0, 8, 4))
        assert gap3.dim == 3
        np.testing.assert_allclose(gap3.coefficients, spectral_slice(gap4, 0.0).coefficients,
                                   atol=1e-12)


class TestTruncation:
    def test_order_starts_at_zero_frequency(self):
        order = truncation_order((4, 4, 4))
        assert order[0] == np.ravel_multi_index((2, 2, 2), (4, 4, 4))
        assert sorted(order) == list(range(64))

    def test_limits(self, rng):
        F = dft_forward(random_field(rng, UniformGrid(1.0, 4)))
        with pytest.raises(ValidationError):
            TruncationSpec(0)
        with pytest.raises(ValidationError):
            retained_indices(F, TruncationSpec(65))

    def test_full_and_mean(self, rng):
        f = random_field(rng, UniformGrid(1.0, 6))
        F = dft_forward(f)
        np.testing.assert_allclose(reconstruct_truncated(F, TruncationSpec(216)).values,
                                   f.values, atol=1e-12)
        mean = reconstruct_truncated(F, TruncationSpec(1)).values
        np.testing.assert_allclose(mean, f.values.mean(), atol=1e-12)

    def test_error_decreases_with_modes(self, rng):
        f = random_field(rng, UniformGrid(1.0, 8))
        F = dft_forward(f)
        errors = [np.linalg.norm(reconstruct_truncated(F, TruncationSpec(m)).values - f.values)
                  for m in (1, 8, 64, 256, 512)]
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
        assert errors[-1] < 1e-10


class TestQuery:
    def test_full_query_is_shifted_inner_product(self, rng):
        g = UniformGrid(1.0, 8)
        f1, f2 = random_field(rng, g), random_field(rng, g)
        query = SpectralQuery(dft_forward(f1), dft_forward(f2))
        expected = inner_product(f1, ScalarField(g, np.roll(f2.values, 1, axis=0)))
        assert query.evaluate([0.25, 0.0, 0.0]) == pytest.approx(expected, rel=1e-9, abs=1e-12)
        assert query.error_bound == 0.0
        assert query.m_prime == g.m

    def test_truncated_query_within_bound(self, rng):
        g = UniformGrid(1.0, 8)
        F1 = dft_forward(random_field(rng, g))
        F2 = dft_forward(random_field(rng, g))
        full = SpectralQuery(F1, F2)
        truncated = SpectralQuery(F1, F2, TruncationSpec(64))
        assert truncated.error_bound > 0
        for t in rng.uniform(-1.0, 1.0, size=(20, 3)):
            gap = abs(full.evaluate(t) - truncated.evaluate(t))
            assert gap <= truncated.error_bound * (1 + 1e-9)

    def test_single_query(self, rng):
        g = UniformGrid(1.0, 8)
        F1 = dft_forward(random_field(rng, g))
        F2 = dft_forward(random_field(rng, g))
        M = RigidMotion.translation([0.1, -0.3, 0.2])
        assert single_query(F1, F2, M) == pytest.approx(SpectralQuery(F1, F2).evaluate(M.t))

    def test_needs_3d(self, rng):
        F = dft_forward(random_field(rng, UniformGrid(1.0, 4, 4)))
        with pytest.raises(GridMismatchError):
            SpectralQuery(F, F)


class TestSpectrumFiles:
    def test_write_then_read_4d(self, tmp_path, rng):
        F = dft_forward(random_field(rng, UniformGrid(0.75, 4, 4)))
        back = read_spectral_field(write_spectral_field(tmp_path / "F.txt", F))
        assert back.L == pytest.approx(0.75)
        np.testing.assert_allclose(back.coefficients, F.coefficients, rtol=1e-15, atol=1e-15)

    def test_real_column_rejected(self, tmp_path):
        path = tmp_path / "F.txt"
        path.write_text("3 2 2 2 1.0\n" + "1.0\n" * 8)
        with pytest.raises(FormatError):
            read_spectral_field(path)
