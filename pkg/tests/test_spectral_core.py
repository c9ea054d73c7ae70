import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsgain.errors import DealiasingError, DegenerateFieldError, FieldValidationError, HermitianError
from nsgain.spectral_core import (
    GridSpec,
    SpectralField,
    interpolation_gap,
    l2_pairing,
    leray_project,
    nonlinear_term,
    random_solenoidal,
    read_spectral_binary,
    read_spectral_csv,
    regrid,
    ring_normals,
    single_mode,
    sobolev_norm,
    stokes_power,
    taylor_green,
    write_spectral_binary,
    write_spectral_csv,
)

seeds = st.integers(min_value=0, max_value=10_000)
slopes = st.floats(min_value=0.5, max_value=3.0)


def field_at(grid, k, vec):
    """Field whose coefficient at k is ``vec`` (conjugate at -k)."""
    c = np.zeros((2, grid.N, grid.N), complex)
    N = grid.N
    c[:, k[0] % N, k[1] % N] = vec
    c[:, -k[0] % N, -k[1] % N] = np.conj(vec)
    return SpectralField(grid, c)


def dense_advection_oracle(grid, u):
    """(u.grad)u on a 2N grid with numpy.fft; exact for the band-limited inputs."""
    N, M = grid.N, 2 * grid.N
    k = grid.wavenumbers
    c = u.coeffs * grid.dealias_mask
    big = np.zeros((2, M, M), complex)
    big[:, (k % M)[:, None], (k % M)[None, :]] = c
    kk = np.fft.fftfreq(M) * M
    KX, KY = np.meshgrid(kk, kk, indexing="ij")
    phys = lambda a: np.fft.ifft2(a).real * M * M
    ux, uy = phys(big[0]), phys(big[1])
    out = []
    for comp in big:
        dx, dy = phys(1j * KX * comp), phys(1j * KY * comp)
        out.append(np.fft.fft2(ux * dx + uy * dy) / (M * M))
    g = np.zeros((2, N, N), complex)
    for i in range(2):
        g[i] = out[i][(k % M)[:, None], (k % M)[None, :]]
    g *= grid.dealias_mask
    kdot = grid.kx * g[0] + grid.ky * g[1]
    g = g - np.stack([grid.kx, grid.ky]) * kdot * grid.inv_k2
    g[:, 0, 0] = 0
    return g


class TestGridSpec:
    @pytest.mark.parametrize("N", [7, 6, 9, 0])
    def test_rejects_bad_resolution(self, N):
        with pytest.raises(ValueError):
            GridSpec(N)

    @pytest.mark.parametrize("kw", [{"nu": 0.0}, {"nu": -1.0}, {"dealias_fraction": 0.0}, {"dealias_fraction": 1.5}])
    def test_rejects_bad_parameters(self, kw):
        with pytest.raises(ValueError):
            GridSpec(16, **kw)

    def test_default_dealias_is_two_thirds(self):
        assert GridSpec(16).dealias_fraction == pytest.approx(2 / 3)


class TestSpectralField:
    def test_rejects_non_hermitian(self, grid32):
        c = np.zeros((2, 32, 32), complex)
        c[0, 1, 0] = 1.0
        with pytest.raises(HermitianError):
            SpectralField(grid32, c)

    def test_rejects_mean_when_mean_free(self, grid32):
        c = np.zeros((2, 32, 32), complex)
        c[0, 0, 0] = 1.0
        with pytest.raises(FieldValidationError):
            SpectralField(grid32, c, mean_free=True)
        assert SpectralField(grid32, c, mean_free=False).coeffs[0, 0, 0] == 1.0

    def test_rejects_false_solenoidal_flag(self, grid32):
        with pytest.raises(FieldValidationError):
            single_mode(grid32, (1, 0), polarization=(1, 0)).replace(
                single_mode(grid32, (1, 0), polarization=(1, 0)).coeffs, solenoidal=True
            )

    def test_coefficients_are_immutable(self, rough_field):
        with pytest.raises(ValueError):
            rough_field.coeffs[0, 1, 1] = 0.0

    def test_physical_roundtrip(self, rough_field):
        back = SpectralField.from_physical(rough_field.grid, rough_field.to_physical())
        np.testing.assert_allclose(back.coeffs, rough_field.coeffs, atol=1e-14)


class TestSobolevNorm:
    @pytest.mark.parametrize("s", [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
    def test_unit_mode_has_unit_norm(self, grid32, s):
        u = single_mode(grid32, (1, 0), 1.0, polarization=(0, 1))
        assert sobolev_norm(u, s) == pytest.approx(1.0, rel=1e-14)

    def test_mode_three_four(self, grid32):
        u = single_mode(grid32, (3, 4), 2.0)
        assert sobolev_norm(u, 1.0) == pytest.approx(10.0, rel=1e-14)
        assert sobolev_norm(u, -1.0) == pytest.approx(0.4, rel=1e-14)

    def test_l2_matches_physical_mean(self, rough_field):
        p = rough_field.to_physical()
        assert sobolev_norm(rough_field, 0.0) == pytest.approx(np.sqrt(np.mean(np.sum(p**2, axis=0))), rel=1e-12)

    def test_negative_order_rejects_mean(self, grid32):
        c = np.zeros((2, 32, 32), complex)
        c[0, 0, 0] = 1.0
        u = SpectralField(grid32, c, mean_free=False)
        with pytest.raises(FieldValidationError):
            sobolev_norm(u, -0.5)
        assert sobolev_norm(u, 0.0) == 0.0

    def test_rejects_non_finite_order(self, rough_field):
        with pytest.raises(ValueError):
            sobolev_norm(rough_field, float("nan"))

    @given(seed=seeds, a=st.floats(min_value=0.1, max_value=10.0))
    def test_monotone_in_amplitude(self, seed, a):
        u = random_solenoidal(GridSpec(16), 1.0, seed)
        for s in (-1.0, 0.0, 1.5):
            assert sobolev_norm(u * (1 + a), s) > sobolev_norm(u, s)


class TestLeray:
    def test_gradient_field_is_annihilated(self, grid32):
        u = field_at(grid32, (2, 3), np.array([2.0, 3.0]) * 1j)
        assert np.max(np.abs(leray_project(u).coeffs)) < 1e-15

    def test_subtracts_component_along_k(self, grid32):
        u = field_at(grid32, (1, 0), np.array([1.0, 1.0]))
        np.testing.assert_allclose(leray_project(u).mode((1, 0)), [0.0, 1.0])

    def test_divergence_free_input_unchanged(self, rough_field):
        np.testing.assert_allclose(leray_project(rough_field).coeffs, rough_field.coeffs, atol=1e-15)

    @given(seed=seeds)
    def test_idempotent_and_self_adjoint(self, seed):
        g = GridSpec(16)
        rng = np.random.default_rng(seed)
        make = lambda: SpectralField.from_physical(g, rng.standard_normal((2, 16, 16)))
        u, v = make(), make()
        Pu, Pv = leray_project(u), leray_project(v)
        np.testing.assert_allclose(leray_project(Pu).coeffs, Pu.coeffs, atol=1e-14)
        assert l2_pairing(Pu, v) == pytest.approx(l2_pairing(u, Pv), abs=1e-12)
        assert Pu.is_solenoidal()


class TestStokesPower:
    def test_zero_power_is_identity(self, rough_field):
        assert stokes_power(rough_field, 0.0) is rough_field

    def test_mode_of_radius_two(self, grid32):
        u = single_mode(grid32, (2, 0), 1.5)
        np.testing.assert_allclose(stokes_power(u, 1.0).coeffs, 4 * u.coeffs)

    def test_half_power_gives_h1_norm(self, rough_field):
        assert sobolev_norm(stokes_power(rough_field, 0.5), 0.0) == pytest.approx(sobolev_norm(rough_field, 1.0), rel=1e-13)

    def test_negative_power_rejects_mean(self, grid32):
        c = np.zeros((2, 32, 32), complex)
        c[1, 0, 0] = 1.0
        with pytest.raises(FieldValidationError):
            stokes_power(SpectralField(grid32, c, mean_free=False), -0.5)


class TestNonlinearTerm:
    def test_taylor_green_is_a_gradient(self, grid32):
        u = taylor_green(grid32)
        assert np.max(np.abs(dense_advection_oracle(grid32, u))) < 1e-14
        assert np.max(np.abs(nonlinear_term(u).coeffs)) < 1e-14

    def test_zero_field(self, grid32):
        assert not np.any(nonlinear_term(SpectralField.zeros(grid32)).coeffs)

    @pytest.mark.parametrize("N", [16, 32, 64])
    def test_matches_dense_quadrature(self, N):
        g = GridSpec(N)
        u = random_solenoidal(g, 1.0, seed=N)
        B = nonlinear_term(u)
        oracle = dense_advection_oracle(g, u)
        assert np.max(np.abs(B.coeffs - oracle)) <= 1e-12 * np.max(np.abs(oracle))
        assert B.is_solenoidal()

    @given(seed=seeds, slope=slopes, N=st.sampled_from([16, 32, 64]))
    def test_energy_cancellation(self, seed, slope, N):
        u = random_solenoidal(GridSpec(N), slope, seed)
        val = abs(l2_pairing(nonlinear_term(u), u))
        assert val <= 1e-10 * sobolev_norm(u, 1.0) ** 2 * sobolev_norm(u, 0.0)

    def test_rejects_underresolved_dealiasing(self):
        with pytest.raises(DealiasingError):
            nonlinear_term(SpectralField.zeros(GridSpec(8, dealias_fraction=0.4)))


class TestInterpolationGap:
    def test_single_mode_is_sharp(self, grid32):
        assert interpolation_gap(single_mode(grid32, (2, 1)), 0.0, 1.0, 2.0, 0.5) == pytest.approx(1.0, rel=1e-14)

    def test_random_field_in_unit_interval(self, rough_field):
        v = interpolation_gap(rough_field, 0.0, 1.0, 2.0, 0.5)
        assert 0 < v <= 1.0

    def test_two_modes(self, grid32):
        u = single_mode(grid32, (1, 0)) + single_mode(grid32, (4, 0))
        expected = np.sqrt(17) / (2**0.25 * 257**0.25)
        assert interpolation_gap(u, 0.0, 1.0, 2.0, 0.5) == pytest.approx(expected, rel=1e-13)
        assert expected < 1

    def test_zero_field_is_degenerate(self, grid32):
        with pytest.raises(DegenerateFieldError):
            interpolation_gap(SpectralField.zeros(grid32), 0.0, 1.0, 2.0, 0.5)

    def test_rejects_inconsistent_exponents(self, rough_field):
        with pytest.raises(ValueError):
            interpolation_gap(rough_field, 0.0, 0.7, 2.0, 0.5)

    @given(seed=seeds, slope=slopes, theta=st.floats(min_value=0.0, max_value=1.0))
    def test_log_convexity(self, seed, slope, theta):
        u = random_solenoidal(GridSpec(16), slope, seed)
        s0, s2 = -1.0, 2.0
        assert interpolation_gap(u, s0, (1 - theta) * s0 + theta * s2, s2, theta) <= 1 + 1e-12


class TestRandomFields:
    def test_deterministic(self, grid32):
        a = random_solenoidal(grid32, 2.0, seed=3)
        b = random_solenoidal(grid32, 2.0, seed=3)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_ring_normals_agree_across_resolutions(self):
        a, b = ring_normals(16, 5), ring_normals(64, 5)
        k16 = np.rint(np.fft.fftfreq(16) * 16).astype(int)
        common = np.abs(k16) < 8
        k = k16[common]
        np.testing.assert_array_equal(a[np.ix_(k % 16, k % 16)], b[np.ix_(k % 64, k % 64)])

    def test_spectrum_and_band(self, grid32):
        u = random_solenoidal(grid32, 2.0, seed=1)
        mag = np.sqrt(np.sum(np.abs(u.coeffs) ** 2, axis=0))
        inside = grid32.dealias_mask & (grid32.kmag > 0)
        np.testing.assert_allclose(mag[inside], grid32.kmag[inside] ** -2.0, rtol=1e-12)
        assert not np.any(mag[~inside])
        assert u.is_solenoidal()

    @given(seed=seeds)
    def test_operations_preserve_hermitian_symmetry(self, seed):
        u = random_solenoidal(GridSpec(16), 1.0, seed)
        for v in (leray_project(u), stokes_power(u, 0.3), nonlinear_term(u), regrid(u, 32)):
            assert isinstance(v, SpectralField)  # construction validates the symmetry


class TestDumpsAndRegrid:
    def test_csv_roundtrip(self, tmp_path, rough_field):
        p = write_spectral_csv(rough_field, tmp_path / "u.csv", comments=("config_hash: abc",))
        back = read_spectral_csv(p)
        assert back.grid == rough_field.grid
        assert np.array_equal(back.coeffs, rough_field.coeffs)

    def test_binary_roundtrip(self, tmp_path, rough_field):
        back = read_spectral_binary(write_spectral_binary(rough_field, tmp_path / "u.bin"))
        assert np.array_equal(back.coeffs, rough_field.coeffs)

    def test_regrid_roundtrip(self, rough_field):
        back = regrid(regrid(rough_field, 64), 32)
        np.testing.assert_array_equal(back.coeffs, rough_field.coeffs)
        assert sobolev_norm(regrid(rough_field, 64), 1.0) == pytest.approx(sobolev_norm(rough_field, 1.0), rel=1e-14)
