import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsgain.errors import DegenerateFieldError, FieldValidationError
from nsgain.littlewood_paley import (
    bernstein_ratio,
    bernstein_sweep,
    bump,
    decompose,
    infer_shell,
    lp_envelope,
    lp_norm,
    lp_project,
    phi_q,
    phi_radial,
    q_max,
    shell_floor,
    shell_indices,
    shell_multipliers,
    shell_norms_coeffs,
    write_shell_table,
)
from nsgain.spectral_core import GridSpec, SpectralField, random_solenoidal, single_mode, sobolev_norm


class TestMultipliers:
    def test_bump_plateau_and_support(self):
        assert bump(0.0) == 1.0 and bump(0.5) == 1.0
        assert bump(1.0) == 0.0 and bump(3.0) == 0.0
        r = np.linspace(0.5, 1.0, 101)
        assert np.all(np.diff(bump(r)) <= 0)

    def test_bump_is_smooth_at_the_edges(self):
        # every derivative vanishes at the plateau edges, so the values approach flat quickly
        assert 1 - bump(0.5 + 1e-3) < 1e-100
        assert bump(1 - 1e-3) < 1e-100

    @pytest.mark.parametrize("q", [-1, 0, 1, 3, 6])
    def test_support_annulus(self, q):
        r = np.linspace(0, 300, 30001)
        phi = phi_radial(q, r)
        lo = 0.0 if q == -1 else 2.0 ** (q - 1)
        assert np.all(phi[r >= 2.0 ** (q + 1)] == 0)
        assert np.all(phi[(r <= lo) & (r > 0)] == 0) or q == -1
        assert np.all((phi >= 0) & (phi <= 1))

    def test_vector_argument(self):
        np.testing.assert_allclose(phi_q(2, np.array([[3.0, 4.0]])), phi_radial(2, 5.0))
        with pytest.raises(ValueError):
            phi_q(0, np.zeros((2, 3)))

    def test_rejects_low_index(self):
        with pytest.raises(ValueError):
            phi_radial(-2, 1.0)

    @pytest.mark.parametrize("N", [16, 32, 64, 256])
    def test_partition_of_unity_on_grid(self, N):
        g = GridSpec(N)
        total = shell_multipliers(g).sum(axis=0)
        np.testing.assert_allclose(total, 1.0, atol=1e-15)
        assert len(shell_indices(N)) == q_max(N) + 2


class TestDecomposition:
    @pytest.mark.parametrize("N", [32, 128])
    def test_reconstruction(self, N):
        u = random_solenoidal(GridSpec(N), 1.0, seed=3)
        err = np.max(np.abs(decompose(u).reconstruct().coeffs - u.coeffs))
        assert err <= 1e-12 * np.max(np.abs(u.coeffs))

    def test_non_adjacent_shells_are_orthogonal_projections(self):
        u = random_solenoidal(GridSpec(64), 1.0, seed=0)
        for p in shell_indices(64):
            for q in shell_indices(64):
                if abs(p - q) >= 2:
                    assert not np.any(lp_project(lp_project(u, p), q).coeffs)

    def test_shell_norms_match_projection(self, rough_field):
        d = decompose(rough_field)
        np.testing.assert_allclose(d.norms(), shell_norms_coeffs(rough_field.grid, rough_field.coeffs), rtol=1e-13)
        assert d[0].grid == rough_field.grid
        assert d.lambdas[-1] == 0.5

    def test_projection_above_grid_is_empty(self, rough_field):
        assert not np.any(lp_project(rough_field, q_max(32) + 3).coeffs)

    def test_shell_floor(self):
        g = GridSpec(32)
        assert shell_floor(g, -1) == float("inf")
        assert shell_floor(g, 0) == 1.0
        assert shell_floor(g, 2) == pytest.approx(np.sqrt(5))
        assert shell_floor(g, 10) == float("inf")


class TestEnvelope:
    @staticmethod
    def brute_force_envelope(s, kmax=48):
        """min and max of (sum_q lambda_q^{2s} phi_q^2)^{1/2} / |k|^s over lattice points."""
        k = np.arange(-kmax, kmax + 1)
        KX, KY = np.meshgrid(k, k, indexing="ij")
        r = np.hypot(KX, KY)[(KX != 0) | (KY != 0)]
        w = sum(2.0 ** (2 * s * q) * phi_radial(q, r) ** 2 for q in range(-1, 8))
        ratio = np.sqrt(w) / r**s
        return ratio.min(), ratio.max()

    @pytest.mark.parametrize("s", [-1.0, -0.5, 0.0, 1.0, 2.0])
    def test_envelope_covers_lattice(self, s):
        lo, hi = lp_envelope(s)
        bf_lo, bf_hi = self.brute_force_envelope(s)
        assert lo <= bf_lo and bf_hi <= hi

    @given(seed=st.integers(0, 10_000), slope=st.floats(0.0, 3.0), s=st.sampled_from([-1.0, -0.5, 0.0, 1.0, 2.0]))
    def test_random_fields_inside_envelope(self, seed, slope, s):
        u = random_solenoidal(GridSpec(32), slope, seed)
        lo, hi = lp_envelope(s)
        assert lo <= lp_norm(u, s) / sobolev_norm(u, s) <= hi

    def test_negative_order_rejects_mean(self):
        c = np.zeros((2, 16, 16), complex)
        c[0, 0, 0] = 1.0
        with pytest.raises(FieldValidationError):
            lp_norm(SpectralField(GridSpec(16), c, mean_free=False), -1.0)


class TestBernstein:
    def test_single_mode_ratio(self):
        g = GridSpec(64)
        # |u| = sqrt(2)|cos| for a unit single mode; sup/L2 is sqrt(2)
        u = single_mode(g, (8, 0))
        q = infer_shell(u)
        assert q == 3
        assert bernstein_ratio(u, 2.0, np.inf) == pytest.approx(np.sqrt(2) / 2.0 ** (2 * q * 0.5), rel=1e-12)

    def test_random_shells_bounded(self):
        worst = bernstein_sweep(GridSpec(64), [1, 2, 3, 4], n_fields=5, seed=0)
        assert all(0 < v < 10 for v in worst.values())

    def test_invalid_inputs(self):
        g = GridSpec(32)
        with pytest.raises(DegenerateFieldError):
            infer_shell(SpectralField.zeros(g))
        with pytest.raises(ValueError):
            bernstein_ratio(single_mode(g, (2, 0)), 4.0, 2.0)


def test_shell_table(tmp_path, rough_field):
    lines = write_shell_table(rough_field, tmp_path / "shells.csv").read_text().splitlines()
    assert lines[0] == "q,lambda_q,norm_l2"
    assert len(lines) == len(shell_indices(32)) + 1
