import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsgain.errors import DegenerateFieldError, FieldValidationError
from nsgain.paraproduct import (
    b_negative_norm,
    bony_trisect,
    duality_check,
    ensemble_field,
    lemma_constant_estimate,
    lemma_constant_sweep,
    trilinear_form,
    triple_class,
)
from nsgain.spectral_core import GridSpec, SpectralField, nonlinear_term, random_solenoidal, single_mode, sobolev_norm


def physical_field(grid, fx, fy):
    x = np.arange(grid.N) * 2 * np.pi / grid.N
    X, Y = np.meshgrid(x, x, indexing="ij")
    return SpectralField.from_physical(grid, np.stack([fx(X, Y), fy(X, Y)]))


@pytest.fixture
def cosine_triple():
    g = GridSpec(32)
    u = physical_field(g, lambda x, y: 0 * x, lambda x, y: np.cos(x))
    w = physical_field(g, lambda x, y: np.sin(y), lambda x, y: 0 * x)
    v = physical_field(g, lambda x, y: np.cos(x) * np.cos(y), lambda x, y: np.sin(x) * np.sin(y))
    return u, w, v


class TestTripleClass:
    def test_partition_is_exhaustive(self):
        qs = range(-1, 9)
        labels = {triple_class(p, q, r) for p, q, r in itertools.product(qs, qs, qs)}
        assert labels == {1, 2, 3}

    @pytest.mark.parametrize(
        "triple,label",
        [((3, 3, 3), 1), ((3, 4, 0), 1), ((5, 0, 5), 2), ((5, 1, 4), 2), ((0, 5, 5), 3), ((0, 5, 6), 3)],
    )
    def test_examples(self, triple, label):
        assert triple_class(*triple) == label


class TestTrilinearForm:
    def test_cosine_oracle(self, cosine_triple):
        assert trilinear_form(*cosine_triple) == pytest.approx(0.25, rel=1e-13)

    def test_cosine_oracle_sits_in_class_one(self, cosine_triple):
        res = bony_trisect(*cosine_triple)
        assert res.term_I == pytest.approx(0.25, rel=1e-13)
        assert abs(res.term_II) < 1e-15 and abs(res.term_III) < 1e-15

    @given(seed=st.integers(0, 10_000))
    def test_antisymmetric_in_last_two(self, seed):
        g = GridSpec(16)
        u, w, v = (random_solenoidal(g, 1.0, seed, stream=j) for j in range(3))
        assert trilinear_form(u, w, v) == pytest.approx(-trilinear_form(u, v, w), abs=1e-12)

    def test_rejects_compressible_advector(self):
        g = GridSpec(16)
        c = np.zeros((2, 16, 16), complex)
        c[0, 1, 0] = c[0, -1, 0] = 0.5
        u = SpectralField(g, c)
        with pytest.raises(FieldValidationError):
            trilinear_form(u, u, u)

    def test_rejects_mixed_grids(self):
        with pytest.raises(FieldValidationError):
            trilinear_form(single_mode(GridSpec(16), (1, 0)), single_mode(GridSpec(32), (1, 0)), single_mode(GridSpec(16), (1, 0)))


class TestTrisection:
    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction(self, seed):
        g = GridSpec(32)
        u, w, v = (random_solenoidal(g, 1.0 + 0.5 * j, seed, stream=j) for j in range(3))
        res = bony_trisect(u, w, v)
        assert res.reconstruction_error <= 1e-10 * max(abs(res.total_direct), 1e-300)
        assert res.tensor.shape == (len(res.qs),) * 3

    def test_high_shell_middle_factor_has_no_class_two(self):
        g = GridSpec(64)
        u = single_mode(g, (1, 0), polarization=(0, 1))
        w = random_solenoidal(g, 0.0, seed=1, kmin=16, kmax=20)
        v = random_solenoidal(g, 0.0, seed=2, kmin=14, kmax=20)
        res = bony_trisect(u, w, v)
        assert res.term_II == 0.0
        assert res.reconstruction_error < 1e-12


class TestNegativeNorm:
    def test_matches_sobolev_norm(self, rough_field):
        assert b_negative_norm(rough_field, 0.5) == sobolev_norm(nonlinear_term(rough_field), -0.5)

    @pytest.mark.parametrize("beta", [0.0, -0.1, 1.5])
    def test_rejects_beta(self, rough_field, beta):
        with pytest.raises(ValueError):
            b_negative_norm(rough_field, beta)
        with pytest.raises(ValueError):
            lemma_constant_estimate(beta, 2, [16])

    def test_endpoint_beta_one(self):
        rep = lemma_constant_estimate(1.0, 6, [16, 32])
        assert rep.samples == 12
        assert np.isfinite(rep.max_ratio) and rep.max_ratio > 0

    def test_sweep_shares_ensemble(self):
        sweep = lemma_constant_sweep([0.5], 4, [16, 32], seed=3)
        single = lemma_constant_estimate(0.5, 4, [16, 32], seed=3)
        assert sweep[0.5].max_ratio == single.max_ratio
        d = single.to_dict()
        assert d["resolutions"] == [16, 32]
        assert len(list(single.csv_rows())) == 2

    def test_ensemble_member_is_deterministic(self):
        g = GridSpec(16)
        assert np.array_equal(ensemble_field(g, 3, 0).coeffs, ensemble_field(g, 3, 0).coeffs)


class TestDuality:
    @pytest.mark.parametrize("beta", [0.25, 0.5, 1.0])
    def test_sup_pairing_matches_direct_norm(self, beta):
        u = random_solenoidal(GridSpec(32), 1.5, seed=4)
        res = duality_check(u, beta, n_test=16)
        assert res["sup"] <= res["direct"] * (1 + 1e-10)
        assert res["sup"] >= 0.95 * res["direct"]

    def test_degenerate(self):
        g = GridSpec(32)
        with pytest.raises(DegenerateFieldError):
            duality_check(single_mode(g, (1, 0)), 0.5)
