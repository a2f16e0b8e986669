import numpy as np
import pytest

from levyiu.errors import GridMismatchError, PositivityError, ResourceCapExceeded, ValidationError
from levyiu.geometry import Domain, ball, make_grid
from levyiu.levy_model import SpectralDensity, make_stable_model
from levyiu.rng import RngStream
from levyiu.semigroup import (
    check_positivity, dense_eigen_check, dual_transition_matrix, estimate_transition_matrices,
    estimate_transition_matrix, green_field, lambda0_consistency, matrix_from_array, semigroup_residual,
    spectral_triple, switching_details, switching_residual, write_matrix,
)

STEP = 0.01


def iso():
    return make_stable_model(2, 1.5, SpectralDensity.constant(2))


def aniso():
    return make_stable_model(2, 1.5, SpectralDensity.cosine(2, 1.0, 0.5))


def unit_ball(r=1.0):
    return Domain((ball((0, 0), r),))


def reflection(grid):
    return grid.locate(-grid.centers)


@pytest.fixture(scope="module")
def iso_run():
    D = unit_ball()
    g = make_grid(D, 0.25)
    Ps = estimate_transition_matrices(iso(), D, g, [0.25, 0.5, 1.0, 3.0], 2000, STEP, RngStream(1))
    return g, {P.t: P for P in Ps}


@pytest.fixture(scope="module")
def aniso_pair():
    D = unit_ball()
    g = make_grid(D, 0.25)
    P = estimate_transition_matrix(aniso(), D, g, 0.5, 2000, STEP, RngStream(2))
    Ph = dual_transition_matrix(aniso(), D, g, 0.5, 2000, STEP, RngStream(3))
    return P, Ph


class TestTransition:
    def test_row_sums(self, iso_run):
        _, P = iso_run
        for m in P.values():
            assert np.all(m.row_sums() <= 1.0)
            assert np.all(m.entries >= 0)

    def test_killing(self, iso_run):
        _, P = iso_run
        assert P[3.0].row_sums().max() < 1e-15
        assert P[3.0].row_sums().max() < P[1.0].row_sums().max() < P[0.25].row_sums().max()

    def test_reflection_symmetry(self, iso_run):
        g, P = iso_run
        s = reflection(g)
        assert np.all(s >= 0)
        m = P[0.5]
        a, b = m.entries, m.entries[np.ix_(s, s)]
        se = np.hypot(m.stderr, m.stderr[np.ix_(s, s)])
        z = np.abs(a - b)[se > 0] / se[se > 0]
        # every entry within 3 sd up to the expected share of 3 sd excursions
        assert np.mean(z > 3) < 0.01
        assert z.max() < 5

    def test_stderr_covers_seed_spread(self):
        D = unit_ball()
        g = make_grid(D, 0.4)
        a = estimate_transition_matrix(iso(), D, g, 0.5, 2000, STEP, RngStream(10))
        b = estimate_transition_matrix(iso(), D, g, 0.5, 2000, STEP, RngStream(11))
        ok = (a.stderr > 0) & (b.stderr > 0)
        z = (a.entries - b.entries)[ok] / np.hypot(a.stderr, b.stderr)[ok]
        assert 0.7 < np.std(z) < 1.3

    def test_plain_method_agrees(self):
        D = unit_ball()
        g = make_grid(D, 0.4)
        fv = estimate_transition_matrix(iso(), D, g, 0.1, 4000, STEP, RngStream(12))
        pl = estimate_transition_matrix(iso(), D, g, 0.1, 4000, STEP, RngStream(13), method="plain")
        ok = (fv.stderr > 0) & (pl.stderr > 0)
        z = (fv.entries - pl.entries)[ok] / np.hypot(fv.stderr, pl.stderr)[ok]
        assert np.mean(np.abs(z) > 3) < 0.02

    def test_determinism(self):
        D = unit_ball()
        g = make_grid(D, 0.5)
        a = estimate_transition_matrix(aniso(), D, g, 0.1, 1000, STEP, RngStream(14))
        b = estimate_transition_matrix(aniso(), D, g, 0.1, 1000, STEP, RngStream(14))
        assert np.array_equal(a.entries, b.entries) and np.array_equal(a.stderr, b.stderr)

    def test_contracts(self):
        D = unit_ball()
        g = make_grid(D, 0.5)
        with pytest.raises(ValidationError):
            estimate_transition_matrix(iso(), D, g, 0.1, 500, STEP, RngStream(0))
        with pytest.raises(ValidationError):
            estimate_transition_matrix(iso(), D, g, 0.105, 1000, STEP, RngStream(0))
        with pytest.raises(ResourceCapExceeded):
            estimate_transition_matrix(iso(), D, g, 1.0, 1000, STEP, RngStream(0), max_particle_steps=1e6)

    def test_monotone_domain_inclusion(self):
        big, small = unit_ball(1.0), unit_ball(0.6)
        gb, gs = make_grid(big, 0.2), make_grid(small, 0.2)
        Pb = estimate_transition_matrix(iso(), big, gb, 0.2, 2000, STEP, RngStream(15))
        Ps = estimate_transition_matrix(iso(), small, gs, 0.2, 2000, STEP, RngStream(16))
        k = gb.locate(gs.centers)
        assert np.all(k >= 0)
        a, b = Ps.entries, Pb.entries[np.ix_(k, k)]
        se = np.hypot(Ps.stderr, Pb.stderr[np.ix_(k, k)])
        assert np.all(a <= b + 3 * se + 1e-300)
        # the killed law on the small ball is visibly smaller in the middle
        c = int(np.argmin(np.linalg.norm(gs.centers, axis=1)))
        assert a[c].sum() < b[c].sum()

    def test_write_matrix(self, tmp_path, iso_run):
        _, P = iso_run
        tri = spectral_triple(P[1.0])
        write_matrix(str(tmp_path / "P"), P[1.0], tri, {"seed": 1})
        rows = (tmp_path / "P.csv").read_text().splitlines()
        assert len(rows) > P[1.0].n
        assert '"lambda0"' in (tmp_path / "P.json").read_text()


def _mean_asymmetry_z2(P):
    E, S = P.entries, np.hypot(P.stderr, P.stderr.T)
    iu = np.triu_indices(P.n, 1)
    z = (E - E.T)[iu] / np.where(S[iu] > 0, S[iu], np.nan)
    return float(np.nanmean(z**2))


class TestSwitching:
    def test_isotropic_self_dual(self, iso_run):
        _, P = iso_run
        D = unit_ball()
        Ph = dual_transition_matrix(iso(), D, P[0.5].grid, 0.5, 2000, STEP, RngStream(20))
        assert switching_residual(P[0.5], Ph) < 4

    def test_anisotropic(self, aniso_pair):
        P, Ph = aniso_pair
        sw = switching_details(P, Ph)
        assert sw.residual < 4
        # the kernel itself is not symmetric, while the isotropic one is
        assert _mean_asymmetry_z2(P) > 3
        iso_P = estimate_transition_matrix(iso(), unit_ball(), P.grid, 0.5, 2000, STEP, RngStream(2))
        assert _mean_asymmetry_z2(iso_P) < 1.5

    def test_fault_injection(self, aniso_pair):
        # using the primal simulation as the dual must be caught
        P, _ = aniso_pair
        wrong = estimate_transition_matrix(aniso(), unit_ball(), P.grid, 0.5, 2000, STEP, RngStream(21))
        assert switching_residual(P, wrong) > 6

    def test_mismatch(self, aniso_pair, iso_run):
        P, _ = aniso_pair
        _, Pi = iso_run
        with pytest.raises(GridMismatchError):
            switching_residual(P, Pi[1.0])
        g = make_grid(unit_ball(), 0.4)
        other = matrix_from_array(np.eye(g.n) * 0.1)
        with pytest.raises(GridMismatchError):
            switching_residual(P, other)


class TestChapmanKolmogorov:
    def test_t_equals_s(self, iso_run):
        _, P = iso_run
        r = semigroup_residual(P[0.25], P[0.25], P[0.5])
        assert r.residual < 4
        assert r.row_sum_ok

    def test_refinement_reduces_gap(self):
        D = unit_ball()
        res = []
        for h, N in ((0.4, 1000), (0.2, 4000)):
            g = make_grid(D, h)
            a, b = estimate_transition_matrices(iso(), D, g, [0.2, 0.4], N, STEP, RngStream(30).child(h))
            Q = a.entries @ a.entries / g.volumes[None, :]
            C = b.entries / g.volumes[None, :]
            res.append(np.sum(np.abs(Q - C) * g.volumes[:, None] * g.volumes[None, :]))
        assert res[1] < res[0]

    def test_time_mismatch(self, iso_run):
        _, P = iso_run
        with pytest.raises(GridMismatchError):
            semigroup_residual(P[0.25], P[0.25], P[1.0])


@pytest.fixture(scope="module")
def gf():
    D = unit_ball()
    g = make_grid(D, 0.25)
    return green_field(iso(), D, g, 3000, RngStream(40), step=STEP)


class TestGreen:
    def test_row_integral(self, gf):
        assert gf.consistency() < 3
        assert gf.censored_fraction < 1e-3

    def test_symmetry(self, gf):
        # starting at a cell centre against averaging over a cell biases
        # pairs that touch the boundary layer, so only interior pairs count
        G, se = gf.G, gf.G_se
        s = np.hypot(se, se.T)
        inner = ~gf.grid.edge
        ok = (s > 0) & np.outer(inner, inner)
        z = np.abs(G - G.T)[ok] / s[ok]
        assert np.mean(z > 3) < 0.01

    def test_dual_matches_for_isotropic(self, gf):
        z = np.abs(gf.mean_exit - gf.dual_mean_exit) / np.hypot(gf.mean_exit_se, gf.dual_mean_exit_se)
        assert z.max() < 4

    def test_domain_monotone(self, gf):
        D2 = unit_ball(1.5)
        # a grid on the larger ball with the same lattice as the small one
        g2 = make_grid(Domain((ball((0, 0), 1.5),)), 0.25)
        big = green_field(iso(), D2, g2, 3000, RngStream(41), step=STEP, with_dual=False)
        k = g2.locate(gf.grid.centers)
        shared = k >= 0
        a = gf.G[np.ix_(shared, shared)]
        b = big.G[np.ix_(k[shared], k[shared])]
        se = np.hypot(gf.G_se[np.ix_(shared, shared)], big.G_se[np.ix_(k[shared], k[shared])])
        assert np.all(a <= b + 3 * se)


class TestSpectral:
    def test_hand_matrix(self):
        P = matrix_from_array([[0.5, 0.2], [0.1, 0.4]])
        tri = spectral_triple(P)
        rho = 0.45 + np.sqrt(0.0025 + 0.02)
        assert tri.rho == pytest.approx(rho, abs=1e-10)
        assert tri.lambda0 == pytest.approx(np.log(rho), abs=1e-10)
        w = np.linalg.eigvals(P.entries)
        assert tri.rho == pytest.approx(w.real.max(), abs=1e-10)
        assert tri.phi0[0] / tri.phi0[1] == pytest.approx(2.0, rel=1e-9)
        assert tri.psi0[0] / tri.psi0[1] == pytest.approx(1.0, rel=1e-9)

    def test_eigen_identities(self, iso_run):
        _, P = iso_run
        tri = spectral_triple(P[1.0])
        A, vol = P[1.0].entries, P[1.0].grid.volumes
        assert np.max(np.abs(A @ tri.phi0 - tri.rho * tri.phi0)) <= 1e-8 * tri.rho * tri.phi0.max()
        lhs = (A.T @ (tri.psi0 * vol)) / vol
        assert np.max(np.abs(lhs - tri.rho * tri.psi0)) <= 1e-8 * tri.rho * tri.psi0.max()
        assert max(dense_eigen_check(P[1.0], tri).values()) < 1e-8
        assert tri.lambda0 < 0

    def test_self_dual_eigenvectors(self, iso_run):
        _, P = iso_run
        tri = spectral_triple(P[1.0])
        z = np.abs(tri.phi0 - tri.psi0) / np.hypot(tri.phi0_se, tri.psi0_se)
        assert z.max() < 4

    def test_lambda0_consistency(self, iso_run):
        _, P = iso_run
        assert lambda0_consistency(P[1.0], P[1.0])[2] == 0.0
        la, lb, gap = lambda0_consistency(P[0.5], P[1.0])
        assert la < 0 and lb < 0 and gap < 4
        with pytest.raises(GridMismatchError):
            lambda0_consistency(P[1.0], matrix_from_array(np.full((3, 3), 0.1)))

    def test_positivity_error(self):
        P = matrix_from_array([[0.5, 0.0], [0.0, 0.4]])
        with pytest.raises(PositivityError) as exc:
            check_positivity(P)
        assert len(exc.value.zero_pairs) == 2
        with pytest.raises(PositivityError):
            spectral_triple(P)

    def test_positivity_power(self):
        # irreducible but with zeros: positive at the second power
        assert check_positivity(matrix_from_array([[0.0, 0.5], [0.5, 0.1]])) == 2

    def test_matrix_from_array_contract(self):
        with pytest.raises(ValidationError):
            matrix_from_array([[0.5, -0.1], [0.1, 0.4]])
        with pytest.raises(ValidationError):
            matrix_from_array([[0.5, 0.1]])
