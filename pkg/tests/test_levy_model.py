import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from levyiu.errors import ValidationError
from levyiu.levy_model import (
    SpectralDensity, add_brownian, characteristic_exponent, classify_assumption, dual, levy_density,
    make_stable_model, make_truncated_model, model_from_json, model_to_json,
)


def iso(d=2, alpha=1.5):
    return make_stable_model(d, alpha, SpectralDensity.constant(d))


def cosine_model(alpha=1.5, b=0.5):
    return make_stable_model(2, alpha, SpectralDensity.cosine(2, 1.0, b))


class TestConstruction:
    def test_density_value(self):
        assert levy_density(iso(), [2.0, 0.0]) == pytest.approx(2 ** -3.5, rel=1e-14)

    def test_alpha_one_requires_centering(self):
        with pytest.raises(ValidationError, match="centered"):
            cosine_model(alpha=1.0)
        make_stable_model(2, 1.0, SpectralDensity.constant(2))

    def test_alpha_one_first_moment_oracle(self):
        # int over the circle of xi (1 + 0.5 cos theta) is (pi/2, 0)
        m = cosine_model(alpha=1.5)
        assert m.first_moment == pytest.approx([np.pi / 2, 0.0], abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.0, 2.0, -1.0, 2.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValidationError):
            make_stable_model(3, alpha, SpectralDensity.constant(3))

    def test_drift_only_for_alpha_one(self):
        with pytest.raises(ValidationError):
            make_stable_model(2, 1.5, SpectralDensity.constant(2), gamma=[1.0, 0.0])
        m = make_stable_model(2, 1.0, SpectralDensity.constant(2), gamma=[1.0, 0.0])
        assert m.gamma_vec.tolist() == [1.0, 0.0]

    def test_kappa_spec_violation(self):
        with pytest.raises(ValidationError):
            SpectralDensity.cosine(2, 1.0, 0.5, kappa_spec=0.9)

    def test_table_only_in_2d(self):
        with pytest.raises(ValidationError):
            SpectralDensity.from_json(3, {"form": "table", "params": {"angles": [0, 1], "values": [1, 1]}})


class TestTruncated:
    @pytest.mark.parametrize("d,alpha,expected", [(2, 0.5, 4 * np.pi), (3, 1.2, 4 * np.pi / 1.2)])
    def test_lambda(self, d, alpha, expected):
        m = make_truncated_model(d, alpha, SpectralDensity.constant(d))
        assert m.truncation_split.lam == pytest.approx(expected, rel=1e-6)

    def test_lambda_quadrature_oracle(self):
        m = make_truncated_model(2, 0.5, SpectralDensity.cosine(2, 1.0, 0.3))
        parent = m.truncation_split.parent
        # substitute r = 1/s^2 to integrate the tail over (0, 1]
        def inner(theta):
            e = np.array([np.cos(theta), np.sin(theta)])
            f = lambda s: levy_density(parent, e / s**2) * (1 / s**2) * 2 / s**3
            return integrate.quad(f, 0, 1, limit=200)[0]

        lam = integrate.quad(inner, 0, 2 * np.pi, limit=200)[0]
        assert m.truncation_split.lam == pytest.approx(lam, rel=1e-6)

    def test_outside_unit_ball(self):
        m = make_truncated_model(2, 1.5, SpectralDensity.constant(2))
        assert levy_density(m, [2.0, 0.0]) == 0.0
        sp = m.truncation_split
        assert sp.g_density([2.0, 0.0])[0] == 0.0
        assert sp.h_density([2.0, 0.0])[0] == pytest.approx(2 ** -3.5)

    def test_split_sums_to_parent(self):
        m = make_truncated_model(2, 1.1, SpectralDensity.cosine(2, 1.0, 0.4))
        sp = m.truncation_split
        x = np.random.default_rng(0).normal(size=(500, 2)) * 1.5
        assert np.allclose(sp.g_density(x) + sp.h_density(x), levy_density(sp.parent, x), rtol=1e-14)


class TestExponent:
    def test_zero(self):
        assert characteristic_exponent(iso(), np.zeros(2)) == 0

    def test_rotation_invariance(self):
        m = iso()
        z = np.array([0.7, -1.3])
        R = np.array([[np.cos(1.1), -np.sin(1.1)], [np.sin(1.1), np.cos(1.1)]])
        assert characteristic_exponent(m, R @ z) == pytest.approx(characteristic_exponent(m, z), rel=1e-9)

    def test_homogeneity_against_direct_quadrature(self):
        m = iso()
        # real part of psi is the angular integral of int (cos(c r) - 1) r^{-1-alpha} dr
        def direct(z):
            nz = np.linalg.norm(z)
            a = m.alpha

            def inner(theta):
                c = abs(nz * np.cos(theta))
                if c == 0:
                    return 0.0
                head = integrate.quad(lambda r: (np.cos(c * r) - 1) * r ** (-1 - a), 0, 1, limit=200)[0]
                tail = integrate.quad(lambda r: r ** (-1 - a), 1, np.inf, weight="cos", wvar=c)[0]
                return head + tail - 1 / a

            return integrate.quad(inner, 0, 2 * np.pi, limit=200, epsabs=1e-11)[0]

        z = np.array([1.0, 0.0])
        p1, p2 = characteristic_exponent(m, z), characteristic_exponent(m, 2 * z)
        assert p1.real == pytest.approx(direct(z), rel=1e-6)
        assert p2.real == pytest.approx(direct(2 * z), rel=1e-6)
        assert p2 == pytest.approx(2**1.5 * p1, rel=1e-9)

    def test_isotropic_constant(self):
        m = iso()
        assert -characteristic_exponent(m, np.array([0.0, 1.0])).real == pytest.approx(m.scale_constant(), rel=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([0.6, 1.0, 1.5]))
    def test_real_part_nonpositive_and_dual_conjugate(self, a, b, alpha):
        sp = SpectralDensity.constant(2) if alpha == 1.0 else SpectralDensity.cosine(2, 1.0, 0.5)
        m = make_stable_model(2, alpha, sp)
        z = np.array([a, b])
        p = characteristic_exponent(m, z)
        assert p.real <= 1e-12
        assert characteristic_exponent(dual(m), z) == pytest.approx(np.conj(p), rel=1e-9, abs=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.2, 4.0), st.sampled_from([0.7, 1.3]))
    def test_strict_stability(self, s, alpha):
        m = make_stable_model(2, alpha, SpectralDensity.cosine(2, 1.0, 0.5))
        z = np.array([0.4, 0.9])
        assert characteristic_exponent(m, s * z) == pytest.approx(s**alpha * characteristic_exponent(m, z), rel=1e-8)

    def test_truncated_has_no_drift_sign_issue(self):
        m = make_truncated_model(2, 0.5, SpectralDensity.cosine(2, 1.0, 0.5))
        p = characteristic_exponent(m, np.array([1.0, 0.5]))
        assert p.real < 0

    def test_brownian_adds_quadratic(self):
        m = iso()
        mb = add_brownian(m, np.eye(2))
        z = np.array([0.3, 0.8])
        assert characteristic_exponent(mb, z) == pytest.approx(characteristic_exponent(m, z) - 0.5 * z @ z, rel=1e-12)


class TestAssumptions:
    def test_stable_weight(self):
        c = classify_assumption(iso())
        assert c.case == "A1a"
        assert c.L([2.0, 0.0]) == pytest.approx(2**3.5, rel=1e-14)

    def test_truncated_density_bounded_below(self):
        m = make_truncated_model(2, 0.5, SpectralDensity.constant(2))
        c = classify_assumption(m)
        assert c.case == "A1b" and c.R0 == 1.0
        x = np.random.default_rng(1).uniform(-0.35, 0.35, size=(1000, 2))
        x = x[np.linalg.norm(x, axis=1) < 0.5]
        assert np.all(c.M(x) >= 1.0)

    def test_R0_range(self):
        m = make_truncated_model(2, 0.5, SpectralDensity.constant(2))
        with pytest.raises(ValidationError):
            classify_assumption(m, R0=1.5)

    def test_density_at_origin(self):
        with pytest.raises(ValidationError):
            levy_density(iso(), [0.0, 0.0])

    def test_kappa_sandwich(self):
        m = cosine_model()
        k = m.spectral.kappa_spec
        x = np.random.default_rng(2).normal(size=(2000, 2))
        r = np.linalg.norm(x, axis=1) ** -(2 + m.alpha)
        f = levy_density(m, x)
        assert np.all(k * r <= f * (1 + 1e-12)) and np.all(f <= r / k * (1 + 1e-12))


class TestKinds:
    def test_brownian_kinds(self):
        assert add_brownian(iso(), np.eye(2)).kind == "StablePlusBrownian"
        t = make_truncated_model(2, 1.5, SpectralDensity.constant(2))
        assert add_brownian(t, np.eye(2)).kind == "TruncatedPlusBrownian"

    def test_zero_brownian_unchanged_in_law(self):
        m = iso()
        mb = add_brownian(m, np.zeros((2, 2)))
        z = np.array([1.0, 2.0])
        assert characteristic_exponent(mb, z) == characteristic_exponent(m, z)

    def test_dual(self):
        m = cosine_model()
        assert dual(iso()) == iso()
        xi = np.array([[1.0, 0.0], [0.0, 1.0], [-0.6, 0.8]])
        assert np.allclose(dual(m).spectral(xi), 1 - 0.5 * xi[:, 0])
        assert dual(dual(m)) == m

    def test_json_roundtrip(self):
        for m in (cosine_model(), add_brownian(iso(), 2 * np.eye(2)),
                  make_truncated_model(3, 0.8, SpectralDensity.constant(3, 2.0)), dual(cosine_model())):
            back = model_from_json(model_to_json(m))
            z = np.ones(m.d) * 0.7
            assert characteristic_exponent(back, z) == pytest.approx(characteristic_exponent(m, z), rel=1e-12)
            assert back.kind == m.kind

    def test_json_errors(self):
        with pytest.raises(ValidationError, match="missing"):
            model_from_json({"alpha": 1.5})
        with pytest.raises(ValidationError, match="kind"):
            model_from_json({"d": 2, "alpha": 1.5, "kind": "Gamma"})
        with pytest.raises(ValidationError):
            model_from_json({"d": 2, "alpha": 1.5, "A": [[1, 0], [0, 1]]})
