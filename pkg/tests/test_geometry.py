import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyiu.errors import ValidationError
from levyiu.geometry import (
    Domain, ball, box, certify_kappa_fat, component_labels, dist_to_boundary, domain_from_json, inner_sets,
    make_grid, roughly_connected,
)
from levyiu.levy_model import SpectralDensity, make_truncated_model


def unit_ball():
    return Domain((ball((0, 0), 1.0),))


def brute_distance(domain, x, m=200_000):
    """Distance to the union boundary by dense sampling of every piece boundary."""
    pts = []
    for p in domain.pieces:
        th = np.linspace(0, 2 * np.pi, m, endpoint=False)
        pts.append(np.asarray(p.center) + p.radius * np.c_[np.cos(th), np.sin(th)])
    b = np.vstack(pts)
    # keep only points that are not interior to another piece
    b = b[~domain.contains(b)]
    return float(np.min(np.linalg.norm(b - x, axis=1)))


class TestDistance:
    def test_ball(self):
        D = unit_ball()
        assert dist_to_boundary(D, np.zeros(2)) == pytest.approx(1.0)
        assert dist_to_boundary(D, np.array([0.5, 0.0])) == pytest.approx(0.5)

    def test_outside_is_zero_or_negative(self):
        assert dist_to_boundary(unit_ball(), np.array([2.0, 0.0])) <= 0

    def test_overlapping_balls_against_sampling(self):
        D = Domain((ball((0, 0), 1.0), ball((1, 0), 1.0)))
        x = np.array([0.5, 0.0])
        ref = brute_distance(D, x)
        assert ref == pytest.approx(np.sqrt(3) / 2, abs=1e-4)
        assert dist_to_boundary(D, x) == pytest.approx(ref, abs=1e-3)

    def test_box(self):
        D = Domain((box((0, 0), (2, 1)),))
        assert dist_to_boundary(D, np.array([1.0, 0.5])) == pytest.approx(0.5)
        assert dist_to_boundary(D, np.array([0.1, 0.5])) == pytest.approx(0.1)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_lipschitz(self, seed):
        D = Domain((ball((0, 0), 1.0), ball((1.2, 0.3), 0.7), box((-0.5, -1.2), (0.5, -0.6))))
        gen = np.random.default_rng(seed)
        x = gen.uniform(-1.5, 2.0, size=(200, 2))
        y = x + gen.normal(scale=0.2, size=x.shape)
        rx, ry = D.dist_to_boundary(x), D.dist_to_boundary(y)
        assert np.all(np.abs(rx - ry) <= np.linalg.norm(x - y, axis=1) + 1e-9)


class TestKappaFat:
    def test_unit_ball_passes(self):
        cert = certify_kappa_fat(unit_ball(), 0.5, 1.0)
        assert cert.passed and cert.n_probes > 0

    def test_spike_fails_near_spike(self):
        # a thin protrusion has no room for a ball of radius r/2 inside B(Q, r)
        D = Domain((ball((0, 0), 1.0), box((0.9, -0.01), (1.6, 0.01))))
        cert = certify_kappa_fat(D, 0.5, 0.5)
        assert not cert.passed
        q = np.array([f["Q"] for f in cert.failures])
        assert np.all(q[:, 0] > 0.85)

    def test_kappa_range(self):
        with pytest.raises(ValidationError):
            certify_kappa_fat(unit_ball(), 0.6, 1.0)


class TestRoughlyConnected:
    def test_gap_below_one(self):
        assert roughly_connected(Domain((ball((0, 0), 1), ball((2.5, 0), 1))))

    def test_gap_above_one(self):
        g = roughly_connected(Domain((ball((0, 0), 1), ball((3.5, 0), 1))))
        assert not g
        assert g.distances[0, 1] == pytest.approx(1.5)

    def test_chain(self):
        D = Domain((ball((0, 0), 0.5), ball((1.9, 0), 0.5), ball((3.8, 0), 0.5)))
        g = roughly_connected(D)
        assert g and len(g.components) == 3
        assert g.distances[0, 2] > 1

    def test_component_labels(self):
        D = Domain((ball((0, 0), 0.5), ball((0.5, 0), 0.5), ball((3, 0), 0.5)))
        lab = component_labels(D, np.array([[0, 0], [0.6, 0], [3, 0], [10, 0]], dtype=float))
        assert lab[0] == lab[1] != lab[2] and lab[3] == -1


class TestInnerSets:
    def test_a4a(self):
        s = inner_sets(unit_ball(), "A4a", {"x0": [0, 0], "r0": 0.25})
        assert s.B0.describe()["radius"] == 0.125
        assert s.C1.describe() == {"type": "ball", "center": [0.0, 0.0], "radius": 0.25, "closed": True}
        assert s.B2.describe()["radius"] == 0.5

    def test_a4b_levels(self):
        cert = certify_kappa_fat(unit_ball(), 0.5, 0.5)
        s = inner_sets(unit_ball(), "A4b", {"certificate": cert})
        assert s.B0.describe()["level"] == pytest.approx(0.125)
        assert s.C1.describe()["level"] == pytest.approx(0.0625)
        assert s.B2.describe()["level"] == pytest.approx(0.03125)

    def test_truncated_needs_small_R(self):
        cert = certify_kappa_fat(unit_ball(), 0.5, 0.9)
        m = make_truncated_model(2, 1.5, SpectralDensity.constant(2))
        with pytest.raises(ValidationError, match="R0/2"):
            inner_sets(unit_ball(), "A4b", {"certificate": cert, "model": m, "R0": 1.0})

    @pytest.mark.parametrize("case", ["A4a", "A4b"])
    def test_nesting(self, case):
        D = Domain((ball((0, 0), 1.0), box((0.5, -0.5), (1.8, 0.5))))
        if case == "A4a":
            s = inner_sets(D, case, {"x0": [0, 0], "r0": 0.3})
        else:
            # square corners are only fat for kappa below 1/(2 + sqrt 2)
            s = inner_sets(D, case, {"certificate": certify_kappa_fat(D, 0.25, 0.5)})
        x = np.random.default_rng(4).uniform(-1.2, 2.0, size=(10_000, 2))
        b0, c1, b2, d = s.B0.contains(x), s.C1.contains(x), s.B2.contains(x), D.contains(x)
        assert np.all(~b0 | c1) and np.all(~c1 | b2) and np.all(~b2 | d)
        assert b0.any()

    def test_a4a_ball_must_fit(self):
        with pytest.raises(ValidationError):
            inner_sets(unit_ball(), "A4a", {"x0": [0.8, 0], "r0": 0.25})


class TestGrid:
    def test_unit_square(self):
        g = make_grid(Domain((box((0, 0), (1, 1)),)), 0.25)
        assert g.n == 16
        assert g.boundary_layer_fraction == 0.0
        assert g.volumes.sum() == pytest.approx(1.0)

    def test_unit_ball_count(self):
        g = make_grid(unit_ball(), 0.1)
        assert 0.9 * np.pi / 0.01 <= g.n <= 1.1 * np.pi / 0.01

    def test_resolution_too_large(self):
        with pytest.raises(ValidationError):
            make_grid(unit_ball(), 3.0)

    def test_locate_roundtrip(self):
        g = make_grid(unit_ball(), 0.2)
        assert np.array_equal(g.locate(g.centers), np.arange(g.n))
        assert g.locate(np.array([[5.0, 5.0]]))[0] == -1

    def test_edge_cells(self):
        g = make_grid(unit_ball(), 0.2)
        r = np.linalg.norm(g.centers, axis=1)
        assert g.edge[np.argmax(r)] and not g.edge[np.argmin(r)]

    def test_csv(self, tmp_path):
        g = make_grid(unit_ball(), 0.5)
        g.to_csv(tmp_path / "g.csv")
        lines = (tmp_path / "g.csv").read_text().splitlines()
        assert len(lines) == g.n + 1


class TestJson:
    def test_roundtrip(self):
        D = Domain((ball((0, 0), 1.0), box((0.5, -0.5), (1.8, 0.5))))
        back = domain_from_json(D.to_json())
        x = np.random.default_rng(5).uniform(-2, 2, size=(1000, 2))
        assert np.array_equal(back.contains(x), D.contains(x))

    def test_errors(self):
        with pytest.raises(ValidationError):
            domain_from_json({"pieces": []})
        with pytest.raises(ValidationError):
            domain_from_json({"pieces": [{"type": "ball", "center": [0, 0], "radius": -1}]})
        with pytest.raises(ValidationError):
            domain_from_json({"pieces": [{"type": "torus"}]})
