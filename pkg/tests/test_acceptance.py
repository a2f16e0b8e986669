"""Acceptance criteria, run at desk scale on one core.

Each test records a single PASS/FAIL line through the ``criterion``
fixture; the lines are repeated in the terminal summary.  The heavy
simulations are shared through module-scoped fixtures.
"""

import json
import time

import numpy as np
import pytest

from levyiu.cli import main as cli_main
from levyiu.geometry import Domain, ball, make_grid
from levyiu.levy_model import SpectralDensity, characteristic_exponent, make_stable_model, make_truncated_model
from levyiu.rng import RngStream
from levyiu.sampler import (
    cf_zscores, estimate_exit_time_mean, parent_stable, sample_decomposed, sample_increment, sigma_threshold,
    two_sample_cf_zscores,
)
from levyiu.semigroup import (
    check_positivity, dense_eigen_check, dual_transition_matrix, eigenvector_cross_check, estimate_transition_matrices,
    estimate_transition_matrix, green_field, lambda0_consistency, spectral_triple, switching_details,
)
from levyiu.verifier import (
    REFINE_FACTOR, conditioned_lifetime, convergence_rate, exit_time_vs_eigenfunction, green_lower_bound,
    harnack_ratios, iu_constants,
)

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

STEP = 0.005
T_IU = [0.5, 1.0, 2.0]
T_CONV = [1.0, 1.5, 2.0, 3.0]
Z3 = sigma_threshold(3.0)


def unit_ball():
    return Domain((ball((0.0, 0.0), 1.0),))


def iso(alpha=1.5):
    return make_stable_model(2, alpha, SpectralDensity.constant(2))


def aniso():
    return make_stable_model(2, 1.5, SpectralDensity.cosine(2, 1.0, 0.5))


def frequencies(model, dt, n=20):
    """Radii with ``-Re psi dt`` between 0.1 and 2, spread over directions."""
    u = -characteristic_exponent(model, np.array([1.0, 0.0])).real * dt
    r = (np.linspace(0.1, 2.0, n) / u) ** (1.0 / model.alpha)
    ang = 2.4 * np.arange(n)
    return np.c_[r * np.cos(ang), r * np.sin(ang)]


# --------------------------------------------------------------------------
# shared simulations


@pytest.fixture(scope="module")
def iso_levels():
    """Isotropic alpha=1.5 on the unit ball: base grid (all times) and one refinement."""
    m, D = iso(), unit_ball()
    g0, g1 = make_grid(D, 0.25), make_grid(D, 0.125)
    base = estimate_transition_matrices(m, D, g0, sorted(set(T_IU + T_CONV)), 4000, STEP, RngStream(101))
    fine = estimate_transition_matrices(m, D, g1, T_IU, 8000, STEP, RngStream(102))
    base = {P.t: P for P in base}
    fine = {P.t: P for P in fine}
    return {"model": m, "domain": D, "grids": (g0, g1), "base": base, "fine": fine,
            "tri": (spectral_triple(base[1.0]), spectral_triple(fine[1.0]))}


@pytest.fixture(scope="module")
def aniso_levels():
    m, D = aniso(), unit_ball()
    g0, g1 = make_grid(D, 0.4), make_grid(D, 0.2)
    base = {P.t: P for P in estimate_transition_matrices(m, D, g0, T_IU, 2000, STEP, RngStream(201))}
    fine = {P.t: P for P in estimate_transition_matrices(m, D, g1, T_IU, 6000, STEP, RngStream(202))}
    return {"base": base, "fine": fine, "tri": (spectral_triple(base[1.0]), spectral_triple(fine[1.0]))}


@pytest.fixture(scope="module")
def iso_green(iso_levels):
    m, D = iso_levels["model"], iso_levels["domain"]
    g0, g1 = iso_levels["grids"]
    return (green_field(m, D, g0, 4000, RngStream(301), step=STEP),
            green_field(m, D, g1, 16000, RngStream(302), step=STEP))


# --------------------------------------------------------------------------
# 1-3: sampler


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5])
def test_c01_sampler_cf(alpha, criterion):
    m = iso(alpha)
    dt = 1.0
    t0 = time.perf_counter()
    x = sample_increment(m, dt, RngStream(1).child("cf", alpha), size=10**6)
    Z = frequencies(m, dt)
    target = np.exp(dt * np.array([characteristic_exponent(m, z) for z in Z]))
    zs = cf_zscores(x, Z, target)
    elapsed = time.perf_counter() - t0
    ok = bool(zs.max() < Z3 and elapsed <= 120.0)
    criterion(1, f"sampler CF alpha={alpha}", ok, f"max z={zs.max():.2f} (3 sigma={Z3:.2f}) time={elapsed:.1f}s")
    assert zs.max() < Z3
    assert elapsed <= 120.0


def test_c02_decomposition(criterion):
    dt, n = 0.1, 10**6
    worst, zero_z = 0.0, 0.0
    for alpha in (0.5, 1.5):
        tm = make_truncated_model(2, alpha, SpectralDensity.constant(2))
        y, z, counts = sample_decomposed(tm, dt, RngStream(5).child(alpha), size=n, return_counts=True)
        x = sample_increment(parent_stable(tm), dt, RngStream(6).child(alpha), size=n)
        worst = max(worst, float(two_sample_cf_zscores(y + z, x, frequencies(tm, dt)).max()))
        lam = 2 * np.pi / alpha  # int over the circle of phi = 1, divided by alpha
        assert tm.truncation_split.lam == pytest.approx(lam, rel=1e-9)
        p = np.exp(-lam * dt)
        zero_z = max(zero_z, abs(float(np.mean(counts == 0)) - p) / np.sqrt(p * (1 - p) / n))
    ok = worst < Z3 and zero_z < 3.0
    criterion(2, "decomposition X = Y + Z", ok, f"max CF z={worst:.2f}  zero-jump z={zero_z:.2f}")
    assert worst < Z3
    assert zero_z < 3.0


def test_c03_exit_scaling(criterion):
    alpha = 1.5
    m = iso(alpha)
    e1 = estimate_exit_time_mean(m, Domain((ball((0, 0), 1.0),)), [0, 0], 10**5, RngStream(8).child(1))
    e2 = estimate_exit_time_mean(m, Domain((ball((0, 0), 2.0),)), [0, 0], 10**5, RngStream(8).child(2))
    ratio = e2.mean / e1.mean
    rel = abs(ratio / 2**alpha - 1)
    criterion(3, "exit-time scaling 2^alpha", rel < 0.05, f"ratio={ratio:.4f} target={2**alpha:.4f} rel={rel:.4f}")
    assert rel < 0.05


# --------------------------------------------------------------------------
# 4: duality


def test_c04_switching(criterion):
    m, D = aniso(), unit_ball()
    g = make_grid(D, 0.1)
    t0 = time.perf_counter()
    P = estimate_transition_matrix(m, D, g, 1.0, 1000, STEP, RngStream(41))
    Ph = dual_transition_matrix(m, D, g, 1.0, 1000, STEP, RngStream(42))
    sw = switching_details(P, Ph)
    elapsed = time.perf_counter() - t0
    ok = sw.residual < 4.0 and elapsed <= 600.0
    criterion(4, "switching identity", ok, f"residual={sw.residual:.2f} sd over {sw.n_pairs} pairs, "
                                          f"{g.n} cells, time={elapsed:.0f}s")
    assert sw.residual < 4.0
    assert elapsed <= 600.0


# --------------------------------------------------------------------------
# 5-7: spectral objects


def test_c05_spectral(iso_levels, criterion):
    P = iso_levels["base"]
    tri_a, tri_b = spectral_triple(P[0.5]), spectral_triple(P[1.0])
    check_positivity(P[1.0])
    la, lb, gap = lambda0_consistency(P[0.5], P[1.0])
    dense = dense_eigen_check(P[1.0], tri_b)
    cross = eigenvector_cross_check(tri_a, tri_b)
    pos = bool(np.all(tri_b.phi0 > 0) and np.all(tri_b.psi0 > 0))
    dense_max = max(dense.values())
    ok = la < 0 and lb < 0 and gap < 4 and pos and dense_max < 1e-8 and cross < 4
    criterion(5, "spectral sanity", ok, f"lambda0={lb:.3f} gap={gap:.2f} dense={dense_max:.1e} cross z={cross:.2f}")
    assert la < 0 and lb < 0
    assert gap < 4
    assert pos
    assert dense_max < 1e-8
    assert cross < 4


@pytest.mark.parametrize("which", ["isotropic", "anisotropic"])
def test_c06_iu_sandwich(which, iso_levels, aniso_levels, criterion):
    lv = iso_levels if which == "isotropic" else aniso_levels
    c0 = iu_constants([lv["base"][t] for t in T_IU], lv["tri"][0])
    c1 = iu_constants([lv["fine"][t] for t in T_IU], lv["tri"][1])
    worst_factor, worst_flag, finite = 0.0, 0.0, True
    for a, b in zip(c0, c1):
        finite &= all(0 < c < np.inf for c in (a.c_lower, a.c_upper, b.c_lower, b.c_upper))
        worst_flag = max(worst_flag, a.flagged_fraction, b.flagged_fraction)
        f = max(a.c_lower / b.c_lower, b.c_lower / a.c_lower, a.c_upper / b.c_upper, b.c_upper / a.c_upper)
        worst_factor = max(worst_factor, f)
    ok = finite and worst_flag < 0.10 and worst_factor < REFINE_FACTOR
    criterion(6, f"IU sandwich {which}", ok, f"flagged<={worst_flag:.3f} refinement factor<={worst_factor:.2f}")
    assert finite
    assert worst_flag < 0.10
    assert worst_factor < REFINE_FACTOR


def test_c07_convergence(iso_levels, criterion):
    P = iso_levels["base"]
    fit = convergence_rate([P[t] for t in T_CONV], iso_levels["tri"][0], rng=7)
    ok = fit.verdict == "pass"
    criterion(7, "exponential convergence", ok,
              f"{fit.status}: slope={-fit.nu_rate:.3f} resid={fit.fit_residual:.2f} below={fit.below_noise}")
    assert ok


# --------------------------------------------------------------------------
# 8-10: exit times, Harnack, lifetimes


def test_c08_exit_comparability(iso_levels, iso_green, criterion):
    tri0, tri1 = iso_levels["tri"]
    e0 = exit_time_vs_eigenfunction(iso_green[0], tri0)
    e1 = exit_time_vs_eigenfunction(iso_green[1], tri1)
    gb = green_lower_bound(iso_green[0], tri0)
    vals = [e0.sup_phi, e0.inf_phi, e0.sup_psi, e0.inf_psi]
    finite = all(0 < v < np.inf for v in vals)
    factor = e0.factor_vs(e1)
    ok = finite and factor < 2 and gb.c1 > 0 and gb.c2 > 0
    criterion(8, "exit-time comparability", ok,
              f"E tau/phi0 in [{e0.inf_phi:.3g}, {e0.sup_phi:.3g}] factor={factor:.2f} c1={gb.c1:.3g} c2={gb.c2:.3g}")
    assert finite
    assert factor < 2
    assert gb.c1 > 0 and gb.c2 > 0


def test_c09_harnack(iso_levels, criterion):
    P1 = iso_levels["base"][1.0]
    h = harnack_ratios(P1, P1, 1.0, RngStream(91), n_tuples=10_000)
    h2 = harnack_ratios(P1, P1, 1.0, RngStream(91), n_tuples=20_000)
    factor = max(h.c / h2.c, h2.c / h.c)
    ok = h.c > 0 and factor <= REFINE_FACTOR and h.identity_max == 1.0 and h.c <= 1.0
    criterion(9, "boundary Harnack", ok, f"c={h.c:.3g} doubled={h2.c:.3g} identity max={h.identity_max!r}")
    assert h.c > 0
    assert factor <= REFINE_FACTOR
    assert h.identity_max == 1.0 and h.c <= 1.0


def test_c10_conditioned_lifetime(iso_levels, iso_green, criterion):
    P1, tri = iso_levels["base"][1.0], iso_levels["tri"][0]
    L1 = conditioned_lifetime(P1, tri.phi0, tri.lambda0, check_geometric=True)
    G = iso_green[0].G
    y0 = int(np.argmin(np.linalg.norm(iso_levels["grids"][0].centers, axis=1)))
    col = G[:, y0]
    L2 = conditioned_lifetime(P1, col, tri.lambda0, k_max=50)
    early = abs(L2.rates[0] - tri.lambda0) / abs(tri.lambda0)
    ok = (L1.geometric_gap < 1e-10 and np.isfinite(L2.sup) and L2.rate_rel_error < 0.10
          and L2.rate_rel_error <= early)
    criterion(10, "conditioned lifetime", ok,
              f"geometric gap={L1.geometric_gap:.1e} green sup={L2.sup:.3g} rate err={L2.rate_rel_error:.2e}")
    assert L1.geometric_gap < 1e-10
    assert np.isfinite(L2.sup)
    assert L2.rate_rel_error < 0.10
    assert L2.rate_rel_error <= early


# --------------------------------------------------------------------------
# 11-12: pipeline


def _write(tmp_path, doc, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


def test_c11_hypothesis_violation(tmp_path, criterion):
    doc = {
        "model": {"d": 2, "alpha": 1.5, "kind": "TruncatedStable"},
        "domain": {"pieces": [{"type": "ball", "center": [0, 0], "radius": 0.5},
                              {"type": "ball", "center": [2.5, 0], "radius": 0.5}]},
        "resolution": 0.2, "t_list": [0.5, 1.0], "n_paths": 1000, "green_paths": 1000, "step": STEP, "seed": 3,
    }
    out = tmp_path / "out"
    code = cli_main(["run", _write(tmp_path, doc), "--out", str(out)])
    rep = json.loads((out / "report.json").read_text())
    cross = rep["details"].get("cross_component", {})
    ok = code == 2 and cross.get("max_entry") == 0.0 and cross.get("flagged") is True
    criterion(11, "hypothesis-violation honesty", ok, f"exit code={code} cross-component max={cross.get('max_entry')}")
    assert code == 2
    assert rep["verdicts"]["hypotheses"]["status"] == "fail"
    assert cross["max_entry"] == 0.0 and cross["flagged"] is True


def test_c12_determinism(tmp_path, criterion):
    doc = {
        "model": {"d": 2, "alpha": 1.5, "kind": "Stable", "spectral": {"form": "cosine", "params": {"a": 1.0, "b": 0.5}}},
        "domain": {"pieces": [{"type": "ball", "center": [0, 0], "radius": 1}]},
        "resolution": 0.5, "t_list": [0.5, 1.0], "convergence_t_list": [1.0, 1.5, 2.0, 2.5],
        "n_paths": 1000, "green_paths": 1000, "step": 0.01, "seed": 12,
    }
    cfg = _write(tmp_path, doc)
    a, b = tmp_path / "a", tmp_path / "b"
    ca = cli_main(["run", cfg, "--out", str(a)])
    cb = cli_main(["run", cfg, "--out", str(b)])
    same = (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    criterion(12, "determinism", same and ca == cb, f"byte-identical={same} exit codes={ca},{cb}")
    assert same
    assert ca == cb
