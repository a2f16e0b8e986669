"""Numerical certificates for intrinsic ultracontractivity and its consequences.

Every check works on precomputed grid fields (transition matrices, the
Green field, the spectral triple).  Entries whose Monte Carlo standard
error exceeds half their value are flagged and excluded from extreme-value
statistics; the flagged fraction is always reported.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .errors import GridMismatchError, ValidationError
from .rng import as_stream
from .sampler import PATH_JUMPS, IncrementSampler, auto_step

FLAG_RATIO = 0.5
MAX_FLAGGED = 0.10
REFINE_FACTOR = 2.0

PASS, FAIL = "pass", "fail"
MC_NOISE, DISCRETIZATION, HYPOTHESIS, GENUINE = "mc_noise", "discretization", "hypothesis_violated", "genuine_violation"

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS = 0, 1, 2


def flag_mask(value, stderr, ratio=FLAG_RATIO):
    """True where an estimate is zero or its relative error exceeds ``ratio``."""
    value = np.asarray(value)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.asarray(stderr) / value
    return ~(value > 0) | ~(rel <= ratio)


def _check_grid(P, tri):
    if not P.grid.same_as(tri.grid):
        raise GridMismatchError("matrix and triple live on different grids")


# --------------------------------------------------------------------------
# IU sandwich


@dataclass
class IUConstants:
    t: float
    c_lower: float
    c_upper: float
    c_lower_conf: float
    flagged_fraction: float
    eigen_mean: float
    weighted_mean: float
    argmin: tuple
    argmax: tuple

    @property
    def coherent(self):
        return self.c_lower <= self.eigen_mean <= self.c_upper


def ratio_field(P, tri):
    """``r[i, j] = p(t, x_i, y_j) / (phi0_i psi0_j)`` on the grid."""
    _check_grid(P, tri)
    return P.density / np.outer(tri.phi0, tri.psi0)


def iu_constants(P_list, tri):
    """Inf and sup of the IU ratio field for each matrix.

    Parameters
    ----------
    P_list : sequence of SubstochasticMatrix
    tri : SpectralTriple

    Returns
    -------
    list of IUConstants
        ``c_lower_conf`` replaces each unflagged density by its value minus
        two standard errors.  ``eigen_mean`` is ``exp(lambda0 t)/int phi0
        psi0``; ``weighted_mean`` is the average of the ratio field with
        weights ``psi0_i phi0_i phi0_j psi0_j vol_i vol_j``, which equals
        ``eigen_mean`` when the triple belongs to the matrix.
    """
    out = []
    vol = tri.grid.volumes
    inner = tri.inner()
    for P in P_list:
        r = ratio_field(P, tri)
        flag = flag_mask(P.entries, P.stderr)
        if np.all(flag):
            raise ValidationError(f"every entry is flagged at t={P.t}")
        rr = np.where(flag, np.nan, r)
        kmin, kmax = int(np.nanargmin(rr)), int(np.nanargmax(rr))
        lo_d = np.clip(P.entries - 2 * P.stderr, 0, None) / vol[None, :]
        conf = np.where(flag, np.nan, lo_d / np.outer(tri.phi0, tri.psi0))
        w = np.outer(tri.psi0 * tri.phi0 * vol, tri.phi0 * tri.psi0 * vol)
        out.append(IUConstants(
            t=float(P.t),
            c_lower=float(rr.flat[kmin]),
            c_upper=float(rr.flat[kmax]),
            c_lower_conf=float(np.nanmin(conf)),
            flagged_fraction=float(flag.mean()),
            eigen_mean=float(np.exp(tri.lambda0 * P.t) / inner),
            weighted_mean=float(np.sum(w * r) / np.sum(w)),
            argmin=divmod(kmin, P.n),
            argmax=divmod(kmax, P.n),
        ))
    return out


# --------------------------------------------------------------------------
# exponential convergence


@dataclass
class ConvergenceFit:
    t: list
    m: list
    max_z: list
    noise_floor: list
    below_noise: list
    nu_rate: float
    nu_intercept: float
    fit_residual: float
    verdict: str
    status: str


def deviation_field(P, tri):
    """``e^{-lambda0 t} (int phi0 psi0) r_t - 1`` and its standard error under the rank-one null.

    The null entry is ``P0 = e^{lambda0 t} phi0_i psi0_j vol_j / int phi0
    psi0``.  Its count variance ``deff (W_i/N) P0`` and row-weight variance
    are evaluated at ``P0`` rather than at the observed value, which keeps
    small-count cells from producing spuriously large scores.
    """
    vol = P.grid.volumes
    P0 = np.exp(tri.lambda0 * P.t) * np.outer(tri.phi0, tri.psi0 * vol) / tri.inner()
    dev = P.entries / P0 - 1.0
    w = P.row_weight if P.row_weight is not None else np.ones(P.n)
    rv = P.row_relvar if P.row_relvar is not None else np.zeros(P.n)
    rel2 = P.design_effect * (w[:, None] / P.n_paths) / P0 + rv[:, None]
    rel2 = rel2 + (P.t * tri.lambda0_se) ** 2
    if tri.phi0_se is not None:
        rel2 = rel2 + ((tri.phi0_se / tri.phi0) ** 2)[:, None] + ((tri.psi0_se / tri.psi0) ** 2)[None, :]
    return dev, np.sqrt(rel2)


def null_max_deviation(P, tri, gen, n_rep=200):
    """Replicates of ``m(t)`` under the rank-one null and the fitted noise model.

    Each replicate draws log-normal row weights, over-dispersed Poisson
    counts around the null entries, and log-normal perturbations of
    ``phi0``, ``psi0`` and ``exp(lambda0 t)`` at their standard errors, then
    applies the same flagging rule as the observed field.
    """
    vol = P.grid.volumes
    P0 = np.exp(tri.lambda0 * P.t) * np.outer(tri.phi0, tri.psi0 * vol) / tri.inner()
    w = P.row_weight if P.row_weight is not None else np.ones(P.n)
    rv = P.row_relvar if P.row_relvar is not None else np.zeros(P.n)
    deff = max(P.design_effect, 1e-12)
    unit = w[:, None] / P.n_paths  # probability mass of one count
    mu = P0 / unit / deff
    s_w = np.sqrt(np.log1p(rv))
    s_phi = np.zeros(P.n) if tri.phi0_se is None else np.sqrt(np.log1p((tri.phi0_se / tri.phi0) ** 2))
    s_psi = np.zeros(P.n) if tri.psi0_se is None else np.sqrt(np.log1p((tri.psi0_se / tri.psi0) ** 2))
    s_lam = P.t * tri.lambda0_se
    out = np.empty(n_rep)
    for r in range(n_rep):
        cnt = gen.poisson(mu) * deff
        fw = np.exp(s_w * gen.standard_normal(P.n) - 0.5 * s_w**2)
        Ps = fw[:, None] * cnt * unit
        se = np.sqrt(deff * cnt) * unit * fw[:, None]
        ok = (Ps > 0) & (se <= FLAG_RATIO * Ps)
        ft = np.exp(s_phi * gen.standard_normal(P.n))[:, None] * np.exp(s_psi * gen.standard_normal(P.n))[None, :]
        ft = ft * np.exp(s_lam * gen.standard_normal())
        dev = Ps / (P0 * ft) - 1.0
        out[r] = np.max(np.abs(dev[ok])) if ok.any() else 0.0
    return out


def convergence_rate(P_list, tri, residual_tol=0.5, min_t=1.0, level=0.95, rng=0, n_rep=200):
    """Fit ``log m(t) = log c - nu t`` over the time mesh.

    ``m(t)`` is the largest unflagged deviation.  A time point is below
    the noise floor when ``m(t)`` does not exceed the ``level`` quantile of
    :func:`null_max_deviation`.  Pass iff the slope is negative with RMS fit
    residual below ``residual_tol``, or every point is below the noise
    floor.
    """
    if len(P_list) < 4:
        raise ValidationError("convergence_rate needs at least 4 time points")
    ts = [float(P.t) for P in P_list]
    if any(t < min_t for t in ts):
        raise ValidationError(f"convergence_rate needs t >= {min_t}")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValidationError("times must be strictly increasing")
    st = as_stream(rng).child("noise_floor")
    ms, zs, floors, below = [], [], [], []
    for P in P_list:
        dev, se = deviation_field(P, tri)
        ok = ~flag_mask(P.entries, P.stderr)
        m = float(np.max(np.abs(dev[ok])))
        ms.append(m)
        zs.append(float(np.max(np.abs(dev[ok]) / se[ok])))
        floor = float(np.quantile(null_max_deviation(P, tri, st.child(P.t).generator(), n_rep), level))
        floors.append(floor)
        below.append(bool(m <= floor))
    t = np.asarray(ts)
    y = np.log(np.maximum(np.asarray(ms), 1e-300))
    slope, icpt = np.polyfit(t, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * t + icpt)) ** 2)))
    if all(below):
        verdict, status = PASS, "converged below noise"
    elif slope < 0 and resid < residual_tol:
        verdict, status = PASS, "exponential decay"
    else:
        verdict, status = FAIL, "no exponential decay"
    return ConvergenceFit(ts, ms, zs, floors, below, float(-slope), float(np.exp(icpt)), resid, verdict, status)


# --------------------------------------------------------------------------
# exit times, Green function


@dataclass
class ExitRatios:
    sup_phi: float
    inf_phi: float
    sup_psi: float
    inf_psi: float
    c3: float

    def factor_vs(self, other):
        """Largest multiplicative change of the four extremes against ``other``."""
        a = np.array([self.sup_phi, self.inf_phi, self.sup_psi, self.inf_psi])
        b = np.array([other.sup_phi, other.inf_phi, other.sup_psi, other.inf_psi])
        return float(np.max(np.maximum(a / b, b / a)))


def exit_time_vs_eigenfunction(green, tri):
    """Extremes of ``E_x[tau]/phi0(x)`` and ``E_y[tau_hat]/psi0(y)``.

    ``c3`` is the smallest constant with ``c3^{-1} E_x[tau] <= phi0(x) <=
    c3 E_x[tau]`` on the grid for both pairs.
    """
    if not green.grid.same_as(tri.grid):
        raise GridMismatchError("Green field and triple live on different grids")
    r1 = green.mean_exit / tri.phi0
    dme = green.dual_mean_exit if green.dual_mean_exit is not None else green.mean_exit
    r2 = dme / tri.psi0
    c3 = max(r1.max(), 1 / r1.min(), r2.max(), 1 / r2.min())
    return ExitRatios(float(r1.max()), float(r1.min()), float(r2.max()), float(r2.min()), float(c3))


@dataclass
class GreenBound:
    c1: float
    c2: float
    c1_conf: float
    c2_conf: float
    flagged_fraction: float
    row_consistency: float


def green_lower_bound(green, tri):
    """``c1 = min G/(E tau E tau_hat)`` and ``c2 = min G/(phi0 psi0)`` on unflagged cells.

    The ``*_conf`` versions use ``G - 2 se`` in place of ``G``.
    """
    if not green.grid.same_as(tri.grid):
        raise GridMismatchError("Green field and triple live on different grids")
    G, se = green.G, green.G_se
    flag = flag_mask(G, se)
    dme = green.dual_mean_exit if green.dual_mean_exit is not None else green.mean_exit
    ee = np.outer(green.mean_exit, dme)
    pp = np.outer(tri.phi0, tri.psi0)
    keep = ~flag
    conf = np.clip(G - 2 * se, 0, None)
    if not keep.any():
        return GreenBound(0.0, 0.0, 0.0, 0.0, 1.0, green.consistency())
    return GreenBound(
        c1=float(np.min(G[keep] / ee[keep])),
        c2=float(np.min(G[keep] / pp[keep])),
        c1_conf=float(np.min(conf[keep] / ee[keep])),
        c2_conf=float(np.min(conf[keep] / pp[keep])),
        flagged_fraction=float(flag.mean()),
        row_consistency=green.consistency(),
    )


def chebyshev_constant(P_list, green):
    """Single constant ``C`` with ``p(t,x,y) <= C t^{-2} E_x[tau] E_y[tau_hat]``."""
    dme = green.dual_mean_exit if green.dual_mean_exit is not None else green.mean_exit
    ee = np.outer(green.mean_exit, dme)
    c = 0.0
    for P in P_list:
        keep = ~flag_mask(P.entries, P.stderr)
        if keep.any():
            c = max(c, float(np.max(P.density[keep] * P.t**2 / ee[keep])))
    return c


def density_bound_constant(P_list, model):
    """Fitted ``c`` in ``p(t,x,y) <= c t^{-d/alpha}`` (times ``e^{lambda t}`` for truncated kinds)."""
    c = 0.0
    lam = model.eta_mass / model.alpha if model.is_truncated else 0.0
    for P in P_list:
        c = max(c, float(P.density.max()) * P.t ** (model.d / model.alpha) * np.exp(-lam * P.t))
    return c


# --------------------------------------------------------------------------
# boundary Harnack


@dataclass
class HarnackResult:
    c: float
    c_family1: float
    c_family2: float
    n_tuples: int
    n_excluded: int
    c_half: float
    stable: bool
    identity_max: float


def _tuples(gen, n, cells, edge, m_uniform, m_edge):
    u = gen.integers(0, n, size=(m_uniform, 4))
    if edge.size and m_edge:
        e = gen.integers(0, n, size=(m_edge, 4))
        e[:, 1] = edge[gen.integers(0, edge.size, m_edge)]
        e[:, 2] = edge[gen.integers(0, edge.size, m_edge)]
        u = np.concatenate([u, e])
    return u


def _harnack_min(pt, ps, ok_t, ok_s, tup):
    x, y, z, v = tup.T
    # family 1: p(t,x,y)/p(t,x,z) >= c p(s,v,y)/p(s,v,z)
    good1 = ok_t[x, y] & ok_t[x, z] & ok_s[v, y] & ok_s[v, z]
    with np.errstate(invalid="ignore", divide="ignore"):
        r1 = (pt[x, y] / pt[x, z]) / (ps[v, y] / ps[v, z])
    # family 2: p(t,y,x)/p(t,z,x) >= c p(s,y,v)/p(s,z,v)
    good2 = ok_t[y, x] & ok_t[z, x] & ok_s[y, v] & ok_s[z, v]
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = (pt[y, x] / pt[z, x]) / (ps[y, v] / ps[z, v])
    c1 = float(np.min(r1[good1])) if good1.any() else np.nan
    c2 = float(np.min(r2[good2])) if good2.any() else np.nan
    return c1, c2, int((~good1).sum() + (~good2).sum())


def harnack_ratios(P_t, P_s, u, rng, n_tuples=10_000, stable_factor=REFINE_FACTOR):
    """Worst sampled constant of the parabolic boundary Harnack inequalities.

    Tuples ``(x, y, z, v)`` are ``n_tuples`` uniform draws plus
    ``n_tuples`` draws with ``y`` and ``z`` in boundary-adjacent cells.
    When ``s == t`` the identity tuples ``v = x`` are included, so ``c <= 1``.
    Stability compares the constant from the first half of the sample with
    the full sample.
    """
    if P_t.t < u or P_s.t < u:
        raise ValidationError("both times must be at least u")
    if not P_t.grid.same_as(P_s.grid):
        raise GridMismatchError("matrices live on different grids")
    gen = as_stream(rng).child("harnack", float(P_t.t), float(P_s.t)).generator()
    n = P_t.n
    edge = np.flatnonzero(P_t.grid.edge) if P_t.grid.edge is not None else np.zeros(0, dtype=int)
    pt, ps = P_t.density, P_s.density
    ok_t = ~flag_mask(P_t.entries, P_t.stderr)
    ok_s = ~flag_mask(P_s.entries, P_s.stderr)
    half = n_tuples // 2
    a = _tuples(gen, n, None, edge, half, half)
    b = _tuples(gen, n, None, edge, n_tuples - half, n_tuples - half)
    full = np.concatenate([a, b])
    ident_max = float("nan")
    if P_t.t == P_s.t:
        idt = full.copy()
        idt[:, 3] = idt[:, 0]
        c1i, c2i, _ = _harnack_min(pt, ps, ok_t, ok_s, idt)
        x, y, z = idt[:, 0], idt[:, 1], idt[:, 2]
        okk = ok_t[x, y] & ok_t[x, z]
        with np.errstate(invalid="ignore", divide="ignore"):
            rid = (pt[x, y] / pt[x, z]) / (ps[x, y] / ps[x, z])
        ident_max = float(np.max(rid[okk])) if okk.any() else float("nan")
        a = np.concatenate([a, idt[: idt.shape[0] // 2]])
        full = np.concatenate([full, idt])
    h1, h2, _ = _harnack_min(pt, ps, ok_t, ok_s, a)
    f1, f2, excl = _harnack_min(pt, ps, ok_t, ok_s, full)
    c_half = float(np.nanmin([h1, h2]))
    c = float(np.nanmin([f1, f2]))
    stable = bool(c > 0 and c_half / c <= stable_factor)
    return HarnackResult(c, f1, f2, int(full.shape[0]), excl, c_half, stable, ident_max)


def ratio_propagation(P_t, P_s, c, rng, n_tuples=2000):
    """Check that a ratio bound at time ``t`` transfers to ``s > t`` on the transposed family.

    Measures the smallest ``c'`` with ``p(s,y,x)/p(s,z,x) >= c' p(t,y,v)/p(t,z,v)``
    on sampled tuples and reports whether ``c' >= c`` within Monte Carlo
    noise (a factor ``exp(-3 sigma)`` from the four relative errors).
    """
    if not P_s.t > P_t.t:
        raise ValidationError("need s > t")
    gen = as_stream(rng).child("mar", float(P_t.t), float(P_s.t)).generator()
    n = P_t.n
    tup = gen.integers(0, n, size=(n_tuples, 4))
    x, y, z, v = tup.T
    ok_t = ~flag_mask(P_t.entries, P_t.stderr)
    ok_s = ~flag_mask(P_s.entries, P_s.stderr)
    good = ok_s[y, x] & ok_s[z, x] & ok_t[y, v] & ok_t[z, v]
    ds, dt = P_s.density, P_t.density
    with np.errstate(invalid="ignore", divide="ignore"):
        lhs = ds[y, x] / ds[z, x]
        rhs = dt[y, v] / dt[z, v]
        rel = np.sqrt(sum((P.stderr[i, j] / P.entries[i, j]) ** 2
                          for P, i, j in ((P_s, y, x), (P_s, z, x), (P_t, y, v), (P_t, z, v))))
    cp = float(np.min(lhs[good] / rhs[good])) if good.any() else float("nan")
    slack = np.exp(-3 * rel[good]) if good.any() else np.ones(0)
    holds = bool(np.all(lhs[good] >= c * rhs[good] * slack))
    return {"c_prime": cp, "c": float(c), "holds": holds, "n_tuples": int(good.sum())}


# --------------------------------------------------------------------------
# conditioned lifetime


@dataclass
class LifetimeResult:
    mean_lifetime: np.ndarray
    sup: float
    rates: np.ndarray
    rate_final: float
    rate_rel_error: float
    geometric_gap: float


def conditioned_lifetime(P, h, lambda0=None, k_max=50, check_geometric=False):
    """Mean lifetime and tail rate of the ``h``-transformed chain.

    ``Q[i, j] = P[i, j] h_j / h_i``; the lifetime from cell ``i`` is
    ``t * sum_{k>=1} (Q^k 1)_i``, solved exactly from ``(I - Q) m = t Q 1``.
    ``rates[k-1] = log((Q^k 1)_i)/(k t)`` averaged over start cells.

    With ``check_geometric`` (for ``h = phi0``) ``geometric_gap`` is the
    largest relative gap between the solve and ``t rho/(1 - rho)``.
    """
    A = P.entries
    h = np.asarray(h, dtype=float)
    if h.shape != (A.shape[0],):
        raise ValidationError("h must be an n-vector")
    if not np.all(h > 0):
        raise ValidationError("h must be strictly positive")
    Q = A * h[None, :] / h[:, None]
    n = A.shape[0]
    one = np.ones(n)
    # spectral radius bound through row sums of powers
    v = one.copy()
    logs = 0.0
    rates = []
    t = P.t
    for k in range(1, k_max + 1):
        v = Q @ v
        s = v.max()
        if not s > 0:
            raise ValidationError("transformed chain dies out")
        logs += np.log(s)
        v = v / s
        rates.append(float(np.mean(np.log(v) + logs)) / (k * t))
    rates = np.asarray(rates)
    if rates[-1] >= 0:
        raise ValidationError("spectral radius of the transformed chain is not below 1")
    m = t * linalg.solve(np.eye(n) - Q, Q @ one)
    gap = float("nan")
    rho = None
    if check_geometric:
        rho = float(np.mean(Q @ one))
        ref = t * rho / (1 - rho)
        gap = float(np.max(np.abs(m - ref)) / ref)
    if lambda0 is None:
        rel = float("nan")
    else:
        rel = float(abs(rates[-1] - lambda0) / abs(lambda0))
    return LifetimeResult(m, float(m.max()), rates, float(rates[-1]), rel, gap)


# --------------------------------------------------------------------------
# regeneration estimates


@dataclass
class RegenerationReport:
    hit_ratio_inf: float
    hit_ratio_inf_dual: float
    t0: float
    t0_dual: float
    main_c: float
    main_c_dual: float
    n_mesh: int
    n_mesh_C1: int
    passed: bool


def _run_until(model, step, gen, X0, inside, n_jumps, max_steps):
    """Steps i.i.d. paths until ``inside`` fails; returns exit step and exit points."""
    sampler = IncrementSampler(model, step, n_jumps=n_jumps)
    x = np.array(X0, dtype=float)
    m = x.shape[0]
    idx = np.arange(m)
    k_exit = np.full(m, max_steps, dtype=np.int64)
    xe = x.copy()
    for k in range(1, max_steps + 1):
        if not idx.size:
            break
        x = x + sampler.draw(gen, idx.size)
        ok = inside(x)
        k_exit[idx[~ok]] = k
        xe[idx[~ok]] = x[~ok]
        x, idx = x[ok], idx[ok]
    return k_exit, xe


def _regen_one(model, domain, sets, mesh, mesh_c1, n_paths, step, gen, n_jumps, max_steps, t0_override=None):
    C1, B2 = sets.C1, sets.B2
    # (i) hitting C1 on leaving D \ C1 against the mean of that exit time
    ratios = []
    for x in mesh:
        X = np.repeat(x[None, :], n_paths, axis=0)
        k, xe = _run_until(model, step, gen, X, lambda p: domain.contains(p) & ~C1.contains(p), n_jumps, max_steps)
        hit = C1.contains(xe).mean()
        eta = k.mean() * step
        ratios.append(hit / eta)
    # (ii) Feller separation time: largest t with inf_y P_y(tau_B2 > t) >= 1/2
    med = []
    for y in mesh_c1:
        X = np.repeat(y[None, :], n_paths, axis=0)
        k, _ = _run_until(model, step, gen, X, lambda p: B2.contains(p) & domain.contains(p), n_jumps, max_steps)
        med.append(_half_survival_time(k, step))
    t0 = float(np.min(med)) if t0_override is None else t0_override
    # (iii) P_x(X_t in B2, t < tau_D) >= c int_{D \ B2} G_D(x, y) dy at t = t0
    k0 = max(1, int(np.floor(t0 / step)))
    cs = []
    sampler = IncrementSampler(model, step, n_jumps=n_jumps)
    for x in mesh:
        X = np.repeat(x[None, :], n_paths, axis=0)
        occ = np.zeros(n_paths)
        at_t = np.zeros(n_paths, dtype=bool)
        idx = np.arange(n_paths)
        pos = X.copy()
        for k in range(1, max_steps + 1):
            if not idx.size:
                break
            occ[idx] += step * ~B2.contains(pos)
            pos = pos + sampler.draw(gen, idx.size)
            ok = domain.contains(pos)
            pos, idx = pos[ok], idx[ok]
            if k == k0:
                at_t[idx] = B2.contains(pos)
        g = occ.mean()
        p = at_t.mean()
        cs.append(np.inf if g == 0 else p / g)
    return float(np.min(ratios)), t0, float(np.min(cs))


def _half_survival_time(k, step):
    """Largest grid time ``t`` with empirical ``P(tau > t) >= 1/2``, found by bisection."""
    ks = np.sort(k)
    lo, hi = 0, int(ks[-1])
    surv = lambda j: np.mean(ks > j)  # noqa: E731
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if surv(mid) >= 0.5:
            lo = mid
        else:
            hi = mid - 1
    return lo * step


def regeneration_check(model, domain, sets, n_paths, rng, mesh_resolution=None, step=None, n_jumps=PATH_JUMPS,
                       max_steps=200_000, with_dual=True):
    """Monte Carlo checks of the three regeneration estimates.

    Parameters
    ----------
    model, domain
    sets : InnerSets
    n_paths : int
        Paths per mesh point.
    mesh_resolution : float, optional
        Spacing of the start mesh; defaults to a tenth of the diameter.

    Raises
    ------
    ValidationError
        If the mesh of ``D \\ C1`` or of ``C1`` is empty.
    """
    from .geometry import make_grid
    from .levy_model import dual

    step = auto_step(model, domain) if step is None else float(step)
    res = mesh_resolution or domain.diameter() / 10
    g = make_grid(domain, res)
    pts = g.centers
    inC1 = sets.C1.contains(pts)
    mesh = pts[~inC1]
    mesh_c1 = pts[inC1]
    if mesh_c1.shape[0] == 0:
        # the grid may miss a small C1; fall back to points of a finer lattice
        g2 = make_grid(domain, res / 4)
        mesh_c1 = g2.centers[sets.C1.contains(g2.centers)]
    if mesh.shape[0] == 0 or mesh_c1.shape[0] == 0:
        raise ValidationError("empty mesh for the regeneration check")
    st = as_stream(rng).child("regeneration")
    a = _regen_one(model, domain, sets, mesh, mesh_c1, n_paths, step, st.child("X").generator(), n_jumps, max_steps)
    if with_dual:
        b = _regen_one(dual(model), domain, sets, mesh, mesh_c1, n_paths, step, st.child("Xhat").generator(), n_jumps,
                       max_steps)
    else:
        b = a
    passed = bool(a[0] > 0 and b[0] > 0 and a[1] > 0 and b[1] > 0 and a[2] > 0 and b[2] > 0)
    return RegenerationReport(a[0], b[0], a[1], b[1], a[2], b[2], int(mesh.shape[0]), int(mesh_c1.shape[0]), passed)


# --------------------------------------------------------------------------
# verdicts


def classify_failure(hypothesis_ok=True, within_noise=False, refinement_fixes=False):
    """Classification attached to a failing verdict."""
    if not hypothesis_ok:
        return HYPOTHESIS
    if within_noise:
        return MC_NOISE
    if refinement_fixes:
        return DISCRETIZATION
    return GENUINE


@dataclass
class IUReport:
    """Aggregate of all certificates.  ``verdicts`` maps check name to ``{"status", ...}``."""

    t_list: list
    c_lower: dict = field(default_factory=dict)
    c_upper: dict = field(default_factory=dict)
    nu_rate: float | None = None
    nu_intercept: float | None = None
    harnack_c: dict = field(default_factory=dict)
    exit_ratio_sup: dict = field(default_factory=dict)
    green_c1: float | None = None
    lifetime_sup: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def exit_code(self):
        st = [v["status"] for v in self.verdicts.values()]
        cls = [v.get("classification") for v in self.verdicts.values() if v["status"] == FAIL]
        if HYPOTHESIS in cls:
            return EXIT_HYPOTHESIS
        if FAIL in st:
            return EXIT_FAIL
        return EXIT_OK

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return o
