"""Grid representation of the killed semigroup and its principal eigentriple.

Transition matrices ``P[i, j] ~ P_{x_i}(X^D_t in cell_j)`` are estimated
from killed paths started at the cell centres.  Survival probabilities on
bounded domains decay like ``exp(lambda0 t)`` with ``|lambda0|`` often in
the tens, so plain Monte Carlo would leave almost every row empty.  The
default estimator is a Fleming-Viot particle system per row: after each
step every killed particle is replaced by a copy of a uniformly chosen
survivor of the same row, and the row weight is multiplied by the surviving
fraction.  The product of the weight and the empirical distribution is an
unbiased estimate of the killed law.

Each row runs ``groups`` independent sub-populations.  Their spread
calibrates two pooled factors per matrix: a design effect for the
histogram counts and an inflation of the per-step weight-variance formula,
both of which resampling makes optimistic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, GridMismatchError, PositivityError, ResourceCapExceeded, ValidationError
from .levy_model import dual
from .parallel import pmap
from .rng import as_stream
from .sampler import PATH_JUMPS, IncrementSampler, auto_step

# --------------------------------------------------------------------------
# transition matrices


@dataclass
class SubstochasticMatrix:
    """Monte Carlo estimate of the killed kernel on a grid.

    Attributes
    ----------
    t : float
    entries : ndarray, shape (n, n)
        ``P[i, j]``, the probability that the path from centre ``i`` is
        alive at time ``t`` and sits in cell ``j``.
    stderr : ndarray, shape (n, n)
    n_paths : int
        Particles per row.
    grid : Grid
    row_weight : ndarray, shape (n,)
        Estimated survival-to-``t`` factor of each row (1 for plain MC).
    row_relvar : ndarray, shape (n,)
        Relative variance of ``row_weight``.
    count_var : ndarray, shape (n, n)
        Part of ``stderr**2`` due to the within-row multinomial counts.
    design_effect : float
        Count-variance inflation estimated from the independent groups.
    weight_inflation : float
        Factor applied to the per-step log-weight variance formula.
    method : str
    dual : bool
        Whether the matrix was simulated from the dual model.
    """

    t: float
    entries: np.ndarray
    stderr: np.ndarray
    n_paths: int
    grid: object = field(repr=False)
    row_weight: np.ndarray = field(repr=False, default=None)
    row_relvar: np.ndarray = field(repr=False, default=None)
    count_var: np.ndarray = field(repr=False, default=None)
    design_effect: float = 1.0
    weight_inflation: float = 1.0
    method: str = "fleming_viot"
    dual: bool = False
    step: float = 0.0

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def density(self):
        """Histogram density ``P[i, j] / vol_j``."""
        return self.entries / self.grid.volumes[None, :]

    @property
    def density_stderr(self):
        return self.stderr / self.grid.volumes[None, :]

    def row_sums(self):
        return self.entries.sum(axis=1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "value", "stderr"])
            for i in range(self.n):
                for j in range(self.n):
                    w.writerow([i, j, repr(float(self.entries[i, j])), repr(float(self.stderr[i, j]))])


def matrix_from_array(entries, t=1.0, volumes=None, stderr=None):
    """Wrap a given nonnegative matrix so the spectral and verifier code accept it.

    The cells are laid out on a unit-spaced line with the given volumes
    (default 1).  Useful for hand-built kernels and tests.
    """
    from .geometry import Grid

    P = np.array(entries, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or np.any(P < 0) or not np.all(np.isfinite(P)):
        raise ValidationError("entries must be a finite nonnegative square matrix")
    n = P.shape[0]
    vol = np.ones(n) if volumes is None else np.asarray(volumes, dtype=float)
    if vol.shape != (n,) or np.any(vol <= 0):
        raise ValidationError("volumes must be positive, one per row")
    grid = Grid(centers=np.arange(n, dtype=float)[:, None] + 0.5, volumes=vol, resolution=1.0, origin=np.zeros(1),
                shape=(n,), table=np.arange(n), edge=np.zeros(n, dtype=bool))
    se = np.zeros_like(P) if stderr is None else np.asarray(stderr, dtype=float)
    return SubstochasticMatrix(t=float(t), entries=P, stderr=se, n_paths=0, grid=grid, row_weight=np.ones(n),
                               row_relvar=np.zeros(n), count_var=se ** 2, method="given")


def _check_times(t_list, step):
    ks = []
    for t in t_list:
        if not t > 0:
            raise ValidationError("times must be positive")
        k = int(round(t / step))
        if k < 1 or abs(k * step - t) > 1e-9 * max(1.0, t):
            raise ValidationError(f"time {t} is not a multiple of the step {step}")
        ks.append(k)
    return ks


def _fv_block(args):
    (model, domain, grid, X0, N, groups, step, ks, stream, method, n_jumps) = args
    gen = stream.generator()
    sampler = IncrementSampler(model, step, n_jumps=n_jumps)
    R = X0.shape[0]
    Ng = N // groups
    G = R * groups
    d = model.d
    n = grid.n
    x = np.repeat(X0, N, axis=0).reshape(G, Ng, d)
    logw = np.zeros(G)
    relv = np.zeros(G)
    alive_all = np.ones((G, Ng), dtype=bool)
    snaps = {}
    kmax = max(ks)
    want = set(ks)
    for k in range(1, kmax + 1):
        if method == "plain":
            live = alive_all.ravel()
            xf = x.reshape(-1, d)
            xl = xf[live] + sampler.draw(gen, int(live.sum()))
            xf[live] = xl
            ok = domain.contains(xl)
            idx = np.flatnonzero(live)
            live[idx[~ok]] = False
            alive_all = live.reshape(G, Ng)
        else:
            xf = x.reshape(-1, d)
            xf += sampler.draw(gen, xf.shape[0])
            ok = domain.contains(xf)
            okr = ok.reshape(G, Ng)
            a = okr.sum(axis=1)
            extinct = a == 0
            with np.errstate(divide="ignore"):
                logw += np.log(a / Ng)
            relv += np.where(extinct, 0.0, (Ng - a) / (Ng * np.maximum(a, 1)))
            dead = np.flatnonzero(~ok)
            if dead.size:
                rows = dead // Ng
                keep = ~extinct[rows]
                dead, rows = dead[keep], rows[keep]
                alive_idx = np.flatnonzero(ok)
                offs = np.cumsum(a) - a
                pick = offs[rows] + (gen.random(dead.size) * a[rows]).astype(np.int64)
                xf[dead] = xf[alive_idx[pick]]
        if k in want:
            if method == "plain":
                live = alive_all.ravel()
                cells = np.full(live.size, -1)
                cells[live] = grid.locate(x.reshape(-1, d)[live])
            else:
                cells = grid.locate(x.reshape(-1, d))
                cells[np.repeat(logw == -np.inf, Ng)] = -1
            owner = np.repeat(np.arange(G), Ng)
            m = cells >= 0
            cnt = np.bincount(owner[m] * n + cells[m], minlength=G * n).reshape(G, n)
            snaps[k] = (cnt.astype(np.float64), logw.copy(), relv.copy())
    return snaps


def estimate_transition_matrices(model, domain, grid, t_list, n_paths, step, rng, method="fleming_viot",
                                 groups=4, block_rows=8, workers=None, n_jumps=PATH_JUMPS,
                                 max_particle_steps=None, tag="P"):
    """Transition matrices at several times from one simulation.

    Parameters
    ----------
    model, domain, grid
    t_list : sequence of float
        Snapshot times; each must be a multiple of ``step``.
    n_paths : int
        Particles per row, at least 1000 and divisible by ``groups``.
    step : float or None
        Time step; ``None`` picks :func:`auto_step`.
    rng : RngStream or int
    method : {"fleming_viot", "plain"}
    groups : int
        Independent sub-populations per row.
    block_rows : int
        Rows per work item; each block has its own derived stream.
    max_particle_steps : float, optional
        Resource cap checked before simulating.

    Returns
    -------
    list of SubstochasticMatrix
    """
    t_list = [float(t) for t in t_list]
    if int(n_paths) < 1000:
        raise ValidationError("n_paths must be at least 1000 per row")
    if method not in ("fleming_viot", "plain"):
        raise ValidationError(f"unknown method {method!r}")
    N = int(n_paths)
    if N % groups:
        raise ValidationError("n_paths must be divisible by groups")
    step = auto_step(model, domain) if step is None else float(step)
    ks = _check_times(t_list, step)
    cost = float(grid.n) * N * max(ks)
    if max_particle_steps is not None and cost > max_particle_steps:
        raise ResourceCapExceeded(f"transition matrices need {cost:.3g} particle steps (cap {max_particle_steps:.3g})")
    stream = as_stream(rng).child(tag, tuple(t_list), N, step)
    nb = int(np.ceil(grid.n / block_rows))
    tasks = [
        (model, domain, grid, grid.centers[b * block_rows:(b + 1) * block_rows], N, groups, step, ks,
         stream.child("block", b), method, n_jumps)
        for b in range(nb)
    ]
    res = pmap(_fv_block, tasks, workers)
    out = []
    for t, k in zip(t_list, ks):
        cnt = np.concatenate([r[k][0] for r in res]).reshape(grid.n, groups, grid.n)
        logw = np.concatenate([r[k][1] for r in res]).reshape(grid.n, groups)
        relv = np.concatenate([r[k][2] for r in res]).reshape(grid.n, groups)
        out.append(_assemble(cnt, logw, relv, N, groups, t, grid, method, model, step))
    return out


def _assemble(cnt, logw, relv, N, groups, t, grid, method, model, step):
    Ng = N // groups
    w = np.exp(logw)  # (n, groups)
    P = (w[:, :, None] * cnt / Ng).mean(axis=1)
    wbar = w.mean(axis=1)
    # multinomial count variance of the group mean, inflated by a pooled
    # design effect measured on the per-group normalised histograms
    q = cnt / Ng
    cvar = ((w[:, :, None] / Ng) ** 2 * cnt * np.clip(1.0 - q, 0.0, None)).sum(axis=1) / groups**2
    deff = 1.0
    if groups > 1:
        alive = np.all(w > 0, axis=1)
        qa = q[alive]
        num = qa.var(axis=1, ddof=1).sum()
        den = (qa * (1.0 - qa)).mean(axis=1).sum() / Ng
        deff = float(num / den) if den > 0 else 1.0
    infl = 1.0
    if method == "plain":
        rv = np.zeros(grid.n)
    else:
        # the per-step binomial formula misses the autocorrelation of the
        # survival fractions; calibrate it on the between-group log-weight spread
        alive = np.all(np.isfinite(logw), axis=1)
        if groups > 1 and alive.any():
            den = relv[alive].mean(axis=1).sum()
            if den > 0:
                infl = max(float(logw[alive].var(axis=1, ddof=1).sum() / den), 1e-12)
        rvg = np.where(w > 0, np.expm1(infl * relv), 0.0)
        rv = (w**2 * rvg).sum(axis=1) / np.maximum(w.sum(axis=1), 1e-300) ** 2
    var = deff * cvar + P**2 * rv[:, None]
    return SubstochasticMatrix(
        t=float(t), entries=P, stderr=np.sqrt(var), n_paths=int(N), grid=grid, row_weight=wbar,
        row_relvar=rv, count_var=deff * cvar, design_effect=deff, weight_inflation=infl, method=method,
        dual=False, step=float(step),
    )


def estimate_transition_matrix(model, domain, grid, t, n_paths, step, rng, **kw):
    """Single-time version of :func:`estimate_transition_matrices`."""
    return estimate_transition_matrices(model, domain, grid, [t], n_paths, step, rng, **kw)[0]


def dual_transition_matrices(model, domain, grid, t_list, n_paths, step, rng, **kw):
    """Transition matrices of the dual (reflected) model."""
    kw.setdefault("tag", "Phat")
    out = estimate_transition_matrices(dual(model), domain, grid, t_list, n_paths, step, rng, **kw)
    for m in out:
        m.dual = True
    return out


def dual_transition_matrix(model, domain, grid, t, n_paths, step, rng, **kw):
    return dual_transition_matrices(model, domain, grid, [t], n_paths, step, rng, **kw)[0]


def _same_grid(a, b):
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("matrices live on different grids")


# --------------------------------------------------------------------------
# switching identity


@dataclass
class SwitchingResult:
    """Grid-level check of the switching identity ``p(t,x,y) = p_hat(t,y,x)``.

    ``z`` holds the pooled two-sample statistic for every pair (NaN where
    both estimates vanish); ``residual`` is its maximum.
    """

    residual: float
    argmax: tuple
    n_pairs: int
    z: np.ndarray = field(repr=False)

    def __float__(self):
        return self.residual


def switching_details(P, Phat):
    """Pairwise pooled z statistics between ``P`` and the dual ``Phat``."""
    _same_grid(P, Phat)
    if abs(P.t - Phat.t) > 1e-12 * max(1.0, P.t):
        raise GridMismatchError("matrices are estimated at different times")
    vol = P.grid.volumes
    a = P.entries / vol[None, :]
    b = Phat.entries.T / vol[:, None]  # b[i, j] = Phat[j, i] / vol_i
    m = 0.5 * (a + b)
    # under the null both estimate the same density m; Poisson-type count
    # variance W/N * P plus the row-weight term, each with its design effect
    va = P.design_effect * (P.row_weight[:, None] / P.n_paths) * m / vol[None, :] + m**2 * P.row_relvar[:, None]
    vb = Phat.design_effect * (Phat.row_weight[None, :] / Phat.n_paths) * m / vol[:, None] + m**2 * Phat.row_relvar[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.abs(a - b) / np.sqrt(va + vb)
    z[(a == 0) & (b == 0)] = np.nan
    if np.all(np.isnan(z)):
        return SwitchingResult(0.0, (-1, -1), 0, z)
    k = int(np.nanargmax(z))
    return SwitchingResult(float(z.flat[k]), divmod(k, P.n), int(np.sum(~np.isnan(z))), z)


def switching_residual(P, Phat):
    """Maximum pooled z statistic of ``P[i,j]/vol_j - Phat[j,i]/vol_i``."""
    return switching_details(P, Phat).residual


# --------------------------------------------------------------------------
# Chapman-Kolmogorov


@dataclass
class SemigroupResidual:
    residual: float
    max_abs: float
    bias_term: float
    row_sum_ok: bool


def semigroup_residual(P_t, P_s, P_ts):
    """Normalised deviation of ``P_t P_s`` from ``P_{t+s}``.

    The normaliser combines first-order propagated standard errors with a
    discretisation term proportional to the grid's boundary-layer fraction.
    """
    _same_grid(P_t, P_s)
    _same_grid(P_t, P_ts)
    if abs(P_t.t + P_s.t - P_ts.t) > 1e-9 * max(1.0, P_ts.t):
        raise GridMismatchError("times do not satisfy t + s = (t+s)")
    A, B, C = P_t.entries, P_s.entries, P_ts.entries
    Q = A @ B
    var = (P_t.stderr**2) @ (B**2) + (A**2) @ (P_s.stderr**2) + P_ts.stderr**2
    bias = (P_t.grid.boundary_layer_fraction + P_t.grid.overhang_fraction) * np.maximum(Q, C)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs(Q - C) / (np.sqrt(var) + bias)
    r[(Q == 0) & (C == 0)] = 0.0
    rs_ok = bool(np.all(Q.sum(axis=1) <= A.sum(axis=1) * B.sum(axis=1).max() * (1 + 1e-12)))
    return SemigroupResidual(float(np.nanmax(r)), float(np.max(np.abs(Q - C))), float(bias.max()), rs_ok)


# --------------------------------------------------------------------------
# Green function


@dataclass
class GreenField:
    """Occupation-time estimate of the Green function on a grid.

    Attributes
    ----------
    G : ndarray, shape (n, n)
        ``G[i, j] ~ G_D(x_i, y_j)`` (occupation time of cell ``j`` per unit
        volume, averaged over paths from centre ``i``).
    G_se : ndarray
    mean_exit, mean_exit_se : ndarray, shape (n,)
        Direct averages of the exit times.
    layer_time : ndarray, shape (n,)
        Mean time spent in the part of the domain not covered by cells.
    dual_* : ndarray or None
        The same fields for the dual model.
    """

    G: np.ndarray
    G_se: np.ndarray
    mean_exit: np.ndarray
    mean_exit_se: np.ndarray
    layer_time: np.ndarray
    grid: object = field(repr=False)
    dual_G: np.ndarray | None = None
    dual_G_se: np.ndarray | None = None
    dual_mean_exit: np.ndarray | None = None
    dual_mean_exit_se: np.ndarray | None = None
    dual_layer_time: np.ndarray | None = None
    censored_fraction: float = 0.0
    lambda_hat: float = float("nan")
    step: float = 0.0
    n_paths: int = 0

    def consistency(self):
        """Max over rows of the standardised gap between the two mean-exit estimates."""
        integ = self.G @ self.grid.volumes + self.layer_time
        return float(np.max(np.abs(integ - self.mean_exit) / np.maximum(self.mean_exit_se, 1e-300)))


def _green_block(args):
    (model, domain, grid, X0, N, step, stream, n_jumps, max_steps) = args
    gen = stream.generator()
    sampler = IncrementSampler(model, step, n_jumps=n_jumps)
    R = X0.shape[0]
    n = grid.n
    P = R * N
    x = np.repeat(X0, N, axis=0)
    idx = np.arange(P)
    ev_p, ev_c = [], []
    tau = np.zeros(P)
    k = 0
    surv = [P]
    censored = np.zeros(P, dtype=bool)
    while idx.size:
        c = grid.locate(x)
        ev_p.append(idx)
        ev_c.append(c)
        k += 1
        x = x + sampler.draw(gen, idx.size)
        ok = domain.contains(x)
        tau[idx[~ok]] = k * step
        x, idx = x[ok], idx[ok]
        surv.append(idx.size)
        done = P - idx.size
        if idx.size and done and k * step >= 50.0 * tau[tau > 0].mean() and idx.size < 1e-3 * P:
            tau[idx] = k * step
            censored[idx] = True
            ev_p.append(idx)
            ev_c.append(grid.locate(x))
            break
        if k > max_steps:
            break
    if idx.size and not censored.any():
        tau[idx] = k * step
        censored[idx] = True
    ep = np.concatenate(ev_p)
    ec = np.concatenate(ev_c)
    last = np.zeros(P, dtype=np.int64) - 1
    if censored.any():
        # the final recorded cell of a censored path receives its tail correction
        cp = ep[-idx.size:] if idx.size else np.zeros(0, dtype=np.int64)
        last[cp] = ec[-idx.size:] if idx.size else 0
        ep, ec = ep[:-idx.size], ec[:-idx.size]
    m = ec >= 0
    occ = np.bincount(ep[m] * n + ec[m], minlength=P * n).reshape(P, n).astype(np.float64) * step
    layer = np.bincount(ep[~m], minlength=P).astype(np.float64) * step
    # per-path occupations are reduced to row moments to keep memory at O(R n)
    occ_last = np.where(last >= 0, occ[np.arange(P), np.maximum(last, 0)], 0.0)
    occ = occ.reshape(R, N, n)
    return (occ.sum(axis=1), (occ * occ).sum(axis=1), occ_last, layer, tau, censored, last,
            np.asarray(surv, dtype=np.float64))


def _green_run(model, domain, grid, n_paths, step, stream, n_jumps, block_rows, workers, max_steps):
    N = int(n_paths)
    nb = int(np.ceil(grid.n / block_rows))
    tasks = [
        (model, domain, grid, grid.centers[b * block_rows:(b + 1) * block_rows], N, step,
         stream.child("block", b), n_jumps, max_steps)
        for b in range(nb)
    ]
    res = pmap(_green_block, tasks, workers)
    n = grid.n
    occ_s = np.concatenate([r[0] for r in res])
    occ_q = np.concatenate([r[1] for r in res])
    occ_last = np.concatenate([r[2] for r in res]).reshape(n, N)
    layer = np.concatenate([r[3] for r in res]).reshape(n, N)
    tau = np.concatenate([r[4] for r in res]).reshape(n, N)
    cens = np.concatenate([r[5] for r in res]).reshape(n, N)
    last = np.concatenate([r[6] for r in res]).reshape(n, N)
    L = max(len(r[7]) for r in res)
    surv = np.zeros(L)
    for r in res:
        s = r[7]
        surv[: s.size] += s
    # exponential tail fit on the survival curve
    lam = float("nan")
    good = surv > 20
    ts = np.arange(L) * step
    if good.sum() >= 6:
        sel = np.flatnonzero(good)
        sel = sel[sel.size // 2:]
        lam = float(np.polyfit(ts[sel], np.log(surv[sel]), 1)[0])
    if cens.any() and np.isfinite(lam) and lam < 0:
        extra = -1.0 / lam
        tau = tau + cens * extra
        ii, pp = np.nonzero(cens)
        cc = last[ii, pp]
        ok = cc >= 0
        o = occ_last[ii[ok], pp[ok]]
        np.add.at(occ_s, (ii[ok], cc[ok]), extra)
        np.add.at(occ_q, (ii[ok], cc[ok]), 2 * o * extra + extra**2)
        layer[ii[~ok], pp[~ok]] += extra
    vol = grid.volumes
    mean = occ_s / N
    var = np.maximum(occ_q - N * mean**2, 0.0) / (N - 1)
    G = mean / vol[None, :]
    G_se = np.sqrt(var / N) / vol[None, :]
    me = tau.mean(axis=1)
    me_se = tau.std(axis=1, ddof=1) / np.sqrt(N)
    return G, G_se, me, me_se, layer.mean(axis=1), float(cens.mean()), lam


def green_field(model, domain, grid, n_paths, rng, step=None, with_dual=True, n_jumps=PATH_JUMPS,
                block_rows=8, workers=None, max_steps=100000):
    """Green function, mean exit times and their dual counterparts.

    The first exit is detected on the step grid; a path that exits at step
    ``k`` is credited with occupation ``step`` for each of its positions at
    steps ``0 .. k-1``, so row integrals of ``G`` plus ``layer_time``
    reproduce the mean exit time exactly.
    """
    step = auto_step(model, domain) if step is None else float(step)
    stream = as_stream(rng)
    G, G_se, me, me_se, lt, cf, lam = _green_run(
        model, domain, grid, n_paths, step, stream.child("green"), n_jumps, block_rows, workers, max_steps)
    gf = GreenField(G, G_se, me, me_se, lt, grid, censored_fraction=cf, lambda_hat=lam, step=step,
                    n_paths=int(n_paths))
    if with_dual:
        dG, dG_se, dme, dme_se, dlt, dcf, _ = _green_run(
            dual(model), domain, grid, n_paths, step, stream.child("green_dual"), n_jumps, block_rows,
            workers, max_steps)
        gf.dual_G, gf.dual_G_se = dG, dG_se
        gf.dual_mean_exit, gf.dual_mean_exit_se, gf.dual_layer_time = dme, dme_se, dlt
        gf.censored_fraction = max(cf, dcf)
    return gf


# --------------------------------------------------------------------------
# spectral triple


@dataclass
class SpectralTriple:
    """Principal eigenvalue and eigenvectors of a grid kernel.

    ``phi0`` is the right eigenvector of ``P``; ``psi0`` the right
    eigenvector of the dual kernel ``V^{-1} P^T V`` (``V`` the diagonal of
    cell volumes).  Both are positive and normalised in the cell-weighted
    L2 norm; ``lambda0 = log(rho)/t`` with ``rho`` the top eigenvalue.
    """

    lambda0: float
    phi0: np.ndarray
    psi0: np.ndarray
    residual_phi: float
    residual_psi: float
    t_used: float
    rho: float
    lambda0_se: float = float("nan")
    phi0_se: np.ndarray | None = field(default=None, repr=False)
    psi0_se: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0
    grid: object = field(default=None, repr=False)

    def inner(self):
        """Grid value of ``int phi0 psi0``."""
        return float(np.sum(self.phi0 * self.psi0 * self.grid.volumes))


def check_positivity(P, kmax=5):
    """Smallest ``k <= kmax`` with ``P^k > 0`` entrywise.

    ``P`` may be a :class:`SubstochasticMatrix` or a plain array.

    Raises
    ------
    PositivityError
        With the list of index pairs that stay zero in ``P^kmax``.
    """
    A = P.entries if isinstance(P, SubstochasticMatrix) else np.asarray(P)
    B = (A > 0).astype(np.float64)
    M = B.copy()
    for k in range(1, kmax + 1):
        if np.all(M > 0):
            return k
        if k < kmax:
            M = ((M @ B) > 0).astype(np.float64)
    zeros = np.argwhere(M == 0)
    raise PositivityError(
        f"kernel is not positive after {kmax} powers ({zeros.shape[0]} zero pairs); the irreducibility "
        f"hypothesis fails, for example on a domain that is not roughly connected",
        zero_pairs=zeros,
    )


def _power(M, v0, vol, tol, max_iter):
    v = v0 / np.sqrt(np.sum(v0 * v0 * vol))
    for it in range(1, int(max_iter) + 1):
        w = M @ v
        nw = np.sqrt(np.sum(w * w * vol))
        if not nw > 0:
            raise ConvergenceError("power iteration collapsed to zero")
        w = w / nw
        if np.max(np.abs(w - v)) <= tol * np.max(np.abs(w)):
            return w, it
        v = w
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def spectral_triple(P, tol=1e-10, max_iter=100000, kmax=5):
    """Principal eigentriple of a substochastic matrix.

    Parameters
    ----------
    P : SubstochasticMatrix
    tol : float
        Max-norm tolerance on successive normalised eigenvectors.
    max_iter : int
    kmax : int
        Burn-in powers allowed for the positivity check.

    Raises
    ------
    PositivityError
        If no power ``P^k`` with ``k <= kmax`` is entrywise positive.
    ConvergenceError
        If the power iteration hits ``max_iter``.
    """
    A = P.entries
    vol = P.grid.volumes
    t = P.t
    check_positivity(A, kmax)
    n = A.shape[0]
    phi, i1 = _power(A, np.ones(n), vol, tol, max_iter)
    ell, i2 = _power(A.T, np.ones(n), np.ones(n), tol, max_iter)
    rho = float(ell @ A @ phi / (ell @ phi))
    if not (rho > 0):
        raise ConvergenceError("nonpositive top eigenvalue")
    psi = ell / vol
    psi = psi / np.sqrt(np.sum(psi * psi * vol))
    res_phi = float(np.max(np.abs(A @ phi - rho * phi)) / (rho * np.max(np.abs(phi))))
    Ahat = (A.T * vol[None, :]) / vol[:, None]
    res_psi = float(np.max(np.abs(Ahat @ psi - rho * psi)) / (rho * np.max(np.abs(psi))))
    lam = float(np.log(rho) / t)
    tri = SpectralTriple(lam, phi, psi, res_phi, res_psi, float(t), rho, iterations=max(i1, i2), grid=P.grid)
    _perturbation_se(P, tri, ell)
    return tri


def _perturbation_se(P, tri, ell):
    """First-order standard errors of ``lambda0``, ``phi0`` and ``psi0``."""
    A = P.entries
    n = A.shape[0]
    rho, phi = tri.rho, tri.phi0
    cv = P.count_var if P.count_var is not None else P.stderr**2
    rv = P.row_relvar if P.row_relvar is not None else np.zeros(n)
    lf = float(ell @ phi)
    Aphi = A @ phi
    a = cv @ (phi**2) + rv * Aphi**2
    var_rho = float(np.sum(ell**2 * a)) / lf**2
    tri.lambda0_se = float(np.sqrt(var_rho) / (rho * tri.t_used))
    I = np.eye(n)
    proj = np.outer(phi, ell) / lf
    try:
        M = linalg.solve(rho * I - A + rho * proj, I - proj)
        Nl = linalg.solve(rho * I - A.T + rho * proj.T, I - proj.T)
    except linalg.LinAlgError:
        tri.phi0_se = np.full(n, np.nan)
        tri.psi0_se = np.full(n, np.nan)
        return
    tri.phi0_se = np.sqrt((M**2) @ a)
    l2 = ell**2
    t1 = (Nl**2) @ (cv.T @ l2)
    PN = A @ Nl.T  # (i, k)
    t2 = (PN**2).T @ (l2 * rv)
    se_ell = np.sqrt(t1 + t2)
    scale = tri.psi0 / np.where(ell != 0, ell, 1.0)
    tri.psi0_se = se_ell * np.abs(scale)


def dense_eigen_check(P, tri):
    """Relative gaps between the power-iteration triple and a dense solve."""
    A = P.entries
    w, vl, vr = linalg.eig(A, left=True, right=True)
    k = int(np.argmax(w.real))
    rho = float(w[k].real)
    vol = P.grid.volumes
    phi = np.abs(vr[:, k].real)
    phi /= np.sqrt(np.sum(phi * phi * vol))
    psi = np.abs(vl[:, k].real) / vol
    psi /= np.sqrt(np.sum(psi * psi * vol))
    return {
        "rho": abs(rho - tri.rho) / rho,
        "phi": float(np.max(np.abs(phi - tri.phi0)) / np.max(phi)),
        "psi": float(np.max(np.abs(psi - tri.psi0)) / np.max(psi)),
    }


def lambda0_consistency(P_t, P_s):
    """Principal eigenvalues at two times and their gap in pooled standard errors."""
    _same_grid(P_t, P_s)
    a = spectral_triple(P_t)
    b = spectral_triple(P_s)
    if P_t is P_s:
        return a.lambda0, b.lambda0, 0.0
    den = np.hypot(a.lambda0_se, b.lambda0_se)
    gap = abs(a.lambda0 - b.lambda0) / den if den > 0 else (0.0 if a.lambda0 == b.lambda0 else np.inf)
    return a.lambda0, b.lambda0, float(gap)


def eigenvector_cross_check(tri_a, tri_b):
    """Max standardised difference between eigenvectors from two times."""
    def z(u, v, su, sv):
        den = np.sqrt(su**2 + sv**2)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.abs(u - v) / den
        return float(np.nanmax(np.where(den > 0, r, 0.0)))

    return max(z(tri_a.phi0, tri_b.phi0, tri_a.phi0_se, tri_b.phi0_se),
               z(tri_a.psi0, tri_b.psi0, tri_a.psi0_se, tri_b.psi0_se))


def matrix_summary(P, tri=None, extra=None):
    out = {"t": P.t, "n": P.n, "n_paths": P.n_paths, "method": P.method, "design_effect": P.design_effect,
           "max_row_sum": float(P.row_sums().max())}
    if tri is not None:
        out.update({"lambda0": tri.lambda0, "lambda0_se": tri.lambda0_se, "residual_phi": tri.residual_phi,
                    "residual_psi": tri.residual_psi})
    if extra:
        out.update(extra)
    return out


def write_matrix(path_prefix, P, tri=None, extra=None):
    P.to_csv(f"{path_prefix}.csv")
    with open(f"{path_prefix}.json", "w") as fh:
        json.dump(matrix_summary(P, tri, extra), fh, indent=2, sort_keys=True)
