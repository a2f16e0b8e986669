"""Increment and killed-path simulation for every model kind.

Isotropic untruncated stable increments are drawn exactly as
sub-Gaussian vectors ``sqrt(c S) G`` with ``S`` a positive
``alpha/2``-stable variable.  All other kinds use a series scheme: the
jumps larger than a cutoff ``eps`` form a compound Poisson sum with
directions drawn from ``phi`` by rejection, and the jumps below ``eps``
are replaced by a Gaussian with the same mean and covariance.  ``eps`` is
chosen so that a step carries ``n_jumps`` large jumps on average.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import CensoringError, ValidationError
from .levy_model import make_stable_model
from .parallel import pmap
from .rng import as_stream
from .sphere import sphere_area, uniform_directions

DEFAULT_JUMPS = 50
PATH_JUMPS = 8


def positive_stable(gen, beta, n):
    """Positive ``beta``-stable draws with Laplace transform ``exp(-s^beta)``.

    Kanter's representation with ``U ~ Unif(0, pi)`` and ``E ~ Exp(1)``.
    """
    u = gen.uniform(0.0, np.pi, n)
    e = gen.standard_exponential(n)
    a = np.sin(beta * u) / np.sin(u) ** (1.0 / beta)
    b = (np.sin((1.0 - beta) * u) / e) ** ((1.0 - beta) / beta)
    return a * b


class IncrementSampler:
    """Draws of ``X_dt - X_0`` for a fixed model and time step.

    Parameters
    ----------
    model : LevyModel
    dt : float
        Time step, positive.
    n_jumps : float, optional
        Mean number of retained jumps per increment in the series scheme.
    scheme : {"auto", "exact", "series"}
        ``exact`` is only available for isotropic untruncated kinds.
    """

    def __init__(self, model, dt, n_jumps=DEFAULT_JUMPS, scheme="auto"):
        if not dt > 0:
            raise ValidationError("time step must be positive")
        self.model = model
        self.dt = float(dt)
        self.d = model.d
        exact_ok = model.spectral.is_isotropic and not model.is_truncated
        if scheme == "auto":
            scheme = "exact" if exact_ok else "series"
        if scheme == "exact" and not exact_ok:
            raise ValidationError("exact sampling needs an isotropic untruncated model")
        if scheme not in ("exact", "series"):
            raise ValidationError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        a = model.alpha
        self.drift = np.zeros(self.d)
        if a == 1.0:
            self.drift = self.dt * model.gamma_vec
        A = model.A_matrix
        self.bm_chol = _psd_sqrt(self.dt * A) if np.any(A != 0) else None
        if scheme == "exact":
            C = model.scale_constant()
            self.subgauss_scale = np.sqrt(2.0 * (C * self.dt) ** (2.0 / a))
            return
        eta = model.eta_mass
        m = model.first_moment
        if model.is_truncated:
            eps = (1.0 + a * n_jumps / (self.dt * eta)) ** (-1.0 / a)
            rate = eta * (eps**-a - 1.0) / a
            if a < 1:
                comp = self.dt * m * eps ** (1 - a) / (1 - a)
            elif a == 1:
                comp = self.dt * m * np.log(eps)
            else:
                comp = -self.dt * m * (eps ** (1 - a) - 1.0) / (a - 1)
        else:
            eps = (self.dt * eta / (a * n_jumps)) ** (1.0 / a)
            rate = eta * eps**-a / a
            if a < 1:
                comp = self.dt * m * eps ** (1 - a) / (1 - a)
            elif a == 1:
                comp = self.dt * m * np.log(eps)
            else:
                comp = -self.dt * m * eps ** (1 - a) / (a - 1)
        self.eps = float(eps)
        self.rate = float(rate)
        self.drift = self.drift + comp
        cov = self.dt * model.second_moment * eps ** (2 - a) / (2 - a)
        self.small_chol = _psd_sqrt(cov)
        self.phi_sup = model.spectral.sup()
        self.phi_mean = model.eta_mass / sphere_area(self.d)

    # ------------------------------------------------------------------

    def directions(self, gen, k):
        """``k`` directions with density proportional to ``phi``."""
        sp = self.model.spectral
        if sp.is_isotropic:
            return uniform_directions(gen, k, self.d)
        if self.d == 2:
            q = _angle_quantiles(sp)
            u = gen.random(k) * (q.size - 1)
            i = u.astype(np.int64)
            th = q[i] + (u - i) * (q[i + 1] - q[i])
            return np.column_stack([np.cos(th), np.sin(th)])
        out = np.empty((k, self.d))
        filled = 0
        while filled < k:
            need = k - filled
            m = int(1.1 * need * self.phi_sup / self.phi_mean) + 16
            xi = uniform_directions(gen, m, self.d)
            keep = xi[gen.random(m) * self.phi_sup < sp(xi)]
            take = min(need, keep.shape[0])
            out[filled:filled + take] = keep[:take]
            filled += take
        return out

    def jump_radii(self, gen, k):
        a = self.model.alpha
        u = gen.random(k)
        if self.model.is_truncated:
            lo = self.eps**-a
            return (lo - u * (lo - 1.0)) ** (-1.0 / a)
        return self.eps * (1.0 - u) ** (-1.0 / a)

    def draw(self, gen, n):
        """``n`` independent increments as an ``(n, d)`` array."""
        d = self.d
        if self.scheme == "exact":
            s = positive_stable(gen, 0.5 * self.model.alpha, n)
            x = (self.subgauss_scale * np.sqrt(s))[:, None] * gen.standard_normal((n, d))
        else:
            x = gen.standard_normal((n, d)) @ self.small_chol.T
            counts = gen.poisson(self.rate * self.dt, n)
            tot = int(counts.sum())
            if tot:
                owner = np.repeat(np.arange(n), counts)
                jumps = self.directions(gen, tot) * self.jump_radii(gen, tot)[:, None]
                for k in range(d):
                    x[:, k] += np.bincount(owner, weights=jumps[:, k], minlength=n)
        x += self.drift
        if self.bm_chol is not None:
            x += gen.standard_normal((n, d)) @ self.bm_chol.T
        return x


_QUANTILE_CACHE = {}


def _angle_quantiles(sp, nodes=1 << 16, bins=1 << 16):
    """Equal-probability angle table of the density ``phi`` on the circle.

    ``phi`` is integrated exactly as a piecewise-linear function on a fine
    node set, and the quantiles of the resulting piecewise-quadratic CDF are
    tabulated; sampling interpolates linearly between them.
    """
    key = (sp, nodes, bins)
    if key not in _QUANTILE_CACHE:
        th = np.linspace(0.0, 2.0 * np.pi, nodes + 1)
        extra = sp.breakpoints()
        if extra is not None:
            th = np.unique(np.concatenate([th, np.mod(extra, 2.0 * np.pi)]))
        f = sp(np.column_stack([np.cos(th), np.sin(th)]))
        seg = 0.5 * (f[1:] + f[:-1]) * np.diff(th)
        F = np.concatenate([[0.0], np.cumsum(seg)])
        total = F[-1]
        p = np.linspace(0.0, 1.0, bins + 1) * total
        j = np.clip(np.searchsorted(F, p, side="right") - 1, 0, th.size - 2)
        h = th[j + 1] - th[j]
        f0 = f[j]
        slope = (f[j + 1] - f0) / h
        rem = p - F[j]
        # f0 s + slope s^2 / 2 = rem, taking the root in [0, h]
        disc = np.sqrt(np.maximum(f0 * f0 + 2.0 * slope * rem, 0.0))
        s_ = 2.0 * rem / (f0 + disc)
        q = th[j] + np.clip(s_, 0.0, h)
        q[0], q[-1] = 0.0, 2.0 * np.pi
        _QUANTILE_CACHE[key] = q
    return _QUANTILE_CACHE[key]


def _psd_sqrt(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


# --------------------------------------------------------------------------
# single increments


def sample_increment(model, dt, rng, size=None, n_jumps=DEFAULT_JUMPS):
    """Draw ``X_dt - X_0``; a ``(size, d)`` array or a single d-vector."""
    gen = as_stream(rng).generator()
    s = IncrementSampler(model, dt, n_jumps=n_jumps)
    x = s.draw(gen, 1 if size is None else int(size))
    return x[0] if size is None else x


def sample_decomposed(model, dt, rng, size=None, n_jumps=DEFAULT_JUMPS, return_counts=False):
    """Increments of the truncated process and of the large-jump part.

    For a truncated model ``Y`` with parent stable process ``X``, returns
    ``(y, z)`` where ``y`` is an increment of ``Y`` and ``z`` an independent
    compound Poisson increment with rate ``lambda = eta(S)/alpha`` and jump
    density ``h / lambda`` (all jumps of size at least one).  For
    ``alpha < 1`` and ``alpha = 1`` the sum ``y + z`` has the law of
    ``X_dt``.  For ``alpha > 1`` the sum equals ``X_dt`` plus the drift
    ``dt * int xi eta(dxi) / (alpha - 1)``, which vanishes for centered
    spherical measures.
    """
    if not model.is_truncated:
        raise ValidationError("decomposition requires a truncated model kind")
    n = 1 if size is None else int(size)
    gen = as_stream(rng).generator()
    ys = IncrementSampler(model, dt, n_jumps=n_jumps)
    y = ys.draw(gen, n)
    lam = model.truncation_split.lam
    counts = gen.poisson(lam * dt, n)
    tot = int(counts.sum())
    z = np.zeros((n, model.d))
    if tot:
        owner = np.repeat(np.arange(n), counts)
        r = gen.random(tot) ** (-1.0 / model.alpha)
        r = np.maximum(r, 1.0)
        jumps = ys.directions(gen, tot) * r[:, None]
        for k in range(model.d):
            z[:, k] = np.bincount(owner, weights=jumps[:, k], minlength=n)
    if size is None:
        y, z, counts = y[0], z[0], counts[:1]
    return (y, z, counts) if return_counts else (y, z)


def parent_stable(model):
    """The untruncated stable model with the same spectral density."""
    return make_stable_model(model.d, model.alpha, model.spectral, model.gamma_vec if model.alpha == 1 else None)


# --------------------------------------------------------------------------
# killed paths


@dataclass
class KilledOutcome:
    """Result of one killed path on the step grid.

    ``position`` is set iff the path is alive at the horizon, ``exit_time``
    iff it died; ``path_checkpoints`` lists ``(time, position)`` pairs when
    requested.
    """

    alive: bool
    position: np.ndarray | None
    exit_time: float | None
    path_checkpoints: list | None = None
    stream_id: int | None = None


def _step_plan(t, step):
    n = max(1, int(np.ceil(t / step - 1e-9)))
    last = t - (n - 1) * step
    return n, last


def simulate_killed(model, domain, x0, t, step, rng, checkpoints=False, n_jumps=PATH_JUMPS):
    """Walk one path on the step grid and kill it at the first exit.

    The last step is shortened so the horizon ``t`` is hit exactly; for
    ``t < step`` this is a single increment of length ``t``.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (domain.d,) or not domain.contains(x0[None, :])[0]:
        raise ValidationError("starting point must lie in the domain")
    if not (t > 0 and step > 0):
        raise ValidationError("t and step must be positive")
    stream = as_stream(rng)
    gen = stream.generator()
    n, last = _step_plan(t, step)
    full = IncrementSampler(model, step, n_jumps=n_jumps)
    tail = full if abs(last - step) <= 1e-12 * step else IncrementSampler(model, last, n_jumps=n_jumps)
    x = x0.copy()
    cps = [(0.0, x.copy())] if checkpoints else None
    time = 0.0
    for k in range(n):
        s = tail if k == n - 1 else full
        x = x + s.draw(gen, 1)[0]
        time = t if k == n - 1 else (k + 1) * step
        if checkpoints:
            cps.append((time, x.copy()))
        if not domain.contains(x[None, :])[0]:
            return KilledOutcome(False, None, time, cps, stream.stream_id)
    return KilledOutcome(True, x, None, cps, stream.stream_id)


def auto_step(model, domain, fraction=0.02):
    """Step whose typical displacement is ``fraction`` of the domain inradius.

    The jump part gives ``(C h)^{1/alpha} = fraction * L`` and a Brownian
    part ``sqrt(h * |A|) = fraction * L``; the smaller step wins.  Because
    the step scales like ``L^alpha``, dilating the domain dilates the
    discrete chain exactly in law for stable kinds.
    """
    L = fraction * domain.inradius()
    h = L**model.alpha / model.scale_constant()
    lam = float(np.linalg.eigvalsh(model.A_matrix).max())
    if lam > 0:
        h = min(h, L * L / lam)
    return h


@dataclass
class ExitTimeEstimate:
    """Monte Carlo estimate of ``E_x[tau_D]``."""

    mean: float
    stderr: float
    n_paths: int
    step: float
    censored_fraction: float
    horizon: float
    samples: np.ndarray | None = field(default=None, repr=False)
    exit_positions: np.ndarray | None = field(default=None, repr=False)

    def __iter__(self):
        yield self.mean
        yield self.stderr


def _exit_block(args):
    (model, domain, X0, step, stream, n_jumps, max_steps, keep_pos) = args
    gen = stream.generator()
    sampler = IncrementSampler(model, step, n_jumps=n_jumps)
    n = X0.shape[0]
    x = X0.copy()
    idx = np.arange(n)
    tau = np.full(n, np.nan)
    pos = np.full((n, model.d), np.nan) if keep_pos else None
    k = 0
    psteps = 0
    cens_fraction, horizon = 0.0, 0.0
    while idx.size:
        k += 1
        x = x + sampler.draw(gen, idx.size)
        psteps += idx.size
        out = ~domain.contains(x)
        if np.any(out):
            dead = idx[out]
            tau[dead] = k * step
            if keep_pos:
                pos[dead] = x[out]
            x = x[~out]
            idx = idx[~out]
        done = n - idx.size
        if idx.size and done:
            running = np.nanmean(tau)
            if k * step >= 50.0 * running and idx.size < 1e-3 * n:
                cens_fraction, horizon = idx.size / n, k * step
                tau[idx] = horizon
                break
        if psteps > max_steps:
            raise CensoringError(
                f"{idx.size / n:.3%} of paths still alive after {k} steps (resource cap)",
                censored_fraction=idx.size / n,
            )
    if horizon == 0.0:
        horizon = k * step
    return tau, pos, cens_fraction * n, horizon


def exit_times(model, domain, X0, rng, step=None, n_jumps=PATH_JUMPS, block=8192, workers=None,
               max_particle_steps=4e9, keep_positions=False, tag="exit"):
    """Exit times (and optionally exit positions) for many starting points.

    Paths are split in blocks of ``block`` with one derived stream each.
    Paths alive at 50 times the running mean exit time are censored at
    that horizon once fewer than 0.1% of the block remain.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if not np.all(domain.contains(X0)):
        raise ValidationError("all starting points must lie in the domain")
    step = auto_step(model, domain) if step is None else float(step)
    stream = as_stream(rng)
    nb = int(np.ceil(X0.shape[0] / block))
    cap = max_particle_steps / max(nb, 1)
    tasks = [
        (model, domain, X0[b * block:(b + 1) * block], step, stream.child(tag, b), n_jumps, cap, keep_positions)
        for b in range(nb)
    ]
    res = pmap(_exit_block, tasks, workers)
    tau = np.concatenate([r[0] for r in res])
    pos = np.concatenate([r[1] for r in res]) if keep_positions else None
    censored = sum(r[2] for r in res) / X0.shape[0]
    horizon = max(r[3] for r in res)
    return tau, pos, censored, horizon, step


def estimate_exit_time_mean(model, domain, x0, n_paths, rng, step=None, n_jumps=PATH_JUMPS,
                            workers=None, max_particle_steps=4e9, keep_samples=False):
    """Mean exit time from ``x0`` with its standard error.

    Raises
    ------
    CensoringError
        If the censoring floor is not reached within the particle-step cap.
    """
    x0 = np.asarray(x0, dtype=float)
    if n_paths < 1:
        raise ValidationError("n_paths must be at least one")
    X0 = np.repeat(x0[None, :], int(n_paths), axis=0)
    tau, pos, cens, horizon, step = exit_times(
        model, domain, X0, rng, step=step, n_jumps=n_jumps, workers=workers,
        max_particle_steps=max_particle_steps, keep_positions=keep_samples,
    )
    se = float(tau.std(ddof=1) / np.sqrt(tau.size)) if tau.size > 1 else float("nan")
    return ExitTimeEstimate(float(tau.mean()), se, int(n_paths), step, float(cens), float(horizon),
                            tau if keep_samples else None, pos)


@dataclass
class ExitHistogram:
    """Empirical law of the exit position over declared exterior cells."""

    masses: np.ndarray
    stderr: np.ndarray
    other: float
    other_stderr: float
    n_paths: int

    @property
    def total(self):
        return float(self.masses.sum() + self.other)


def sample_exit_position(model, domain, x0, n_paths, rng, cells, step=None, n_jumps=PATH_JUMPS, workers=None):
    """Histogram of ``X_{tau_D}`` over exterior cells.

    Parameters
    ----------
    cells : sequence of Domain
        Exterior regions; exit positions in none of them go to ``other``.
        Positions in several regions count for the first one.
    """
    x0 = np.asarray(x0, dtype=float)
    X0 = np.repeat(x0[None, :], int(n_paths), axis=0)
    _, pos, _, _, _ = exit_times(model, domain, X0, rng, step=step, n_jumps=n_jumps, workers=workers,
                                 keep_positions=True, tag="exitpos")
    ok = ~np.isnan(pos[:, 0])
    lab = np.full(pos.shape[0], -1)
    for c, cell in enumerate(cells):
        hit = (lab < 0) & ok
        hit[hit] = cell.contains(pos[hit])
        lab[hit] = c
    n = pos.shape[0]
    p = np.array([(lab == c).mean() for c in range(len(cells))])
    o = 1.0 - p.sum()
    return ExitHistogram(p, np.sqrt(p * (1 - p) / n), float(o), float(np.sqrt(max(o * (1 - o), 0) / n)), n)


# --------------------------------------------------------------------------
# exports

CHECKPOINT_DTYPE_CACHE = {}


def checkpoint_dtype(d):
    if d not in CHECKPOINT_DTYPE_CACHE:
        CHECKPOINT_DTYPE_CACHE[d] = np.dtype([("stream_id", "<u8"), ("time", "<f8"), ("position", "<f8", (d,))])
    return CHECKPOINT_DTYPE_CACHE[d]


def write_checkpoints(path, outcomes, d):
    """Binary dump: little-endian ``(u64 stream_id, f64 time, d x f64 position)``."""
    rows = []
    for o in outcomes:
        for t, x in o.path_checkpoints or []:
            rows.append((int(o.stream_id or 0), float(t), np.asarray(x, dtype=float)))
    arr = np.zeros(len(rows), dtype=checkpoint_dtype(d))
    for i, (s, t, x) in enumerate(rows):
        arr[i] = (s, t, x)
    arr.tofile(path)
    return len(rows)


def read_checkpoints(path, d):
    return np.fromfile(path, dtype=checkpoint_dtype(d))


def write_exit_times(path, tau):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "exit_time"])
        for i, t in enumerate(np.asarray(tau)):
            w.writerow([i, repr(float(t))])



# --------------------------------------------------------------------------
# characteristic-function diagnostics


def _cf_moments(x, Z):
    ph = np.asarray(x, dtype=float) @ np.asarray(Z, dtype=float).T
    c, s = np.cos(ph), np.sin(ph)
    n = ph.shape[0]
    mean = c.mean(0) + 1j * s.mean(0)
    cov = np.empty((Z.shape[0], 2, 2))
    cov[:, 0, 0] = c.var(0, ddof=1)
    cov[:, 1, 1] = s.var(0, ddof=1)
    cov[:, 0, 1] = cov[:, 1, 0] = ((c - c.mean(0)) * (s - s.mean(0))).sum(0) / (n - 1)
    return mean, cov / n


def _mahalanobis(diff, cov):
    v = np.stack([diff.real, diff.imag], axis=-1)
    sol = np.linalg.solve(cov, v[..., None])[..., 0]
    return np.sqrt(np.einsum("ki,ki->k", v, sol))


def cf_zscores(x, Z, target):
    """Distance of the empirical CF from ``target`` at each frequency.

    Each entry is the Mahalanobis norm of (real, imaginary) deviations in
    units of the sample covariance of ``(cos, sin)``; under the null it is
    chi with two degrees of freedom.
    """
    Z = np.atleast_2d(Z)
    mean, cov = _cf_moments(x, Z)
    return _mahalanobis(mean - np.asarray(target), cov)


def two_sample_cf_zscores(x, y, Z):
    """Per-frequency distance between the empirical CFs of two independent samples."""
    Z = np.atleast_2d(Z)
    mx, cx = _cf_moments(x, Z)
    my, cy = _cf_moments(y, Z)
    return _mahalanobis(mx - my, cx + cy)


def sigma_threshold(k_sigma=3.0, dof=2):
    """Chi quantile with the two-sided tail mass of ``k_sigma`` standard normal units."""
    return float(np.sqrt(stats.chi2.ppf(stats.chi2.cdf(k_sigma**2, 1), dof)))
