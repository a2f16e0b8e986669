"""Quadrature rules on the unit sphere S^{d-1}.

Integrands of the form ``phi(xi) * R(z . xi)`` have a kink on the great
sphere ``z . xi = 0`` (``R`` behaves like ``|u|^alpha`` there), so the rules
below are graded geometrically toward that set.  For d = 2 and d = 3 the
rules are products of Gauss-Legendre panels in angle; for d > 3 a fixed
quasi-random point set is used.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm, qmc

_GRADING = 0.2


def sphere_area(d):
    """Surface measure of S^{d-1}."""
    return float(np.exp(np.log(2.0) + 0.5 * d * np.log(np.pi) - gammaln(0.5 * d)))


@lru_cache(maxsize=64)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def graded_panels(a, b, levels, *, left=True, right=True, ratio=_GRADING):
    """Breakpoints on [a, b] refined geometrically toward the chosen ends."""
    m = 0.5 * (a + b)
    pts = [a, m, b]
    if left:
        pts += [a + (m - a) * ratio**k for k in range(1, levels + 1)]
    if right:
        pts += [b - (b - m) * ratio**k for k in range(1, levels + 1)]
    return np.unique(np.asarray(pts, dtype=float))


def panel_rule(breaks, n):
    """Composite n-point Gauss-Legendre rule on consecutive breakpoints."""
    x, w = _gl(n)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _orthonormal_frame(e):
    """Orthogonal matrix whose last column is the unit vector ``e``."""
    q, _ = np.linalg.qr(np.column_stack([e, np.eye(e.size)]))
    if np.dot(q[:, 0], e) < 0:
        q = -q
    return np.column_stack([q[:, 1:], q[:, 0]])


def kink_rule(d, direction=None, n=8, levels=14, extra_breaks=None):
    """Sphere rule graded toward the great sphere orthogonal to ``direction``.

    Parameters
    ----------
    d : int
        Ambient dimension, at least 2.
    direction : array_like, optional
        Vector whose orthogonal great sphere carries the kink.  ``None``
        gives an ungraded rule suitable for smooth integrands.
    n : int
        Gauss-Legendre nodes per panel.
    levels : int
        Number of geometric grading levels toward each kink.
    extra_breaks : sequence of float, optional
        Additional angular breakpoints (d = 2 only), for example the knots
        of a piecewise-linear spectral table.

    Returns
    -------
    nodes : ndarray, shape (m, d)
    weights : ndarray, shape (m,)
        Weights sum to ``sphere_area(d)`` up to rounding.
    """
    if d == 2:
        theta0 = 0.0
        if direction is not None:
            v = np.asarray(direction, dtype=float)
            theta0 = float(np.arctan2(v[1], v[0]))
        cuts = [theta0 - 0.5 * np.pi, theta0 + 0.5 * np.pi, theta0 + 1.5 * np.pi]
        breaks = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if direction is None:
                breaks.append(np.linspace(a, b, 5))
            else:
                breaks.append(graded_panels(a, b, levels))
        br = np.unique(np.concatenate(breaks))
        if extra_breaks is not None and len(extra_breaks):
            eb = np.asarray(extra_breaks, dtype=float)
            eb = cuts[0] + np.mod(eb - cuts[0], 2.0 * np.pi)
            br = np.unique(np.concatenate([br, eb]))
        th, w = panel_rule(br, n)
        return np.column_stack([np.cos(th), np.sin(th)]), w
    if d == 3:
        if direction is None:
            frame = np.eye(3)
            pbreaks = np.linspace(0.0, np.pi, 9)
        else:
            v = np.asarray(direction, dtype=float)
            frame = _orthonormal_frame(v / np.linalg.norm(v))
            pbreaks = np.unique(np.concatenate([
                graded_panels(0.0, 0.5 * np.pi, levels, left=False),
                graded_panels(0.5 * np.pi, np.pi, levels, right=False),
            ]))
        th, wt = panel_rule(pbreaks, n)
        naz = max(4 * n, 32)
        az, wa = panel_rule(np.linspace(0.0, 2.0 * np.pi, 5), naz // 4)
        st = np.sin(th)
        local = np.stack([
            np.outer(st, np.cos(az)),
            np.outer(st, np.sin(az)),
            np.outer(np.cos(th), np.ones_like(az)),
        ], axis=-1).reshape(-1, 3)
        w = np.outer(wt * st, wa).ravel()
        return local @ frame.T, w
    return mc_rule(d)


@lru_cache(maxsize=16)
def _mc_rule_cached(d, m):
    sob = qmc.Sobol(d, scramble=True, seed=20240229)
    u = sob.random(m)
    g = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    x = g / np.linalg.norm(g, axis=1, keepdims=True)
    return x, np.full(m, sphere_area(d) / m)


def mc_rule(d, m=131072):
    """Quasi-Monte Carlo sphere rule with ``m`` equally weighted points."""
    x, w = _mc_rule_cached(d, m)
    return x.copy(), w.copy()


def uniform_directions(gen, n, d):
    """Independent uniform draws on S^{d-1}."""
    if d == 2:
        th = gen.random(n) * (2.0 * np.pi)
        return np.column_stack([np.cos(th), np.sin(th)])
    g = gen.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def probe_points(d, m=16384):
    """Deterministic probe set used to check spectral-density bounds."""
    if d == 2:
        th = (np.arange(m) + 0.5) * (2.0 * np.pi / m)
        return np.column_stack([np.cos(th), np.sin(th)])
    x, _ = _mc_rule_cached(d, m)
    return x.copy()
