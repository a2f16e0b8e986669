"""Bounded open sets built from balls and boxes.

A :class:`Domain` is the union of the interiors of its pieces.  Pieces may
overlap or be far apart.  The distance to the boundary of the union is
computed piece by piece: the nearest point on a piece boundary counts only
if no other piece covers it, otherwise the nearest *uncovered* sample of
that piece boundary is used, which bounds the error by the sampling mesh.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .errors import ValidationError

# --------------------------------------------------------------------------
# pieces


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("ball radius must be positive")

    @property
    def d(self):
        return len(self.center)

    @property
    def c(self):
        return np.asarray(self.center, dtype=float)

    def depth(self, x):
        """Signed depth: positive inside, minus the distance outside."""
        return self.radius - np.linalg.norm(x - self.c, axis=-1)

    def project(self, x):
        """Closest point of the piece boundary to each row of ``x``."""
        v = x - self.c
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        e = np.zeros_like(v)
        e[..., 0] = 1.0
        u = np.where(n > 0, v / np.where(n > 0, n, 1.0), e)
        return self.c + self.radius * u

    def normal(self, q):
        return (q - self.c) / self.radius

    def bbox(self):
        return self.c - self.radius, self.c + self.radius

    def inradius(self):
        return self.radius

    def sample_boundary(self, spacing):
        d, r = self.d, self.radius
        if d == 2:
            n = max(int(np.ceil(2 * np.pi * r / spacing)), 16)
            th = 2 * np.pi * np.arange(n) / n
            return self.c + r * np.column_stack([np.cos(th), np.sin(th)])
        if d == 3:
            n = max(int(np.ceil(4 * np.pi * r * r / spacing**2)), 64)
            k = np.arange(n) + 0.5
            z = 1 - 2 * k / n
            ph = np.pi * (1 + 5**0.5) * k
            s = np.sqrt(1 - z * z)
            return self.c + r * np.column_stack([s * np.cos(ph), s * np.sin(ph), z])
        g = np.random.default_rng(7).standard_normal((20000, d))
        return self.c + r * g / np.linalg.norm(g, axis=1, keepdims=True)

    def special_points(self):
        return np.zeros((0, self.d))

    def to_json(self):
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or not np.all(np.asarray(self.hi) > np.asarray(self.lo)):
            raise ValidationError("box needs min < max in every coordinate")

    @property
    def d(self):
        return len(self.lo)

    def depth(self, x):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        inside = np.minimum(x - lo, hi - x)
        ins = inside.min(axis=-1)
        out = np.linalg.norm(np.maximum(np.maximum(lo - x, x - hi), 0.0), axis=-1)
        return np.where(ins > 0, ins, -out)

    def project(self, x):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        y = np.clip(x, lo, hi)
        inside = np.all((x > lo) & (x < hi), axis=-1)
        if np.any(inside):
            xi = x[inside]
            gaps = np.concatenate([xi - lo, hi - xi], axis=-1)
            k = np.argmin(gaps, axis=-1)
            d = x.shape[-1]
            p = xi.copy()
            rows = np.arange(xi.shape[0])
            axis = k % d
            p[rows, axis] = np.where(k < d, lo[axis], hi[axis])
            y[inside] = p
        return y

    def normal(self, q):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        tol = 1e-9 * max(1.0, float(np.max(hi - lo)))
        n = np.where(np.abs(q - hi) < tol, 1.0, 0.0) - np.where(np.abs(q - lo) < tol, 1.0, 0.0)
        nn = np.linalg.norm(n, axis=-1, keepdims=True)
        return n / np.where(nn > 0, nn, 1.0)

    def bbox(self):
        return np.asarray(self.lo, float), np.asarray(self.hi, float)

    def inradius(self):
        return 0.5 * float(np.min(np.asarray(self.hi) - np.asarray(self.lo)))

    def sample_boundary(self, spacing):
        lo, hi = self.bbox()
        d = self.d
        pts = []
        if d > 3:
            g = np.random.default_rng(11).random((20000, d))
            x = lo + g * (hi - lo)
            ax = np.random.default_rng(12).integers(0, d, 20000)
            side = np.random.default_rng(13).integers(0, 2, 20000)
            x[np.arange(20000), ax] = np.where(side == 0, lo[ax], hi[ax])
            return np.vstack([x, self.special_points()])
        for k in range(d):
            others = [i for i in range(d) if i != k]
            axes = [np.linspace(lo[i], hi[i], max(int(np.ceil((hi[i] - lo[i]) / spacing)) + 1, 3)) for i in others]
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d - 1)
            for val in (lo[k], hi[k]):
                p = np.empty((mesh.shape[0], d))
                p[:, others] = mesh
                p[:, k] = val
                pts.append(p)
        return np.unique(np.vstack(pts), axis=0)

    def special_points(self):
        lo, hi = self.bbox()
        d = self.d
        idx = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
        return np.where(idx == 0, lo, hi)

    def to_json(self):
        return {"type": "box", "min": list(self.lo), "max": list(self.hi)}


def _piece_distance(p, q):
    """Distance between the closures of two pieces (negative if overlapping)."""
    if isinstance(p, Ball) and isinstance(q, Ball):
        return float(np.linalg.norm(p.c - q.c) - p.radius - q.radius)
    if isinstance(p, Box) and isinstance(q, Box):
        plo, phi = p.bbox()
        qlo, qhi = q.bbox()
        gap = np.maximum(qlo - phi, plo - qhi)
        if np.all(gap < 0):
            return float(gap.max())
        return float(np.linalg.norm(np.maximum(gap, 0.0)))
    b, x = (p, q) if isinstance(p, Ball) else (q, p)
    return float(-x.depth(b.c[None, :])[0] - b.radius)


# --------------------------------------------------------------------------
# domain


@dataclass(frozen=True)
class Domain:
    """Union of open balls and open boxes in R^d.

    Parameters
    ----------
    pieces : tuple of Ball or Box
    boundary_spacing : float, optional
        Mesh width of the boundary samples used for overlap corrections.
        Defaults to a fraction of the bounding-box diameter.
    """

    pieces: tuple
    boundary_spacing: float | None = None

    def __post_init__(self):
        if len(self.pieces) == 0:
            raise ValidationError("a domain needs at least one piece")
        d = {p.d for p in self.pieces}
        if len(d) != 1:
            raise ValidationError("all pieces must have the same dimension")
        if self.d < 2:
            raise ValidationError("domains live in dimension d >= 2")
        for p in self.pieces:
            lo, hi = p.bbox()
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValidationError("pieces must be bounded")

    @property
    def d(self):
        return self.pieces[0].d

    def bbox(self):
        los, his = zip(*(p.bbox() for p in self.pieces))
        return np.min(los, axis=0), np.max(his, axis=0)

    def diameter(self):
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def inradius(self):
        """Largest piece inradius, a lower bound for ``sup rho``."""
        return max(p.inradius() for p in self.pieces)

    def contains(self, x):
        """Membership in the open union, rowwise."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=bool)
        for p in self.pieces:
            out |= p.depth(x) > 0
        return out

    def _depths(self, x):
        return np.stack([p.depth(x) for p in self.pieces], axis=0)

    @cached_property
    def _uncovered(self):
        h = self.boundary_spacing or self.diameter() / (4000.0 if self.d == 2 else 150.0)
        out = []
        for k, p in enumerate(self.pieces):
            s = np.vstack([p.sample_boundary(h), p.special_points()])
            covered = np.zeros(s.shape[0], dtype=bool)
            for j, q in enumerate(self.pieces):
                if j != k:
                    covered |= q.depth(s) > 0
            pts = s[~covered]
            out.append((pts, cKDTree(pts) if pts.shape[0] else None))
        return out

    def uncovered_boundary(self, k):
        """Sampled points of piece ``k``'s boundary that lie on the union boundary."""
        return self._uncovered[k][0]

    def dist_to_boundary(self, x):
        """Signed distance to the boundary: positive exactly inside the domain.

        Points outside get ``-dist(x, D)``.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        dep = self._depths(x)
        inside = np.any(dep > 0, axis=0)
        rho = np.where(inside, np.inf, dep.max(axis=0))
        xi = x[inside]
        if xi.shape[0]:
            best = np.full(xi.shape[0], np.inf)
            for k, p in enumerate(self.pieces):
                proj = p.project(xi)
                cov = np.zeros(xi.shape[0], dtype=bool)
                for j, q in enumerate(self.pieces):
                    if j != k:
                        cov |= q.depth(proj) > 0
                cand = np.linalg.norm(xi - proj, axis=1)
                if np.any(cov):
                    tree = self._uncovered[k][1]
                    if tree is None:
                        cand[cov] = np.inf
                    else:
                        dd, _ = tree.query(xi[cov])
                        cand[cov] = dd
                best = np.minimum(best, cand)
            rho[inside] = best
        return float(rho[0]) if single else rho

    def volume(self, m=1 << 16):
        lo, hi = self.bbox()
        pts = lo + qmc.Sobol(self.d, scramble=True, seed=5).random(m) * (hi - lo)
        return float(np.prod(hi - lo) * self.contains(pts).mean())

    def to_json(self):
        return {"pieces": [p.to_json() for p in self.pieces]}


def domain_from_json(doc):
    """Build a domain from ``{"pieces": [...]}`` (dict or JSON string)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    pieces = []
    for i, p in enumerate(doc.get("pieces", [])):
        t = p.get("type")
        try:
            if t == "ball":
                pieces.append(Ball(tuple(float(v) for v in p["center"]), float(p["radius"])))
            elif t == "box":
                pieces.append(Box(tuple(float(v) for v in p["min"]), tuple(float(v) for v in p["max"])))
            else:
                raise ValidationError(f"piece {i}: unknown type {t!r}")
        except KeyError as exc:
            raise ValidationError(f"piece {i}: missing field {exc.args[0]!r}") from None
    return Domain(tuple(pieces))


def ball(center, radius):
    return Ball(tuple(float(v) for v in center), float(radius))


def box(lo, hi):
    return Box(tuple(float(v) for v in lo), tuple(float(v) for v in hi))


def dist_to_boundary(domain, x):
    return domain.dist_to_boundary(x)


# --------------------------------------------------------------------------
# kappa-fat certificate


@dataclass
class FatCertificate:
    """Outcome of probing the kappa-fat condition.

    ``witnesses`` holds one row per probe: the boundary point Q, the radius
    r, the centre found and the distance to the boundary achieved there.
    ``failures`` lists the probes where no ball of radius ``kappa_fat * r``
    inside ``D`` and ``B(Q, r)`` was found.  The certificate is
    probabilistic: only the probed (Q, r) pairs are checked.
    """

    kappa_fat: float
    R: float
    verdict: str
    n_probes: int
    witnesses: list = field(repr=False)
    failures: list

    @property
    def passed(self):
        return self.verdict == "pass"


def certify_kappa_fat(domain, kappa_fat, R, probe_counts=None):
    """Probe the kappa-fat condition on a boundary mesh and a radius mesh.

    Parameters
    ----------
    domain : Domain
    kappa_fat : float
        Fatness constant in (0, 1/2].
    R : float
        Largest probed radius.
    probe_counts : dict, optional
        ``points_per_decade`` (default 64), ``radii`` (default 16) and
        ``decades`` (default 2): radii are log-spaced on
        ``[R 10^-decades, R]`` and each piece contributes
        ``points_per_decade * decades`` boundary points plus its corners.

    Returns
    -------
    FatCertificate
    """
    if not (0.0 < kappa_fat <= 0.5):
        raise ValidationError("kappa_fat must lie in (0, 1/2]")
    if not R > 0:
        raise ValidationError("R must be positive")
    pc = {"points_per_decade": 64, "radii": 16, "decades": 2}
    pc.update(probe_counts or {})
    radii = R * np.logspace(-pc["decades"], 0.0, int(pc["radii"]))
    npts = int(pc["points_per_decade"] * pc["decades"])
    witnesses, failures = [], []
    for k, piece in enumerate(domain.pieces):
        ub = domain.uncovered_boundary(k)
        if ub.shape[0] == 0:
            continue
        idx = np.unique(np.linspace(0, ub.shape[0] - 1, min(npts, ub.shape[0])).astype(int))
        Q = ub[idx]
        sp = piece.special_points()
        if sp.shape[0]:
            keep = ~np.zeros(sp.shape[0], dtype=bool)
            for j, q in enumerate(domain.pieces):
                if j != k:
                    keep &= q.depth(sp) <= 0
            Q = np.vstack([Q, sp[keep]])
        nrm = piece.normal(Q)
        for r in radii:
            need = kappa_fat * r * (1 - 1e-9)
            reach = r * (1.0 - kappa_fat)
            A0 = Q - reach * nrm
            rho0 = domain.dist_to_boundary(A0)
            bad = np.flatnonzero(rho0 < need)
            A_all, best_all = A0.copy(), rho0.copy()
            if bad.size:
                A_b, best_b = _search_witness(domain, Q[bad], nrm[bad], reach, need)
                A_all[bad], best_all[bad] = A_b, best_b
            for qi in range(Q.shape[0]):
                rec = (Q[qi].tolist(), float(r), A_all[qi].tolist(), float(best_all[qi]))
                witnesses.append(rec)
                if best_all[qi] < need:
                    failures.append({"Q": rec[0], "r": rec[1], "best_rho": rec[3], "needed": float(kappa_fat * r)})
    verdict = "pass" if not failures else "fail"
    return FatCertificate(kappa_fat, float(R), verdict, len(witnesses), witnesses, failures)


def _unit_ball_cloud(d, m=256):
    u = qmc.Sobol(d + 1, scramble=True, seed=29).random(m)
    g = np.random.default_rng(31).standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * u[:, :1] ** (1.0 / d)


def _search_witness(domain, Q, n, reach, need):
    """Maximise rho over B(Q, reach): candidate scan, then shrinking local search."""
    d = Q.shape[1]
    cloud = _unit_ball_cloud(d)
    rows = np.arange(Q.shape[0])

    def clip(p):
        v = p - Q[:, None, :]
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        return Q[:, None, :] + v * np.minimum(1.0, reach / np.maximum(nv, 1e-300))

    def scan(cand):
        rho = domain.dist_to_boundary(cand.reshape(-1, d)).reshape(cand.shape[0], -1)
        k = np.argmax(rho, axis=1)
        return cand[rows, k], rho[rows, k]

    A, best = scan(Q[:, None, :] + reach * cloud[None, :, :])
    local = cloud[:64]
    for s in (0.3, 0.1, 0.03, 0.01, 0.003, 0.001):
        cand = clip(A[:, None, :] + s * reach * np.vstack([np.zeros((1, d)), local])[None, :, :])
        A, best = scan(cand)
        if np.all(best >= need):
            break
    return A, best


# --------------------------------------------------------------------------
# rough connectivity


@dataclass
class ComponentGraph:
    """Connected components of a domain and their mutual gaps."""

    roughly_connected: bool
    components: list
    distances: np.ndarray

    def __bool__(self):
        return self.roughly_connected


def roughly_connected(domain, jump_radius=1.0):
    """Decide whether the components can be chained with gaps below one.

    Components come from the overlap graph of the pieces.  Two components
    are linked when their distance is below ``jump_radius``; the domain is
    roughly connected iff this graph is connected.
    """
    n = len(domain.pieces)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = _piece_distance(domain.pieces[i], domain.pieces[j])
    adj = (dist < 0) & ~np.eye(n, dtype=bool)
    m, labels = connected_components(csr_matrix(adj), directed=False)
    comps = [np.flatnonzero(labels == c).tolist() for c in range(m)]
    cd = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            cd[a, b] = cd[b, a] = max(0.0, min(dist[i, j] for i in comps[a] for j in comps[b]))
    link = (cd < jump_radius) & ~np.eye(m, dtype=bool)
    k, _ = connected_components(csr_matrix(link), directed=False)
    return ComponentGraph(k == 1, comps, cd)


def component_labels(domain, x):
    """Index of the connected component containing each point (-1 if outside)."""
    g = roughly_connected(domain)
    lab = np.full(np.asarray(x).shape[0], -1)
    for c, members in enumerate(g.components):
        for i in members:
            lab[(domain.pieces[i].depth(x) > 0) & (lab < 0)] = c
    return lab


# --------------------------------------------------------------------------
# inner sets


@dataclass(frozen=True)
class Region:
    """Ball or distance-level set used as an inner set."""

    kind: str
    params: tuple
    closed: bool
    domain: Domain = field(repr=False, compare=False)

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "ball":
            c, r = np.asarray(self.params[0]), self.params[1]
            dd = np.linalg.norm(x - c, axis=1)
            return (dd <= r) if self.closed else (dd < r)
        rho = self.domain.dist_to_boundary(x)
        lvl = self.params[0]
        return (rho >= lvl) if self.closed else (rho > lvl)

    def describe(self):
        if self.kind == "ball":
            return {"type": "ball", "center": list(self.params[0]), "radius": self.params[1], "closed": self.closed}
        return {"type": "rho_level", "level": self.params[0], "closed": self.closed}


@dataclass(frozen=True)
class InnerSets:
    case: str
    B0: Region
    C1: Region
    B2: Region
    x0: tuple | None = None
    r0: float | None = None


def inner_sets(domain, assumption_case, params):
    """Build the nested sets ``B0 in C1 in B2 in D``.

    Parameters
    ----------
    domain : Domain
    assumption_case : {"A4a", "A4b"}
    params : dict
        ``A4a``: ``x0`` and ``r0``, with the closed ball ``B(x0, 2 r0)``
        inside ``D``.
        ``A4b``: ``certificate`` (a passing :class:`FatCertificate`) and
        optionally ``model``; for truncated models ``R <= R0 / 2`` with
        ``R0`` from ``params['R0']`` (default 1).
    """
    if assumption_case == "A4a":
        x0 = np.asarray(params["x0"], dtype=float)
        r0 = float(params["r0"])
        if x0.shape != (domain.d,) or not r0 > 0:
            raise ValidationError("A4a needs a d-vector x0 and r0 > 0")
        if not domain.dist_to_boundary(x0) > 2 * r0:
            raise ValidationError("the closed ball B(x0, 2 r0) is not contained in the domain")
        c = tuple(float(v) for v in x0)
        return InnerSets(
            "A4a",
            Region("ball", (c, 0.5 * r0), False, domain),
            Region("ball", (c, r0), True, domain),
            Region("ball", (c, 2 * r0), False, domain),
            x0=c,
            r0=r0,
        )
    if assumption_case == "A4b":
        cert = params.get("certificate")
        if cert is None or not cert.passed:
            raise ValidationError("A4b needs a passing kappa-fat certificate")
        kap, R = cert.kappa_fat, cert.R
        model = params.get("model")
        if model is not None and model.is_truncated:
            R0 = float(params.get("R0", 1.0))
            if R > 0.5 * R0 * (1 + 1e-12):
                raise ValidationError(f"truncated kinds need R <= R0/2 = {0.5 * R0:g}, got R = {R:g}")
        lo, hi = domain.bbox()
        pts = lo + qmc.Sobol(domain.d, scramble=True, seed=3).random(1 << 14) * (hi - lo)
        if not np.any(domain.dist_to_boundary(pts) > R * kap / 2):
            raise ValidationError("B0 is empty")
        return InnerSets(
            "A4b",
            Region("rho", (R * kap / 2,), False, domain),
            Region("rho", (R * kap / 4,), True, domain),
            Region("rho", (R * kap / 8,), False, domain),
        )
    raise ValidationError(f"unknown assumption case {assumption_case!r}")


# --------------------------------------------------------------------------
# grid


@dataclass
class Grid:
    """Axis-aligned cubical cells whose centres lie in the domain.

    Attributes
    ----------
    centers : ndarray, shape (n, d)
    volumes : ndarray, shape (n,)
    resolution : float
        Cell side length.
    origin : ndarray
        Corner of cell index (0, ..., 0); equals the domain bounding-box
        minimum.
    shape : tuple
        Number of lattice cells per axis over the bounding box.
    boundary_layer_fraction : float
        Fraction of the domain volume not covered by any cell.
    overhang_fraction : float
        Volume of cells outside the domain, relative to the domain volume.
    """

    centers: np.ndarray
    volumes: np.ndarray
    resolution: float
    origin: np.ndarray
    shape: tuple
    table: np.ndarray = field(repr=False)
    boundary_layer_fraction: float = 0.0
    overhang_fraction: float = 0.0
    edge: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.centers.shape[0]

    @property
    def d(self):
        return self.centers.shape[1]

    @property
    def cells(self):
        return list(zip(self.centers, self.volumes))

    def locate(self, x):
        """Cell index of each point, or -1 outside every cell."""
        x = np.asarray(x, dtype=float)
        k = np.floor((x - self.origin) / self.resolution).astype(np.int64)
        shp = np.asarray(self.shape)
        ok = np.all((k >= 0) & (k < shp), axis=-1)
        flat = np.zeros(k.shape[:-1], dtype=np.int64)
        kc = np.where(ok[..., None], k, 0)
        for a in range(self.d):
            flat = flat * shp[a] + kc[..., a]
        return np.where(ok, self.table[flat], -1)

    def fingerprint(self):
        return {"resolution": self.resolution, "origin": self.origin.tolist(), "shape": list(self.shape), "n": self.n}

    def same_as(self, other):
        return (
            self.n == other.n
            and self.resolution == other.resolution
            and np.array_equal(self.centers, other.centers)
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell_id"] + [f"x{k}" for k in range(self.d)] + ["volume"])
            for i, (c, v) in enumerate(zip(self.centers, self.volumes)):
                w.writerow([i] + [repr(float(t)) for t in c] + [repr(float(v))])


def make_grid(domain, resolution):
    """Cubical grid of side ``resolution`` aligned to the bounding box.

    Raises
    ------
    ValidationError
        If the resolution is not positive, exceeds the domain diameter, or
        fewer than 10 cells fit.
    """
    resolution = float(resolution)
    if not resolution > 0:
        raise ValidationError("resolution must be positive")
    if resolution > domain.diameter():
        raise ValidationError("resolution exceeds the domain diameter")
    lo, hi = domain.bbox()
    shape = tuple(int(np.ceil((h - l) / resolution - 1e-9)) for l, h in zip(lo, hi))
    if int(np.prod(shape)) > 50_000_000:
        raise ValidationError("grid too fine")
    axes = [lo[a] + (np.arange(shape[a]) + 0.5) * resolution for a in range(domain.d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.d)
    inside = domain.contains(mesh)
    if inside.sum() < 10:
        raise ValidationError(f"only {int(inside.sum())} cells fit; need at least 10")
    table = np.full(mesh.shape[0], -1, dtype=np.int64)
    table[inside] = np.arange(int(inside.sum()))
    centers = mesh[inside]
    vol = np.full(centers.shape[0], resolution**domain.d)
    g = Grid(centers, vol, resolution, lo.copy(), shape, table)
    # neighbours missing from the grid mark boundary-adjacent cells
    edge = np.zeros(g.n, dtype=bool)
    for a in range(domain.d):
        for s in (-1.0, 1.0):
            off = np.zeros(domain.d)
            off[a] = s * resolution
            edge |= g.locate(centers + off) < 0
    g.edge = edge
    m = 1 << 16
    pts = lo + qmc.Sobol(domain.d, scramble=True, seed=17).random(m) * (hi - lo)
    ind = domain.contains(pts)
    loc = g.locate(pts) >= 0
    nd = max(int(ind.sum()), 1)
    g.boundary_layer_fraction = float((ind & ~loc).sum() / nd)
    g.overhang_fraction = float((~ind & loc).sum() / nd)
    return g
