"""Strictly alpha-stable and truncated stable Levy models on R^d.

A model carries a generating triplet ``(A, nu, gamma)`` where the Levy
measure has density ``f(x) = phi(x/|x|) |x|^{-(d+alpha)}`` in polar form,
optionally restricted to the unit ball (truncated kinds).  The spectral
density ``phi`` lives on the unit sphere and is bounded above and below.

The characteristic exponent uses a regime-specific compensator:

* ``alpha < 1``: ``int (e^{i z.x} - 1) nu(dx)``
* ``alpha = 1``: ``int (e^{i z.x} - 1 - i z.x 1_{|x|<=1}) nu(dx)``
* ``alpha > 1``: ``int (e^{i z.x} - 1 - i z.x) nu(dx)``

For the untruncated stable kinds the radial integrals are done in closed
form, for the truncated kinds by Gauss-Jacobi quadrature on ``(0, 1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import roots_jacobi

from .errors import QuadratureError, ValidationError
from .sphere import kink_rule, probe_points, sphere_area

STABLE = "Stable"
TRUNCATED = "TruncatedStable"
STABLE_BM = "StablePlusBrownian"
TRUNCATED_BM = "TruncatedPlusBrownian"
KINDS = (STABLE, TRUNCATED, STABLE_BM, TRUNCATED_BM)

CENTERING_TOL = 1e-8
EULER_GAMMA = 0.57721566490153286061


# --------------------------------------------------------------------------
# spectral density


@dataclass(frozen=True)
class SpectralDensity:
    """Density of the spherical part of the Levy measure.

    Parameters
    ----------
    d : int
        Dimension of the ambient space (the sphere is S^{d-1}).
    form : {"constant", "cosine", "table"}
        ``constant``: ``phi = value``.
        ``cosine``: ``phi(xi) = a + b (xi . direction)``.
        ``table``: piecewise-linear periodic interpolation in the polar
        angle, d = 2 only.
    params : tuple
        Canonical (hashable) parameter tuple, see the ``constant``,
        ``cosine`` and ``table`` constructors.
    kappa_spec : float
        Bound with ``kappa_spec <= phi <= 1/kappa_spec`` on the sphere.
    reflected : bool
        Evaluate at ``-xi`` instead of ``xi`` (the dual density).
    """

    d: int
    form: str
    params: tuple
    kappa_spec: float
    reflected: bool = False

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValidationError(f"dimension must be an integer >= 2, got {self.d}")
        if self.form not in ("constant", "cosine", "table"):
            raise ValidationError(f"unknown spectral form {self.form!r}")
        if self.form == "table" and self.d != 2:
            raise ValidationError("table spectral densities are supported for d = 2 only")
        if not (0.0 < self.kappa_spec <= 1.0):
            raise ValidationError(f"kappa_spec must lie in (0, 1], got {self.kappa_spec}")
        vals = self(probe_points(self.d))
        lo, hi = float(vals.min()), float(vals.max())
        k = self.kappa_spec * (1.0 - 1e-12)
        if lo < k or hi > 1.0 / k:
            raise ValidationError(
                f"spectral density range [{lo:.6g}, {hi:.6g}] violates the bound "
                f"kappa_spec = {self.kappa_spec:.6g}"
            )

    # constructors -----------------------------------------------------

    @classmethod
    def constant(cls, d, value=1.0, kappa_spec=None):
        value = float(value)
        if not value > 0:
            raise ValidationError("constant spectral density must be positive")
        k = min(value, 1.0 / value) if kappa_spec is None else kappa_spec
        return cls(d, "constant", (value,), float(k))

    @classmethod
    def cosine(cls, d, a=1.0, b=0.5, direction=None, kappa_spec=None):
        e = np.zeros(d)
        e[0] = 1.0
        if direction is not None:
            e = np.asarray(direction, dtype=float)
            if e.shape != (d,) or not np.linalg.norm(e) > 0:
                raise ValidationError("cosine direction must be a nonzero d-vector")
            e = e / np.linalg.norm(e)
        a, b = float(a), float(b)
        lo, hi = a - abs(b), a + abs(b)
        if not lo > 0:
            raise ValidationError("cosine spectral density must stay positive (need a > |b|)")
        k = min(lo, 1.0 / hi, 1.0) if kappa_spec is None else kappa_spec
        return cls(d, "cosine", (a, b, tuple(float(v) for v in e)), float(k))

    @classmethod
    def table(cls, angles, values, kappa_spec=None):
        th = np.mod(np.asarray(angles, dtype=float), 2.0 * np.pi)
        v = np.asarray(values, dtype=float)
        if th.ndim != 1 or th.shape != v.shape or th.size < 2:
            raise ValidationError("table needs matching 1-d angle and value lists (>= 2 entries)")
        order = np.argsort(th)
        th, v = th[order], v[order]
        if np.any(np.diff(th) <= 0):
            raise ValidationError("table angles must be distinct modulo 2*pi")
        if not np.all(v > 0):
            raise ValidationError("table values must be positive")
        k = min(float(v.min()), 1.0 / float(v.max()), 1.0) if kappa_spec is None else kappa_spec
        return cls(2, "table", (tuple(th.tolist()), tuple(v.tolist())), float(k))

    # evaluation -------------------------------------------------------

    def __call__(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if self.reflected:
            xi = -xi
        if self.form == "constant":
            return np.full(xi.shape[0], self.params[0])
        if self.form == "cosine":
            a, b, e = self.params
            return a + b * (xi @ np.asarray(e))
        th_k, v_k = (np.asarray(p) for p in self.params)
        th = np.mod(np.arctan2(xi[:, 1], xi[:, 0]), 2.0 * np.pi)
        thp = np.concatenate([th_k[-1:] - 2.0 * np.pi, th_k, th_k[:1] + 2.0 * np.pi])
        vp = np.concatenate([v_k[-1:], v_k, v_k[:1]])
        return np.interp(th, thp, vp)

    def sup(self):
        if self.form == "constant":
            return self.params[0]
        if self.form == "cosine":
            return self.params[0] + abs(self.params[1])
        return max(self.params[1])

    def inf(self):
        if self.form == "constant":
            return self.params[0]
        if self.form == "cosine":
            return self.params[0] - abs(self.params[1])
        return min(self.params[1])

    @property
    def is_isotropic(self):
        return self.form == "constant"

    def breakpoints(self):
        """Angular kinks of the density (d = 2 tables), else ``None``."""
        if self.form != "table":
            return None
        th = np.asarray(self.params[0])
        return th + np.pi if self.reflected else th

    def dual(self):
        if self.form == "constant":
            return self
        return replace(self, reflected=not self.reflected)

    # serialization ----------------------------------------------------

    def to_json(self):
        if self.form == "constant":
            p = {"value": self.params[0]}
        elif self.form == "cosine":
            a, b, e = self.params
            if self.reflected:
                e = tuple(-v + 0.0 for v in e)
            p = {"a": a, "b": b, "direction": list(e)}
        else:
            th, v = self.params
            if self.reflected:
                th = tuple(float(np.mod(t + np.pi, 2.0 * np.pi)) for t in th)
            p = {"angles": list(th), "values": list(v)}
        return {"form": self.form, "params": p, "kappa_spec": self.kappa_spec}

    @classmethod
    def from_json(cls, d, doc):
        form = doc.get("form")
        p = doc.get("params", {}) or {}
        k = doc.get("kappa_spec")
        if form == "constant":
            return cls.constant(d, p.get("value", 1.0), kappa_spec=k)
        if form == "cosine":
            return cls.cosine(d, p.get("a", 1.0), p.get("b", 0.5), p.get("direction"), kappa_spec=k)
        if form == "table":
            if d != 2:
                raise ValidationError("table spectral densities are supported for d = 2 only")
            return cls.table(p.get("angles", []), p.get("values", []), kappa_spec=k)
        raise ValidationError(f"unknown spectral form {form!r}")


# --------------------------------------------------------------------------
# radial integrals


def stable_radial(u, alpha):
    """Closed-form radial integral of the compensated exponential.

    Returns ``int_0^inf (e^{iur} - 1 - comp) r^{-1-alpha} dr`` with the
    compensator of the alpha regime, elementwise in ``u``.
    """
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    if alpha == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            im = np.where(au > 0, u * (1.0 - EULER_GAMMA - np.log(np.where(au > 0, au, 1.0))), 0.0)
        return -0.5 * np.pi * au + 1j * im
    c = gamma_fn(-alpha) * au**alpha
    return c * np.cos(0.5 * np.pi * alpha) - 1j * np.sign(u) * c * np.sin(0.5 * np.pi * alpha)


def _sinc3(v):
    """(sin v - v) / v^3 without cancellation."""
    out = np.empty_like(v)
    small = np.abs(v) < 2e-2
    vs = v[small] ** 2
    out[small] = -1.0 / 6.0 + vs / 120.0 - vs**2 / 5040.0 + vs**3 / 362880.0
    vb = v[~small]
    out[~small] = (np.sin(vb) - vb) / vb**3
    return out


def _jacobi01(n, b):
    x, w = roots_jacobi(n, 0.0, b)
    return 0.5 * (1.0 + x), w * 2.0 ** (-1.0 - b)


def truncated_radial(u, alpha, tol=1e-12, n0=32, nmax=16384):
    """Radial integral over ``(0, 1)`` for the truncated kinds.

    Gauss-Jacobi quadrature absorbs the ``r^{-1-alpha}`` singularity; the
    node count doubles until successive results agree to ``tol``.

    Raises
    ------
    QuadratureError
        If ``nmax`` nodes do not reach the tolerance.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))

    def evaluate(n):
        r1, w1 = _jacobi01(n, 1.0 - alpha)
        v = np.outer(u, r1)
        re = (-2.0 * np.sin(0.5 * v) ** 2 / r1**2) @ w1
        if alpha < 1.0:
            r2, w2 = _jacobi01(n, -alpha)
            im = (np.sin(np.outer(u, r2)) / r2) @ w2
        else:
            r2, w2 = _jacobi01(n, 2.0 - alpha)
            im = (u[:, None] ** 3 * _sinc3(np.outer(u, r2))) @ w2
        return re + 1j * im

    n = n0
    prev = evaluate(n)
    scale = np.maximum(np.abs(u) ** 2, np.abs(u)) + 1e-300
    while True:
        n *= 2
        cur = evaluate(n)
        err = np.max(np.abs(cur - prev) / np.maximum(np.abs(cur), scale))
        if err <= tol:
            return cur
        if n >= nmax:
            raise QuadratureError(
                f"truncated radial quadrature did not converge (achieved {err:.3g})", achieved=float(err)
            )
        prev = cur


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class TruncationSplit:
    """Split ``f = g + h`` of a stable density at radius one.

    Attributes
    ----------
    parent : LevyModel
        The untruncated stable model with density ``f``.
    lam : float
        Total mass of the large-jump density ``h``.
    """

    parent: "LevyModel"
    lam: float

    def g_density(self, x):
        x = np.atleast_2d(x)
        f = levy_density(self.parent, x)
        return np.where(np.linalg.norm(x, axis=1) < 1.0, f, 0.0)

    def h_density(self, x):
        x = np.atleast_2d(x)
        f = levy_density(self.parent, x)
        return np.where(np.linalg.norm(x, axis=1) >= 1.0, f, 0.0)


@dataclass(frozen=True)
class LevyModel:
    """Generating triplet of a (truncated) strictly stable Levy process.

    Parameters
    ----------
    d : int
    alpha : float
        Stability index in (0, 2).
    kind : str
        One of ``Stable``, ``TruncatedStable``, ``StablePlusBrownian``,
        ``TruncatedPlusBrownian``.
    spectral : SpectralDensity
    A : tuple of tuples
        Diffusion matrix, zero unless the kind has a Brownian part.
    gamma : tuple
        Drift; nonzero values are only accepted when ``alpha == 1``.
    """

    d: int
    alpha: float
    kind: str
    spectral: SpectralDensity
    A: tuple
    gamma: tuple

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValidationError(f"dimension must be an integer >= 2, got {self.d}")
        if not (0.0 < self.alpha < 2.0):
            raise ValidationError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.spectral.d != self.d:
            raise ValidationError("spectral density dimension does not match the model")
        A = self.A_matrix
        if A.shape != (self.d, self.d):
            raise ValidationError("diffusion matrix has the wrong shape")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ValidationError("diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(A).min() < -1e-12:
            raise ValidationError("diffusion matrix must be nonnegative definite")
        if len(self.gamma) != self.d:
            raise ValidationError("drift has the wrong length")
        if self.alpha != 1.0 and np.any(self.gamma_vec != 0):
            raise ValidationError("a drift is only part of the triplet when alpha = 1")
        if self.alpha == 1.0:
            m = np.linalg.norm(self.first_moment)
            if m >= CENTERING_TOL * self.eta_mass:
                raise ValidationError(
                    f"alpha = 1 needs a centered spherical measure; |int xi eta(dxi)| = {m:.6g}"
                )

    # derived quantities -----------------------------------------------

    @property
    def A_matrix(self):
        return np.asarray(self.A, dtype=float).reshape(self.d, self.d)

    @property
    def gamma_vec(self):
        return np.asarray(self.gamma, dtype=float)

    @property
    def is_truncated(self):
        return self.kind in (TRUNCATED, TRUNCATED_BM)

    @property
    def has_brownian(self):
        return self.kind in (STABLE_BM, TRUNCATED_BM)

    @cached_property
    def _moments(self):
        sp = self.spectral
        area = sphere_area(self.d)
        if self.d > 3 and sp.form in ("constant", "cosine"):
            if sp.form == "constant":
                c = sp.params[0]
                return c * area, np.zeros(self.d), c * area / self.d * np.eye(self.d)
            a, b, e = sp.params
            e = -np.asarray(e) if sp.reflected else np.asarray(e)
            return a * area, b * area / self.d * e, a * area / self.d * np.eye(self.d)
        xi, w = kink_rule(self.d, None, n=16, extra_breaks=sp.breakpoints())
        pw = sp(xi) * w
        return float(pw.sum()), pw @ xi, (xi * pw[:, None]).T @ xi

    @property
    def eta_mass(self):
        """Total mass ``eta(S)`` of the spherical measure."""
        return self._moments[0]

    @property
    def first_moment(self):
        """``int xi eta(dxi)``."""
        m = self._moments[1].copy()
        m[np.abs(m) < 1e-15 * self.eta_mass] = 0.0
        return m

    @property
    def second_moment(self):
        """``int xi xi^T eta(dxi)``."""
        return self._moments[2].copy()

    @cached_property
    def truncation_split(self):
        if not self.is_truncated:
            return None
        parent = replace(self, kind=STABLE)
        return TruncationSplit(parent=parent, lam=self.eta_mass / self.alpha)

    def scale_constant(self):
        """Isotropic-equivalent constant ``C`` with ``psi(z) ~ -C |z|^alpha``.

        Exact for constant spectral densities, and the value for the
        sphere-averaged density otherwise.
        """
        phibar = self.eta_mass / sphere_area(self.d)
        return phibar * _stable_constant(self.d, self.alpha)

    # serialization ----------------------------------------------------

    def to_json(self):
        return {
            "d": self.d,
            "alpha": self.alpha,
            "kind": self.kind,
            "spectral": self.spectral.to_json(),
            "A": [list(r) for r in self.A_matrix.tolist()],
            "gamma": [float(g) + 0.0 for g in self.gamma],
        }


def _stable_constant(d, alpha):
    """``K_alpha * int_S |xi_1|^alpha dsigma`` for the isotropic exponent."""
    if alpha == 1.0:
        k = 0.5 * np.pi
    else:
        k = -gamma_fn(-alpha) * np.cos(0.5 * np.pi * alpha)
    m = 2.0 * np.pi ** (0.5 * (d - 1)) * gamma_fn(0.5 * (alpha + 1)) / gamma_fn(0.5 * (d + alpha))
    return float(k * m)


def _tuple_matrix(A, d):
    A = np.zeros((d, d)) if A is None else np.asarray(A, dtype=float)
    return tuple(tuple(float(v) + 0.0 for v in row) for row in A.reshape(A.shape[0], -1))


def _tuple_vec(g, d):
    g = np.zeros(d) if g is None else np.asarray(g, dtype=float)
    return tuple(float(v) + 0.0 for v in g.ravel())


def _check_spectral(d, spectral):
    if not isinstance(spectral, SpectralDensity):
        raise ValidationError("spectral must be a SpectralDensity")
    if spectral.d != d:
        raise ValidationError("spectral density dimension does not match d")


def make_stable_model(d, alpha, spectral, gamma=None):
    """Strictly alpha-stable model with density ``phi(x/|x|) |x|^{-(d+alpha)}``.

    Raises
    ------
    ValidationError
        For ``d < 2``, ``alpha`` outside (0, 2), or ``alpha = 1`` with a
        spherical measure that is not centered.
    """
    if int(d) != d or d < 2:
        raise ValidationError(f"dimension must be an integer >= 2, got {d}")
    _check_spectral(d, spectral)
    return LevyModel(int(d), float(alpha), STABLE, spectral, _tuple_matrix(None, d), _tuple_vec(gamma, d))


def make_truncated_model(d, alpha, spectral, gamma=None):
    """Stable model with all jumps of size at least one removed."""
    if int(d) != d or d < 2:
        raise ValidationError(f"dimension must be an integer >= 2, got {d}")
    _check_spectral(d, spectral)
    return LevyModel(int(d), float(alpha), TRUNCATED, spectral, _tuple_matrix(None, d), _tuple_vec(gamma, d))


def add_brownian(model, A):
    """Add an independent Brownian motion with covariance matrix ``A``."""
    A = np.asarray(A, dtype=float)
    if A.shape != (model.d, model.d):
        raise ValidationError(f"diffusion matrix must be {model.d}x{model.d}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12):
        raise ValidationError("diffusion matrix must be symmetric")
    if np.linalg.eigvalsh(0.5 * (A + A.T)).min() < -1e-12:
        raise ValidationError("diffusion matrix must be nonnegative definite")
    kind = STABLE_BM if model.kind in (STABLE, STABLE_BM) else TRUNCATED_BM
    return replace(model, kind=kind, A=_tuple_matrix(model.A_matrix + A, model.d))


def dual(model):
    """Model of ``-X``: reflected spectral density and negated drift."""
    return replace(
        model,
        spectral=model.spectral.dual(),
        gamma=tuple(-g + 0.0 for g in model.gamma),
    )


def levy_density(model, x):
    """Levy density at ``x`` (rows of a 2-d array or a single vector).

    Raises
    ------
    ValidationError
        If any evaluation point is the origin.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    r = np.linalg.norm(x, axis=1)
    if np.any(r == 0):
        raise ValidationError("the Levy density is not defined at the origin")
    f = model.spectral(x / r[:, None]) * r ** (-(model.d + model.alpha))
    if model.is_truncated:
        f = np.where(r < 1.0, f, 0.0)
    return float(f[0]) if single else f


def characteristic_exponent(model, z, tol=1e-9):
    """Characteristic exponent ``psi`` with ``E exp(i z.X_1) = exp(psi(z))``.

    Parameters
    ----------
    model : LevyModel
    z : array_like, shape (d,) or (k, d)
    tol : float
        Relative tolerance for the sphere quadrature refinement check.

    Returns
    -------
    complex or ndarray of complex

    Raises
    ------
    QuadratureError
        If refining the sphere rule changes the result by more than ``tol``.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zs = np.atleast_2d(z)
    if zs.shape[1] != model.d:
        raise ValidationError("frequency has the wrong dimension")
    out = np.empty(zs.shape[0], dtype=complex)
    A = model.A_matrix
    g = model.gamma_vec
    for k, zk in enumerate(zs):
        nz = np.linalg.norm(zk)
        if nz == 0:
            out[k] = 0.0
            continue
        jump = _jump_exponent(model, zk, tol)
        out[k] = jump + 1j * float(zk @ g) - 0.5 * float(zk @ A @ zk)
    return complex(out[0]) if single else out


def _jump_exponent(model, z, tol):
    sp = model.spectral
    radial = truncated_radial if model.is_truncated else stable_radial

    def integrate(n, levels):
        xi, w = kink_rule(model.d, z, n=n, levels=levels, extra_breaks=sp.breakpoints())
        return complex(np.sum(w * sp(xi) * radial(xi @ z, model.alpha)))

    coarse = integrate(12, 20)
    if model.d > 3:
        return coarse
    fine = integrate(20, 24)
    err = abs(fine - coarse) / max(abs(fine), 1e-300)
    if err > tol:
        raise QuadratureError(f"sphere quadrature did not converge (achieved {err:.3g})", achieved=err)
    return fine


@dataclass(frozen=True)
class AssumptionClass:
    """Classification of a model against the two standing assumptions.

    ``case`` is ``"A1a"`` (stable kinds, with the weight ``L``) or
    ``"A1b"`` (truncated kinds, with the lower-bounded density ``M`` on
    ``B(0, R0)``).
    """

    case: str
    R0: float | None
    L: object = field(default=None, repr=False)
    M: object = field(default=None, repr=False)
    inf_M: float | None = None


def classify_assumption(model, R0=None):
    """Classify ``model`` and return the associated weight or density.

    For the stable kinds ``L(x) = |x|^{d+alpha} / phi(x/|x|)`` so that
    ``L . nu`` is Lebesgue measure.  For truncated kinds ``M = g`` is bounded
    below on the open ball ``B(0, R0)`` for any ``R0 <= 1``; the default is
    ``R0 = 1``, the truncation radius.
    """
    if not model.is_truncated:
        d, a, sp = model.d, model.alpha, model.spectral

        def L(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            r = np.linalg.norm(x, axis=1)
            if np.any(r == 0):
                raise ValidationError("L is evaluated away from the origin")
            out = r ** (d + a) / sp(x / r[:, None])
            return out if out.size > 1 else float(out[0])

        return AssumptionClass("A1a", None, L=L)
    R0 = 1.0 if R0 is None else float(R0)
    if not (0.0 < R0 <= 1.0):
        raise ValidationError("R0 must lie in (0, 1] for truncated kinds")

    def M(x):
        out = levy_density(model, x)
        return out

    # g is radially decreasing, so its infimum over B(0, R0) sits on |x| = R0
    inf_M = float(model.spectral.inf() * R0 ** (-(model.d + model.alpha)))
    return AssumptionClass("A1b", R0, M=M, inf_M=inf_M)


def check_L_integrable(model, boxes, n=64):
    """Integrate ``L`` over boxes ``[(lo, hi), ...]`` away from the origin.

    Returns the list of integrals; all are finite when the check passes.
    Uses a tensor Gauss-Legendre rule in d = 2, 3 and Sobol points beyond.
    """
    cls = classify_assumption(model)
    if cls.case != "A1a":
        raise ValidationError("L is defined for the stable kinds only")
    out = []
    for lo, hi in boxes:
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        x, w = np.polynomial.legendre.leggauss(n)
        grids = [0.5 * (h - l) * x + 0.5 * (h + l) for l, h in zip(lo, hi)]
        wts = [0.5 * (h - l) * w for l, h in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, model.d)
        wm = np.ones(1)
        for ww in wts:
            wm = np.outer(wm, ww).ravel()
        if np.any(np.linalg.norm(mesh, axis=1) == 0):
            raise ValidationError("integration box touches the origin")
        out.append(float(np.sum(cls.L(mesh) * wm)))
    return out


# --------------------------------------------------------------------------
# JSON


def model_from_json(doc):
    """Build a model from its JSON description (dict or string)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        d = int(doc["d"])
        alpha = float(doc["alpha"])
        kind = doc.get("kind", STABLE)
        spectral = SpectralDensity.from_json(d, doc.get("spectral", {"form": "constant"}))
    except KeyError as exc:
        raise ValidationError(f"model description is missing field {exc.args[0]!r}") from None
    if kind not in KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    base = make_truncated_model if kind in (TRUNCATED, TRUNCATED_BM) else make_stable_model
    m = base(d, alpha, spectral, doc.get("gamma"))
    A = doc.get("A")
    if kind in (STABLE_BM, TRUNCATED_BM):
        m = add_brownian(m, np.eye(d) if A is None else A)
    elif A is not None and np.any(np.asarray(A, dtype=float) != 0):
        raise ValidationError(f"kind {kind} has no Brownian part but A is nonzero")
    return m


def model_to_json(model):
    return model.to_json()
