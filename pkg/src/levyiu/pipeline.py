"""End-to-end experiment: model, geometry, simulation, spectral extraction, verification."""

from __future__ import annotations

import hashlib
import json
import platform
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .errors import LevyIUError, PositivityError, ResourceCapExceeded
from .geometry import certify_kappa_fat, component_labels, inner_sets, make_grid, roughly_connected
from .levy_model import classify_assumption
from .report import emit_report
from .rng import RngStream
from .semigroup import (
    SubstochasticMatrix, dense_eigen_check, dual_transition_matrices, eigenvector_cross_check,
    estimate_transition_matrices, green_field, lambda0_consistency, semigroup_residual, spectral_triple,
    switching_details, write_matrix,
)
from .semigroup import GreenField
from .verifier import (
    FAIL, HYPOTHESIS, MAX_FLAGGED, PASS, REFINE_FACTOR, IUReport, chebyshev_constant, classify_failure,
    conditioned_lifetime, convergence_rate, density_bound_constant, exit_time_vs_eigenfunction,
    green_lower_bound, harnack_ratios, iu_constants, ratio_propagation, regeneration_check,
)

SWITCH_TOL = 4.0
SEMIGROUP_TOL = 4.0
DENSE_TOL = 1e-8
GEOMETRIC_TOL = 1e-10
RATE_TOL = 0.10


class StageError(LevyIUError):
    """A module error attributed to the pipeline stage that raised it."""

    def __init__(self, stage, exc):
        self.stage = stage
        self.original = exc
        super().__init__(f"stage {stage}: {type(exc).__name__}: {exc}")


@dataclass
class RunResult:
    report: IUReport
    exit_code: int
    manifest: dict
    out_dir: Path
    fields: dict = field(default_factory=dict, repr=False)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Recorder:
    def __init__(self, out, cfg, workers):
        self.out = out
        self.cfg = cfg
        self.workers = workers
        self.stages = []
        self.files = []
        self.budget = cfg.caps.get("max_particle_steps")
        (out / "cache").mkdir(parents=True, exist_ok=True)

    @contextmanager
    def stage(self, name):
        try:
            yield
        except ResourceCapExceeded:
            raise
        except StageError:
            raise
        except LevyIUError as exc:
            raise StageError(name, exc) from exc
        self.stages.append(name)

    def spend(self, cost):
        """Reserve particle steps from the global cap."""
        if self.budget is None:
            return
        if cost > self.budget:
            raise ResourceCapExceeded(f"stage needs {cost:.3g} particle steps, {self.budget:.3g} left under the cap")
        self.budget -= cost

    def add(self, path):
        self.files.append(Path(path))

    def manifest(self, status, failed=None, error=None):
        files = {}
        for p in sorted(set(self.files)):
            if p.exists():
                files[str(p.relative_to(self.out))] = _sha256(p)
        doc = {
            "config_hash": self.cfg.config_hash,
            "seed": self.cfg.seed,
            "status": status,
            "completed_stages": list(self.stages),
            "versions": {"artifact": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__},
            "files": files,
        }
        if failed:
            doc["failed_stage"] = failed
            doc["error"] = error
        path = self.out / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return doc


# --------------------------------------------------------------------------
# cache


def _save_matrices(path, mats):
    arrs = {}
    for k, m in enumerate(mats):
        for name in ("entries", "stderr", "row_weight", "row_relvar", "count_var"):
            arrs[f"{k}_{name}"] = getattr(m, name)
        arrs[f"{k}_meta"] = np.array([m.t, m.n_paths, m.design_effect, m.weight_inflation, float(m.dual), m.step])
        arrs[f"{k}_method"] = np.array(m.method)
    np.savez(path, n=np.array(len(mats)), **arrs)


def _load_matrices(path, grid):
    z = np.load(path)
    out = []
    for k in range(int(z["n"])):
        t, n_paths, deff, infl, du, step = z[f"{k}_meta"]
        out.append(SubstochasticMatrix(
            t=float(t), entries=z[f"{k}_entries"], stderr=z[f"{k}_stderr"], n_paths=int(n_paths), grid=grid,
            row_weight=z[f"{k}_row_weight"], row_relvar=z[f"{k}_row_relvar"], count_var=z[f"{k}_count_var"],
            design_effect=float(deff), weight_inflation=float(infl), method=str(z[f"{k}_method"]),
            dual=bool(du), step=float(step),
        ))
    return out


_GREEN_FIELDS = ("G", "G_se", "mean_exit", "mean_exit_se", "layer_time", "dual_G", "dual_G_se", "dual_mean_exit",
                 "dual_mean_exit_se", "dual_layer_time")


def _save_green(path, gf):
    arrs = {k: getattr(gf, k) for k in _GREEN_FIELDS if getattr(gf, k) is not None}
    np.savez(path, meta=np.array([gf.censored_fraction, gf.lambda_hat, gf.step, gf.n_paths]), **arrs)


def _load_green(path, grid):
    z = np.load(path)
    cf, lam, step, n = z["meta"]
    kw = {k: z[k] for k in _GREEN_FIELDS if k in z}
    return GreenField(grid=grid, censored_fraction=float(cf), lambda_hat=float(lam), step=float(step),
                      n_paths=int(n), **kw)


def _cached(rec, name, key, compute, save, load):
    """Load ``name`` from the cache keyed by the hash of ``key``, or compute and store it."""
    from .config import canonical_hash

    h = canonical_hash(key)[:16]
    path = rec.out / "cache" / f"{name}-{h}.npz"
    if path.exists():
        return load(path)
    val = compute()
    save(path, val)
    return val


# --------------------------------------------------------------------------
# run


def _times(cfg):
    ts = set(cfg.t_list)
    if cfg.convergence_t_list:
        ts |= set(cfg.convergence_t_list)
    if cfg.verify.get("semigroup"):
        ts.add(2 * cfg.t_list[0])
    return sorted(ts)


def _simulate_level(rec, cfg, grid, level, step):
    """Transition matrices (and, on the base grid, their duals), each cached separately."""
    times = _times(cfg) if level == "base" else list(cfg.t_list)
    dual_times = list(cfg.t_list) if (level == "base" and cfg.verify.get("switching")) else []
    seed = RngStream(cfg.seed).child(level)
    n_paths = cfg.n_paths if level == "base" else cfg.level_paths(cfg.n_paths)

    def one(dual_run, ts):
        key = {"model": cfg.raw["model"], "domain": cfg.raw["domain"], "resolution": grid.resolution, "times": ts,
               "n_paths": n_paths, "step": step, "seed": cfg.seed, "level": level, "dual": dual_run}

        def compute():
            rec.spend(float(grid.n) * n_paths * int(round(max(ts) / step)))
            fn = dual_transition_matrices if dual_run else estimate_transition_matrices
            return fn(cfg.model, cfg.domain, grid, ts, n_paths, step, seed, workers=rec.workers)

        name = f"matrices-{level}-{'dual' if dual_run else 'primal'}"
        return _cached(rec, name, key, compute, _save_matrices, lambda p: _load_matrices(p, grid))

    P = {m.t: m for m in one(False, times)}
    Ph = {m.t: m for m in one(True, dual_times)} if dual_times else {}
    return P, Ph


def _green_level(rec, cfg, grid, level, step):
    n_paths = cfg.green_paths if level == "base" else cfg.level_paths(cfg.green_paths)
    key = {"model": cfg.raw["model"], "domain": cfg.raw["domain"], "resolution": grid.resolution,
           "green_paths": n_paths, "step": step, "seed": cfg.seed, "level": level}
    seed = RngStream(cfg.seed).child(level)

    def compute():
        return green_field(cfg.model, cfg.domain, grid, n_paths, seed, step=step, workers=rec.workers)

    return _cached(rec, f"green-{level}", key, compute, _save_green, lambda p: _load_green(p, grid))


def _t_ref(cfg, times):
    return 1.0 if 1.0 in times else cfg.t_list[len(cfg.t_list) // 2]


def _verdict(status, classification=None, **kw):
    v = {"status": status}
    if status == FAIL:
        v["classification"] = classification
    v.update(kw)
    return v


def run_experiment(cfg, out_dir, workers=None):
    """Run every configured stage and write the report and manifest.

    Returns
    -------
    RunResult
        With ``exit_code`` 0 (all pass), 1 (failure) or 2 (hypothesis
        violated).

    Raises
    ------
    StageError
        For module errors other than hypothesis violations, naming the stage.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = _Recorder(out, cfg, workers)
    current = ["init"]
    try:
        return _run(cfg, rec, current)
    except ResourceCapExceeded as exc:
        rep = IUReport(t_list=list(cfg.t_list))
        rep.verdicts["resources"] = _verdict(FAIL, "resource_cap", stage=current[0], message=str(exc))
        rep.details["completed_stages"] = list(rec.stages)
        _write_report(rec, rep)
        man = rec.manifest("partial", failed=current[0], error=str(exc))
        return RunResult(rep, 1, man, out)
    except StageError as exc:
        rec.manifest("partial", failed=exc.stage, error=str(exc.original))
        raise


def _write_report(rec, rep):
    for fmt in ("json", "text"):
        p = rec.out / f"report.{'json' if fmt == 'json' else 'txt'}"
        emit_report(rep.to_dict(), fmt, p)
        rec.add(p)


def _run(cfg, rec, current):
    model, domain = cfg.model, cfg.domain
    rep = IUReport(t_list=list(cfg.t_list))
    det = rep.details
    fields = {}
    hyp_ok = True

    current[0] = "model"
    with rec.stage("model"):
        asm = classify_assumption(model)
        det["assumption_class"] = asm.case

    current[0] = "geometry"
    with rec.stage("geometry"):
        grid = make_grid(domain, cfg.resolution)
        rc = roughly_connected(domain)
        labels = component_labels(domain, grid.centers)
        det["grid"] = {"n": grid.n, "resolution": grid.resolution,
                       "boundary_layer_fraction": grid.boundary_layer_fraction,
                       "overhang_fraction": grid.overhang_fraction}
        det["roughly_connected"] = bool(rc)
        det["components"] = len(rc.components)
        msgs = []
        if model.is_truncated and not rc:
            hyp_ok = False
            msgs.append("truncated model on a domain that is not roughly connected")
        sets = None
        if cfg.assumption is not None:
            a = dict(cfg.assumption)
            if a["case"] == "A4b":
                cert = certify_kappa_fat(domain, float(a["kappa_fat"]), float(a["R"]))
                det["kappa_fat"] = {"verdict": cert.verdict, "n_probes": cert.n_probes}
                if cert.passed:
                    sets = inner_sets(domain, "A4b", {"certificate": cert, "model": model, "R0": asm.R0 or 1.0})
                else:
                    hyp_ok = False
                    msgs.append("kappa-fat certificate failed")
            else:
                sets = inner_sets(domain, "A4a", {"x0": a["x0"], "r0": a["r0"]})
        if sets is not None:
            det["inner_sets"] = {k: getattr(sets, k).describe() for k in ("B0", "C1", "B2")}
        rep.verdicts["hypotheses"] = (_verdict(PASS) if hyp_ok else
                                      _verdict(FAIL, HYPOTHESIS, messages=msgs))
        grid.to_csv(rec.out / "grid.csv")
        rec.add(rec.out / "grid.csv")

    step = cfg.step if cfg.step is not None else None
    if step is None:
        from .sampler import auto_step

        step = auto_step(model, domain)
        # snap so that every configured time is a multiple of the step
        base = min(_times(cfg))
        step = base / max(1, int(np.ceil(base / step)))
    det["step"] = step

    current[0] = "matrices"
    with rec.stage("matrices"):
        P, Ph = _simulate_level(rec, cfg, grid, "base", step)
        mdir = rec.out / "matrices"
        mdir.mkdir(exist_ok=True)
        tag = {"config_hash": cfg.config_hash, "seed": cfg.seed}
        for name, d in (("P", P), ("Phat", Ph)):
            for t, m in d.items():
                pre = mdir / f"{name}_t{t:g}"
                write_matrix(pre, m, extra=tag)
                rec.add(f"{pre}.csv")
                rec.add(f"{pre}.json")
        differ = labels[:, None] != labels[None, :]
        if differ.any():
            cross = max(float(m.entries[differ].max()) for m in P.values())
            det["cross_component"] = {"pairs": int(differ.sum()), "max_entry": cross,
                                      "flagged": bool(not hyp_ok or cross == 0.0)}

    times = sorted(P)
    t_ref = _t_ref(cfg, times)
    current[0] = "triple"
    tri = None
    with rec.stage("triple"):
        try:
            tri = spectral_triple(P[t_ref])
        except PositivityError as exc:
            rep.verdicts["spectral"] = _verdict(FAIL, HYPOTHESIS if not hyp_ok else classify_failure(),
                                                message=str(exc), zero_pairs=int(len(exc.zero_pairs)))
            if hyp_ok:
                hyp_ok = False
                rep.verdicts["hypotheses"] = _verdict(FAIL, HYPOTHESIS, messages=["kernel is not positive"])
    if tri is None:
        rep.notes.append("spectral triple unavailable: dependent certificates skipped")
        if "cross_component" in det:
            rep.notes.append("densities between different components are identically zero")
        current[0] = "report"
        with rec.stage("report"):
            _write_report(rec, rep)
        man = rec.manifest("complete")
        return RunResult(rep, rep.exit_code(), man, rec.out, fields)

    trip = {"t_used": tri.t_used, "lambda0": tri.lambda0, "lambda0_se": tri.lambda0_se, "rho": tri.rho,
            "residual_phi": tri.residual_phi, "residual_psi": tri.residual_psi, "phi0": tri.phi0,
            "psi0": tri.psi0, "phi0_se": tri.phi0_se, "psi0_se": tri.psi0_se, "config_hash": cfg.config_hash,
            "seed": cfg.seed}
    (rec.out / "triple.json").write_text(json.dumps(_plain(trip), indent=2, sort_keys=True) + "\n")
    rec.add(rec.out / "triple.json")
    rec.stages.append("triple_export")
    fields.update(P=P, Phat=Ph, triple=tri, grid=grid)

    gf = None
    need_green = any(cfg.verify.get(k) for k in ("exit", "green", "lifetime", "chebyshev"))
    if need_green:
        current[0] = "green"
        with rec.stage("green"):
            gf = _green_level(rec, cfg, grid, "base", step)
            np.savetxt(rec.out / "mean_exit.csv", np.column_stack([gf.mean_exit, gf.mean_exit_se, gf.dual_mean_exit,
                                                                    gf.dual_mean_exit_se]),
                       delimiter=",", header="mean_exit,stderr,dual_mean_exit,dual_stderr", comments="")
            rec.add(rec.out / "mean_exit.csv")
            fields["green"] = gf

    fine = None
    if cfg.refine:
        current[0] = "refinement"
        with rec.stage("refinement"):
            g2 = make_grid(domain, cfg.resolution / 2)
            P2, _ = _simulate_level(rec, cfg, g2, "refined", step)
            tri2 = spectral_triple(P2[_t_ref(cfg, sorted(P2))])
            gf2 = _green_level(rec, cfg, g2, "refined", step) if need_green else None
            fine = (g2, P2, tri2, gf2)
            fields["refined"] = fine

    current[0] = "verify"
    with rec.stage("verify"):
        _verify(cfg, rep, P, Ph, tri, gf, fine, hyp_ok, sets)
    current[0] = "report"
    with rec.stage("report"):
        _write_report(rec, rep)
    man = rec.manifest("complete")
    return RunResult(rep, rep.exit_code(), man, rec.out, fields)


def _plain(o):
    if isinstance(o, dict):
        return {k: _plain(v) for k, v in o.items()}
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return o


def _fail_class(hyp_ok, within_noise=False, refine_ok=False):
    return classify_failure(hypothesis_ok=hyp_ok, within_noise=within_noise, refinement_fixes=refine_ok)


def _verify(cfg, rep, P, Ph, tri, gf, fine, hyp_ok, sets):
    det = rep.details
    v = cfg.verify
    tl = list(cfg.t_list)
    rng = RngStream(cfg.seed).child("verify")

    if v.get("switching") and Ph:
        rows = {}
        ok = True
        noise = True
        for t in tl:
            s = switching_details(P[t], Ph[t])
            z = s.z[~np.isnan(s.z)]
            rows[str(t)] = {"residual": s.residual, "n_pairs": s.n_pairs, "frac_above_3": float(np.mean(z > 3))}
            ok &= s.residual < SWITCH_TOL
            noise &= float(np.mean(z > 3)) <= 2 * 2 * stats.norm.sf(3)
        rep.verdicts["switching"] = _verdict(PASS if ok else FAIL, _fail_class(hyp_ok, noise), per_t=rows,
                                             tolerance=SWITCH_TOL)

    if v.get("spectral"):
        dense = dense_eigen_check(P[tri.t_used], tri)
        others = [t for t in sorted(P) if t != tri.t_used]
        t_alt = 0.5 if 0.5 in P and tri.t_used != 0.5 else (others[0] if others else tri.t_used)
        l_a, l_b, gap = lambda0_consistency(P[t_alt], P[tri.t_used])
        tri_alt = spectral_triple(P[t_alt])
        cross = eigenvector_cross_check(tri_alt, tri)
        zc = float(stats.norm.isf(0.025 / (2 * tri.phi0.size)))
        ok = (tri.lambda0 < 0 and np.all(tri.phi0 > 0) and np.all(tri.psi0 > 0) and dense["rho"] < DENSE_TOL
              and dense["phi"] < DENSE_TOL and dense["psi"] < DENSE_TOL and gap < 4.0 and cross < zc)
        rep.verdicts["spectral"] = _verdict(
            PASS if ok else FAIL, _fail_class(hyp_ok), lambda0=tri.lambda0, lambda0_se=tri.lambda0_se,
            t_used=tri.t_used, t_alt=t_alt, lambda0_alt=l_a, gap=gap, dense=dense, cross_check_z=cross,
            cross_check_tol=zc, residual_phi=tri.residual_phi, residual_psi=tri.residual_psi)

    if v.get("semigroup"):
        t0 = tl[0]
        if 2 * t0 in P:
            sg = semigroup_residual(P[t0], P[t0], P[2 * t0])
            ok = sg.residual < SEMIGROUP_TOL and sg.row_sum_ok
            rep.verdicts["semigroup"] = _verdict(PASS if ok else FAIL, _fail_class(hyp_ok), t=t0,
                                                 residual=sg.residual, bias_term=sg.bias_term)

    if v.get("iu"):
        iu = iu_constants([P[t] for t in tl], tri)
        ok = True
        per = {}
        for c in iu:
            rep.c_lower[str(c.t)] = c.c_lower
            rep.c_upper[str(c.t)] = c.c_upper
            good = c.c_lower > 0 and np.isfinite(c.c_upper) and c.flagged_fraction < MAX_FLAGGED and c.coherent
            ok &= good
            per[str(c.t)] = {"c_lower": c.c_lower, "c_upper": c.c_upper, "c_lower_conf": c.c_lower_conf,
                             "flagged_fraction": c.flagged_fraction, "eigen_mean": c.eigen_mean,
                             "coherent": c.coherent}
        extra = {}
        refine_ok = False
        if fine is not None:
            g2, P2, tri2, _ = fine
            iu2 = iu_constants([P2[t] for t in tl], tri2)
            fac = {}
            stable = True
            fine_ok = True
            for a, b in zip(iu, iu2):
                f = max(a.c_lower / b.c_lower, b.c_lower / a.c_lower, a.c_upper / b.c_upper, b.c_upper / a.c_upper) \
                    if b.c_lower > 0 else float("inf")
                fac[str(a.t)] = f
                stable &= f < REFINE_FACTOR
                fine_ok &= b.c_lower > 0 and b.flagged_fraction < MAX_FLAGGED
                per[str(a.t)]["refined"] = {"c_lower": b.c_lower, "c_upper": b.c_upper,
                                            "flagged_fraction": b.flagged_fraction}
            extra = {"refinement_factor": fac}
            refine_ok = fine_ok and not ok
            ok &= stable
        rep.verdicts["iu"] = _verdict(PASS if ok else FAIL, _fail_class(hyp_ok, refine_ok=refine_ok), per_t=per,
                                      **extra)

    if v.get("convergence") and cfg.convergence_t_list:
        fit = convergence_rate([P[t] for t in cfg.convergence_t_list], tri, rng=rng.child("convergence"))
        rep.nu_rate = fit.nu_rate
        rep.nu_intercept = fit.nu_intercept
        rep.verdicts["convergence"] = _verdict(
            fit.verdict, _fail_class(hyp_ok), status_detail=fit.status, t=fit.t, m=fit.m, noise_floor=fit.noise_floor,
            below_noise=fit.below_noise, fit_residual=fit.fit_residual)

    if gf is not None and v.get("exit"):
        er = exit_time_vs_eigenfunction(gf, tri)
        rep.exit_ratio_sup = {"phi": er.sup_phi, "psi": er.sup_psi}
        ok = all(np.isfinite(x) and x > 0 for x in (er.sup_phi, er.inf_phi, er.sup_psi, er.inf_psi))
        extra = {}
        if fine is not None and fine[3] is not None:
            er2 = exit_time_vs_eigenfunction(fine[3], fine[2])
            f = er.factor_vs(er2)
            extra = {"refinement_factor": f, "refined": {"sup_phi": er2.sup_phi, "inf_phi": er2.inf_phi,
                                                          "sup_psi": er2.sup_psi, "inf_psi": er2.inf_psi}}
            ok &= f < REFINE_FACTOR
        rep.verdicts["exit"] = _verdict(PASS if ok else FAIL, _fail_class(hyp_ok), sup_phi=er.sup_phi,
                                        inf_phi=er.inf_phi, sup_psi=er.sup_psi, inf_psi=er.inf_psi, c3=er.c3, **extra)

    if gf is not None and v.get("green"):
        gb = green_lower_bound(gf, tri)
        rep.green_c1 = gb.c1
        ok = gb.c1 > 0 and gb.c2 > 0 and gb.row_consistency < 3.0 + 1e-6
        rep.verdicts["green"] = _verdict(PASS if ok else FAIL, _fail_class(hyp_ok), c1=gb.c1, c2=gb.c2,
                                         c1_conf=gb.c1_conf, c2_conf=gb.c2_conf, flagged_fraction=gb.flagged_fraction,
                                         row_consistency=gb.row_consistency)

    if v.get("harnack"):
        u = cfg.harnack_u if cfg.harnack_u is not None else tri.t_used
        ts = [t for t in tl if t >= u]
        if ts:
            t = ts[0]
            h = harnack_ratios(P[t], P[t], u, rng.child("harnack"), n_tuples=cfg.tuples)
            rep.harnack_c[str(u)] = h.c
            later = [s for s in sorted(P) if s > t]
            prop = ratio_propagation(P[t], P[later[0]], h.c_family1, rng.child("mar")) if later else None
            ok = h.c > 0 and h.stable and h.identity_max == 1.0
            rep.verdicts["harnack"] = _verdict(PASS if ok else FAIL, _fail_class(hyp_ok), u=u, t=t, c=h.c,
                                               c_half=h.c_half, c_family1=h.c_family1, c_family2=h.c_family2,
                                               n_tuples=h.n_tuples, n_excluded=h.n_excluded,
                                               identity_max=h.identity_max, propagation=prop)

    if v.get("lifetime"):
        Pt = P[tri.t_used]
        L1 = conditioned_lifetime(Pt, tri.phi0, tri.lambda0, check_geometric=True)
        ok = L1.geometric_gap < GEOMETRIC_TOL
        info = {"phi0": {"sup": L1.sup, "geometric_gap": L1.geometric_gap}}
        rep.lifetime_sup["phi0"] = L1.sup
        if gf is not None:
            y0 = int(np.argmax(np.minimum(tri.phi0, tri.psi0)))
            col = gf.G[:, y0]
            if np.all(col > 0):
                L2 = conditioned_lifetime(Pt, col, tri.lambda0)
                rep.lifetime_sup["green"] = L2.sup
                info["green"] = {"y0": y0, "sup": L2.sup, "rate": L2.rate_final, "rate_rel_error": L2.rate_rel_error}
                ok &= bool(np.isfinite(L2.sup) and L2.rate_rel_error < RATE_TOL)
            else:
                info["green"] = {"y0": y0, "error": "Green column has zero entries"}
                ok = False
        rep.notes.append("conditioned lifetimes are certified for h = phi0 and h = G(., y0) only, "
                         "not for the whole class of positive superharmonic functions")
        rep.verdicts["lifetime"] = _verdict(PASS if ok else FAIL, _fail_class(hyp_ok), **info)

    if gf is not None and v.get("chebyshev"):
        c = chebyshev_constant([P[t] for t in tl], gf)
        rep.verdicts["chebyshev"] = _verdict(PASS if np.isfinite(c) and c > 0 else FAIL, _fail_class(hyp_ok), C=c)

    if v.get("density_bound"):
        c = density_bound_constant([P[t] for t in tl], cfg.model)
        rep.verdicts["density_bound"] = _verdict(PASS if np.isfinite(c) else FAIL, _fail_class(hyp_ok), c=c)

    if v.get("regeneration") and sets is not None:
        rg = regeneration_check(cfg.model, cfg.domain, sets, cfg.regeneration_paths, rng.child("regeneration"),
                                mesh_resolution=cfg.regeneration_resolution, step=det.get("step"))
        rep.verdicts["regeneration"] = _verdict(PASS if rg.passed else FAIL, _fail_class(hyp_ok),
                                                **{k: getattr(rg, k) for k in rg.__dataclass_fields__})
