"""Experiment configuration: parsing, validation and canonical hashing."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import LevyIUError, ValidationError
from .geometry import domain_from_json
from .levy_model import model_from_json

VERIFY_KEYS = (
    "switching", "spectral", "semigroup", "iu", "convergence", "exit", "green", "harnack", "lifetime",
    "regeneration", "chebyshev", "density_bound",
)

DEFAULTS = {
    "refine": False,
    "refine_paths_factor": None,
    "convergence_t_list": None,
    "n_paths": 2000,
    "green_paths": 4000,
    "step": None,
    "tuples": 10000,
    "harnack_u": None,
    "regeneration_paths": 2000,
    "regeneration_resolution": None,
    "assumption": None,
    "caps": {},
}


class ConfigError(LevyIUError, ValueError):
    """Configuration problems; ``errors`` lists every violation found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``raw`` keeps the original document; ``model`` and ``domain`` are the
    constructed objects.
    """

    raw: dict
    model: object = field(repr=False)
    domain: object = field(repr=False)
    resolution: float
    t_list: list
    seed: int
    n_paths: int
    green_paths: int
    step: float | None
    refine: bool
    convergence_t_list: list | None
    verify: dict
    assumption: dict | None
    caps: dict
    tuples: int
    harnack_u: float | None
    regeneration_paths: int
    regeneration_resolution: float | None
    refine_paths_factor: float | None = None
    path: str | None = None

    def level_paths(self, n):
        """Path count on the refined grid.

        Halving the resolution multiplies the cell count by ``2**d``; the
        default factor keeps the expected count per cell unchanged.
        """
        f = self.refine_paths_factor if self.refine_paths_factor is not None else 2.0 ** self.model.d
        return int(-(-int(round(n * f)) // 4) * 4)

    def subtree_hash(self, *keys):
        """Hash of the canonical JSON of the named top-level entries."""
        doc = {k: self.raw.get(k) for k in keys}
        return canonical_hash(doc)

    @property
    def config_hash(self):
        return canonical_hash(self.raw)


def canonical_hash(doc):
    s = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(s.encode()).hexdigest()


def _key_lines(text):
    lines = {}
    for m in re.finditer(r'"([A-Za-z_][A-Za-z0-9_]*)"\s*:', text):
        lines.setdefault(m.group(1), text.count("\n", 0, m.start()) + 1)
    return lines


def parse_config(path):
    """Read and validate a JSON experiment configuration.

    Raises
    ------
    ConfigError
        With ``path:line:col`` for JSON syntax errors, or with every
        validation violation (each tagged with the line of its key when it
        can be located).
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read: {exc.strerror}"]) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: parse error: {exc.msg}"]) from None
    cfg = config_from_dict(doc, lines=_key_lines(text), source=str(path))
    cfg.path = str(path)
    return cfg


def config_from_dict(doc, lines=None, source="<config>"):
    lines = lines or {}
    errs = []

    def err(key, msg):
        ln = lines.get(key)
        errs.append(f"{source}:{ln}: {key}: {msg}" if ln else f"{source}: {key}: {msg}")

    if not isinstance(doc, dict):
        raise ConfigError([f"{source}: top level must be an object"])
    known = {"model", "domain", "resolution", "t_list", "seed", "verify"} | set(DEFAULTS)
    for k in doc:
        if k not in known:
            err(k, "unknown key")
    model = domain = None
    if "model" not in doc:
        err("model", "missing")
    else:
        try:
            model = model_from_json(doc["model"])
        except (ValidationError, LevyIUError, TypeError, KeyError, ValueError) as exc:
            err("model", str(exc))
    if "domain" not in doc:
        err("domain", "missing")
    else:
        try:
            domain = domain_from_json(doc["domain"])
        except (ValidationError, LevyIUError, TypeError, KeyError, ValueError) as exc:
            err("domain", str(exc))
    if model is not None and domain is not None and model.d != domain.d:
        err("domain", f"dimension {domain.d} does not match the model dimension {model.d}")

    seed = doc.get("seed")
    if seed is None:
        err("seed", "missing (a seed is required; there is no clock-based default)")
    elif not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        err("seed", "must be an integer in [0, 2^64)")

    res = doc.get("resolution")
    if res is None:
        err("resolution", "missing")
    elif not _num(res) or res <= 0:
        err("resolution", "must be a positive number")

    def times(key, required):
        v = doc.get(key)
        if v is None:
            if required:
                err(key, "missing")
            return None
        if not isinstance(v, list) or not v or not all(_num(t) and t > 0 for t in v):
            err(key, "must be a nonempty list of positive numbers")
            return None
        if any(b <= a for a, b in zip(v, v[1:])):
            err(key, "must be sorted in strictly ascending order")
        return [float(t) for t in v]

    t_list = times("t_list", True)
    ct = times("convergence_t_list", False)
    if ct is not None:
        if len(ct) < 4:
            err("convergence_t_list", "needs at least 4 times")
        if any(t < 1 for t in ct):
            err("convergence_t_list", "times must be at least 1")

    for key in ("n_paths", "green_paths", "regeneration_paths", "tuples"):
        v = doc.get(key, DEFAULTS[key])
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            err(key, "must be a positive integer")
    npaths = doc.get("n_paths", DEFAULTS["n_paths"])
    if isinstance(npaths, int) and not isinstance(npaths, bool) and 0 < npaths < 1000:
        err("n_paths", "must be at least 1000")
    for key in ("step", "harnack_u", "regeneration_resolution", "refine_paths_factor"):
        v = doc.get(key)
        if v is not None and (not _num(v) or v <= 0):
            err(key, "must be a positive number")
    if not isinstance(doc.get("refine", False), bool):
        err("refine", "must be a boolean")

    verify = {k: True for k in VERIFY_KEYS}
    verify["regeneration"] = False
    v = doc.get("verify", {})
    if not isinstance(v, dict):
        err("verify", "must be an object")
    else:
        for k, val in v.items():
            if k not in VERIFY_KEYS:
                err("verify", f"unknown check {k!r}")
            elif not isinstance(val, bool):
                err("verify", f"{k} must be a boolean")
            else:
                verify[k] = val

    asm = doc.get("assumption")
    if asm is not None:
        if not isinstance(asm, dict) or asm.get("case") not in ("A4a", "A4b"):
            err("assumption", "needs case 'A4a' or 'A4b'")
        elif asm["case"] == "A4a" and not ("x0" in asm and "r0" in asm):
            err("assumption", "A4a needs x0 and r0")
        elif asm["case"] == "A4b" and not ("kappa_fat" in asm and "R" in asm):
            err("assumption", "A4b needs kappa_fat and R")
    caps = doc.get("caps", {})
    if not isinstance(caps, dict) or not all(k in ("max_particle_steps",) and _num(x) and x > 0 for k, x in caps.items()):
        err("caps", "only a positive max_particle_steps is supported")
    if verify.get("regeneration") and asm is None:
        err("verify", "regeneration needs an assumption block")

    if errs:
        raise ConfigError(errs)
    return ExperimentConfig(
        raw=doc, model=model, domain=domain, resolution=float(res), t_list=t_list, seed=int(seed),
        n_paths=int(doc.get("n_paths", DEFAULTS["n_paths"])),
        green_paths=int(doc.get("green_paths", DEFAULTS["green_paths"])),
        step=None if doc.get("step") is None else float(doc["step"]),
        refine=bool(doc.get("refine", False)), convergence_t_list=ct, verify=verify, assumption=asm,
        caps=dict(caps), tuples=int(doc.get("tuples", DEFAULTS["tuples"])),
        harnack_u=None if doc.get("harnack_u") is None else float(doc["harnack_u"]),
        regeneration_paths=int(doc.get("regeneration_paths", DEFAULTS["regeneration_paths"])),
        regeneration_resolution=doc.get("regeneration_resolution"),
        refine_paths_factor=None if doc.get("refine_paths_factor") is None else float(doc["refine_paths_factor"]),
    )


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)
