"""Report serialisation: canonical JSON and a fixed-width text summary."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationError

FORMATS = ("json", "text")


def _as_dict(report):
    return report.to_dict() if hasattr(report, "to_dict") else report


def render_json(report):
    return json.dumps(_as_dict(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


_KEY_FIELDS = {
    "hypotheses": ("messages",),
    "switching": ("tolerance",),
    "spectral": ("lambda0", "lambda0_se", "gap", "cross_check_z"),
    "semigroup": ("residual",),
    "iu": (),
    "convergence": ("status_detail", "fit_residual"),
    "exit": ("sup_phi", "inf_phi", "c3", "refinement_factor"),
    "green": ("c1", "c2", "flagged_fraction"),
    "harnack": ("c", "c_half", "identity_max"),
    "lifetime": (),
    "chebyshev": ("C",),
    "density_bound": ("c",),
    "regeneration": ("hit_ratio_inf", "t0", "main_c"),
    "resources": ("stage", "message"),
}


def render_text(report):
    """Fixed-width table with one line per verdict, followed by the headline constants."""
    doc = _as_dict(report)
    lines = [f"{'check':<16}{'status':<8}{'classification':<22}summary", "-" * 78]
    for name in sorted(doc.get("verdicts", {})):
        v = doc["verdicts"][name]
        keys = _KEY_FIELDS.get(name, ())
        summ = "  ".join(f"{k}={_fmt(v[k])}" for k in keys if k in v)
        lines.append(f"{name:<16}{v['status']:<8}{(v.get('classification') or '-'):<22}{summ}")
    lines.append("")
    lines.append(f"{'t':<10}{'c_lower':>16}{'c_upper':>16}")
    for t in doc.get("t_list", []):
        lo = doc.get("c_lower", {}).get(str(float(t)))
        hi = doc.get("c_upper", {}).get(str(float(t)))
        lines.append(f"{_fmt(float(t)):<10}{_fmt(lo) if lo is not None else '-':>16}{_fmt(hi) if hi is not None else '-':>16}")
    lines.append("")
    for key in ("nu_rate", "nu_intercept", "green_c1"):
        if doc.get(key) is not None:
            lines.append(f"{key:<16}{_fmt(doc[key])}")
    for key in ("harnack_c", "exit_ratio_sup", "lifetime_sup"):
        for k, val in sorted(doc.get(key, {}).items()):
            lines.append(f"{key + '[' + k + ']':<24}{_fmt(val)}")
    for note in doc.get("notes", []):
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def emit_report(report, fmt, path=None):
    """Serialise ``report`` as ``"json"`` or ``"text"``; write to ``path`` when given.

    Raises
    ------
    ValidationError
        For any other format name.
    """
    if fmt == "json":
        s = render_json(report)
    elif fmt == "text":
        s = render_text(report)
    else:
        raise ValidationError(f"unknown report format {fmt!r}; choose one of {', '.join(FORMATS)}")
    if path is not None:
        Path(path).write_text(s)
    return s


def load_report(out_dir):
    p = Path(out_dir) / "report.json"
    if not p.exists():
        raise ValidationError(f"no report.json in {out_dir}")
    return json.loads(p.read_text())
