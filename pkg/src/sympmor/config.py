"""Experiment configuration: YAML schema, defaults, validation.

A config has four sections (model, integrator, output, plus a top
level seed) and one or more reduction variants, given either as a
single mapping under "reduction" or a list under "reductions".
Unknown keys are rejected anywhere with the offending dotted path, so
typos fail loudly instead of silently using a default.
"""

import copy

import yaml

from .errors import ConfigError

MODEL_DEFAULTS = {
    "sine_gordon": {"kind": "sine_gordon", "n": 500, "l": 50.0, "c": 0.2,
                    "x0": None, "sign": 1},
    "fem_wave": {"kind": "fem_wave", "n_nodes": 64, "length": 1.0,
                 "kappa": 1.0, "force": 1.0},
}

INTEGRATOR_DEFAULTS = {
    "scheme": "implicit_midpoint",
    "dt": 0.01,
    "t_final": 50.0,
    "newton_tol": 1e-12,
    "newton_max_iter": 50,
    "snapshot_stride": 1,
}

REDUCTION_DEFAULTS = {
    "name": None,
    "method": "greedy_weighted",
    "k": 100,
    "delta": None,
    "modes": None,
    "nonlinear": "exact",
    "deim_k": None,
    "metric": "xinv",
}

OUTPUT_DEFAULTS = {
    "directory": "results",
    "write_package": True,
    "store_reference": True,
    "csv": True,
    "figures": True,
}

_METHODS = ("greedy_weighted", "greedy_euclidean", "pod")
_NONLINEAR = ("none", "exact", "deim")
_METRICS = ("xinv", "euclidean")
_SCHEMES = ("implicit_midpoint", "stormer_verlet")


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _check_unknown(d, allowed, path):
    unknown = [k for k in d if k not in allowed]
    if unknown:
        _fail(path, f"unknown keys {sorted(unknown)} (allowed: {sorted(allowed)})")


def _as_mapping(val, path):
    if val is None:
        return {}
    if not isinstance(val, dict):
        _fail(path, f"expected a mapping, got {type(val).__name__}")
    return val


def _number(d, key, path, lo=None, hi=None, allow_none=False, integer=False):
    val = d[key]
    if val is None:
        if allow_none:
            return None
        _fail(f"{path}.{key}", "must not be null")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(f"{path}.{key}", f"expected a number, got {val!r}")
    if integer:
        if int(val) != val:
            _fail(f"{path}.{key}", f"expected an integer, got {val!r}")
        val = int(val)
    else:
        val = float(val)
    if lo is not None and val < lo:
        _fail(f"{path}.{key}", f"must be >= {lo}, got {val}")
    if hi is not None and val > hi:
        _fail(f"{path}.{key}", f"must be <= {hi}, got {val}")
    return val


def _choice(d, key, path, options):
    val = d[key]
    if val not in options:
        _fail(f"{path}.{key}", f"must be one of {options}, got {val!r}")
    return val


def _boolean(d, key, path):
    val = d[key]
    if not isinstance(val, bool):
        _fail(f"{path}.{key}", f"expected true/false, got {val!r}")
    return val


def _validate_model(raw):
    raw = _as_mapping(raw, "model")
    kind = raw.get("kind", "sine_gordon")
    if kind not in MODEL_DEFAULTS:
        _fail("model.kind", f"must be one of {tuple(MODEL_DEFAULTS)}, got {kind!r}")
    out = dict(MODEL_DEFAULTS[kind])
    _check_unknown(raw, set(out), "model")
    out.update(raw)
    if kind == "sine_gordon":
        out["n"] = _number(out, "n", "model", lo=3, integer=True)
        out["l"] = _number(out, "l", "model", lo=1e-12)
        out["c"] = _number(out, "c", "model", lo=-1.0 + 1e-12, hi=1.0 - 1e-12)
        out["x0"] = _number(out, "x0", "model", allow_none=True)
        if out["x0"] is not None and not 0.0 < out["x0"] < out["l"]:
            _fail("model.x0", f"must lie inside (0, {out['l']})")
        sign = out["sign"]
        if sign not in (1, -1):
            _fail("model.sign", f"must be 1 or -1, got {sign!r}")
    else:
        out["n_nodes"] = _number(out, "n_nodes", "model", lo=5, integer=True)
        out["length"] = _number(out, "length", "model", lo=1e-12)
        out["kappa"] = _number(out, "kappa", "model", lo=1e-12)
        out["force"] = _number(out, "force", "model", allow_none=True)
    return out


def _validate_integrator(raw):
    raw = _as_mapping(raw, "integrator")
    out = dict(INTEGRATOR_DEFAULTS)
    _check_unknown(raw, set(out), "integrator")
    out.update(raw)
    out["scheme"] = _choice(out, "scheme", "integrator", _SCHEMES)
    out["dt"] = _number(out, "dt", "integrator", lo=1e-15)
    out["t_final"] = _number(out, "t_final", "integrator", lo=0.0)
    out["newton_tol"] = _number(out, "newton_tol", "integrator", lo=1e-16)
    out["newton_max_iter"] = _number(out, "newton_max_iter", "integrator",
                                     lo=1, integer=True)
    out["snapshot_stride"] = _number(out, "snapshot_stride", "integrator",
                                     lo=1, integer=True)
    n_steps = round(out["t_final"] / out["dt"])
    if abs(n_steps * out["dt"] - out["t_final"]) > 1e-9 * max(out["t_final"], 1.0):
        _fail("integrator.dt", f"t_final {out['t_final']} is not a whole number "
                               f"of steps of {out['dt']}")
    if n_steps % out["snapshot_stride"]:
        _fail("integrator.snapshot_stride",
              f"must divide the step count {n_steps}")
    return out


def _validate_reduction(raw, path):
    raw = _as_mapping(raw, path)
    out = dict(REDUCTION_DEFAULTS)
    _check_unknown(raw, set(out), path)
    out.update(raw)
    out["method"] = _choice(out, "method", path, _METHODS)
    out["k"] = _number(out, "k", path, lo=1, integer=True, allow_none=True)
    out["delta"] = _number(out, "delta", path, lo=0.0, allow_none=True)
    if out["k"] is None and out["delta"] is None:
        _fail(path, "needs a basis size k or a tolerance delta")
    out["modes"] = _number(out, "modes", path, lo=1, integer=True, allow_none=True)
    if out["modes"] is not None and out["method"] != "pod":
        _fail(f"{path}.modes", "only applies to the pod method")
    if out["method"] == "pod" and out["k"] is None and out["modes"] is None:
        _fail(path, "pod needs a size (k or modes); it has no tolerance mode")
    out["nonlinear"] = _choice(out, "nonlinear", path, _NONLINEAR)
    out["deim_k"] = _number(out, "deim_k", path, lo=1, integer=True, allow_none=True)
    if out["nonlinear"] == "deim" and out["deim_k"] is None:
        _fail(f"{path}.deim_k", "required when nonlinear is 'deim'")
    out["metric"] = _choice(out, "metric", path, _METRICS)
    if out["name"] is None:
        out["name"] = out["method"]
    elif not isinstance(out["name"], str) or not out["name"]:
        _fail(f"{path}.name", "must be a nonempty string")
    return out


def _validate_output(raw):
    raw = _as_mapping(raw, "output")
    out = dict(OUTPUT_DEFAULTS)
    _check_unknown(raw, set(out), "output")
    out.update(raw)
    if not isinstance(out["directory"], str) or not out["directory"]:
        _fail("output.directory", "must be a nonempty string")
    for key in ("write_package", "store_reference", "csv", "figures"):
        out[key] = _boolean(out, key, "output")
    return out


def validate_config(raw):
    """Validate a raw mapping; returns the fully-defaulted config dict."""
    raw = _as_mapping(raw, "config")
    allowed = {"model", "integrator", "seed", "reduction", "reductions", "output"}
    _check_unknown(raw, allowed, "config")
    if "reduction" in raw and "reductions" in raw:
        _fail("config", "give either 'reduction' or 'reductions', not both")
    cfg = {
        "model": _validate_model(raw.get("model")),
        "integrator": _validate_integrator(raw.get("integrator")),
        "seed": 0,
        "output": _validate_output(raw.get("output")),
    }
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        _fail("config.seed", f"must be a nonnegative integer, got {seed!r}")
    cfg["seed"] = seed
    if "reductions" in raw:
        entries = raw["reductions"]
        if not isinstance(entries, list) or not entries:
            _fail("config.reductions", "must be a nonempty list")
        cfg["reductions"] = [
            _validate_reduction(entry, f"reductions[{i}]")
            for i, entry in enumerate(entries)]
    else:
        cfg["reductions"] = [_validate_reduction(raw.get("reduction"), "reduction")]
    names = [r["name"] for r in cfg["reductions"]]
    if len(set(names)) != len(names):
        _fail("config.reductions", f"variant names must be unique, got {names}")
    return cfg


def load_raw(path):
    """Read a YAML config file without validating it."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def load_config(path):
    """Read and validate a YAML config file."""
    return validate_config(load_raw(path))


def apply_override(raw, dotted, text):
    """Apply one 'section.key=value' override to a raw config mapping.

    List entries are addressed by index (reductions.0.k).  The value
    text is parsed as a YAML scalar, so numbers, booleans and null work
    the way they would in the file.
    """
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError:
        value = text
    parts = dotted.split(".")
    node = raw
    for i, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError(f"override path {dotted!r}: bad index {part!r}") from None
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(
                    f"override path {dotted!r}: {'.'.join(parts[:i + 1])} "
                    "is not a section")
        else:
            raise ConfigError(f"override path {dotted!r} does not address a section")
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigError(f"override path {dotted!r}: bad index {last!r}") from None
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"override path {dotted!r} does not address a section")
    return raw


def default_config():
    """The built-in experiment setup (validated copy)."""
    return validate_config({})


def merge_overrides(raw, overrides):
    raw = copy.deepcopy(raw) if raw is not None else {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        dotted, _, text = item.partition("=")
        apply_override(raw, dotted.strip(), text.strip())
    return raw
