"""JSON file formats and deterministic serialisation.

Model files hold either ``{"d", "dY", "W", "P0"?}`` with ``W[y][x][xp]`` or
``{"d", "dY", "Wmat", "V", "P0"?}`` with ``Wmat[x][xp]`` and ``V[y][xp]``.
General generator files hold ``{"gens": [...]}`` where every entry is
``{"dense": W-shaped array}`` or ``{"sparse": [{"y", "x", "xp", "v"}, ...]}``.
Independent generator files hold ``{"gens": [{"ga": [[...]], "gb": [[...]]}, ...]}``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import IndepModel, YTransitionModel, validate, validate_distribution


@dataclass(frozen=True)
class LoadedModel:
    """A parsed model file; ``model`` is general, ``indep`` set for the independent form."""

    model: YTransitionModel
    indep: IndepModel | None
    P0: np.ndarray | None
    digest: str


def _require(cond, msg):
    if not cond:
        raise ValidationError(msg)


def _int_field(data, key):
    v = data.get(key)
    _require(isinstance(v, int) and not isinstance(v, bool) and v >= 1, f"'{key}' must be a positive integer")
    return v


def _array(value, shape, what):
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"'{what}' is not a numeric array") from exc
    _require(a.shape == shape, f"'{what}' has shape {a.shape}, expected {shape}")
    _require(bool(np.all(np.isfinite(a))), f"'{what}' has non-finite entries")
    return a


def digest_bytes(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def model_digest(model: YTransitionModel) -> str:
    """SHA-256 of the canonical serialisation of ``W``."""
    return digest_bytes(dumps({"d": model.d, "dY": model.dY, "W": model.W}).encode())


def parse_model(data: dict, digest: str = "") -> LoadedModel:
    _require(isinstance(data, dict), "model file must hold a JSON object")
    d = _int_field(data, "d")
    dY = _int_field(data, "dY")
    has_general = "W" in data
    has_indep = "Wmat" in data or "V" in data
    _require(has_general != has_indep, "exactly one of 'W' or ('Wmat', 'V') must be present")
    indep = None
    if has_general:
        model = YTransitionModel(_array(data["W"], (dY, d, d), "W"))
    else:
        _require("Wmat" in data and "V" in data, "independent form needs both 'Wmat' and 'V'")
        indep = IndepModel(_array(data["Wmat"], (d, d), "Wmat"), _array(data["V"], (dY, d), "V"))
        validate(indep).raise_if_invalid("independent model")
        model = YTransitionModel(indep.Wmat[None, :, :] * indep.V[:, None, :])
    validate(model).raise_if_invalid()
    P0 = None
    if data.get("P0") is not None:
        P0 = _array(data["P0"], (d,), "P0")
        validate_distribution(P0, d).raise_if_invalid("P0")
    return LoadedModel(model, indep, P0, digest)


def load_model(path) -> LoadedModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return parse_model(data, digest_bytes(raw))


def model_to_json(model: YTransitionModel | IndepModel, P0=None) -> dict:
    if isinstance(model, IndepModel):
        out = {"d": model.d, "dY": model.dY, "Wmat": model.Wmat.tolist(), "V": model.V.tolist()}
    else:
        out = {"d": model.d, "dY": model.dY, "W": model.W.tolist()}
    if P0 is not None:
        out["P0"] = np.asarray(P0, dtype=float).tolist()
    return out


def save_model(path, model, P0=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model_to_json(model, P0), pretty=True))
        fh.write("\n")


# ---------------------------------------------------------------------------
# Generators


def parse_generators(data: dict, d: int, dY: int):
    """Return ("general", array (l, dY, d, d)) or ("independent", (ga, gb))."""
    _require(isinstance(data, dict) and isinstance(data.get("gens"), list), "generator file needs a 'gens' list")
    entries = data["gens"]
    if entries and all(isinstance(e, dict) and "ga" in e for e in entries):
        ga = np.stack([_array(e["ga"], (d, d), "ga") for e in entries])
        gb = np.stack([_array(e["gb"], (dY, d), "gb") for e in entries])
        return "independent", (ga, gb)
    gens = []
    for i, e in enumerate(entries):
        _require(isinstance(e, dict), f"generator {i} must be an object")
        if "dense" in e:
            gens.append(_array(e["dense"], (dY, d, d), f"gens[{i}].dense"))
        elif "sparse" in e:
            g = np.zeros((dY, d, d))
            for t in e["sparse"]:
                try:
                    y, x, xp, v = int(t["y"]), int(t["x"]), int(t["xp"]), float(t["v"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValidationError(f"gens[{i}].sparse has a malformed entry") from exc
                _require(0 <= y < dY and 0 <= x < d and 0 <= xp < d, f"gens[{i}].sparse index out of range")
                g[y, x, xp] += v
            gens.append(g)
        else:
            raise ValidationError(f"generator {i} needs 'dense', 'sparse' or 'ga'/'gb'")
    return "general", np.array(gens).reshape(len(gens), dY, d, d)


def load_generators(path, d: int, dY: int):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return parse_generators(data, d, dY)


def generators_to_json(gens) -> dict:
    return {"gens": [{"dense": np.asarray(g).tolist()} for g in gens]}


def indep_generators_to_json(ga, gb) -> dict:
    return {"gens": [{"ga": np.asarray(a).tolist(), "gb": np.asarray(b).tolist()} for a, b in zip(ga, gb)]}


# ---------------------------------------------------------------------------
# Deterministic JSON


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return json.dumps(None)
    s = format(x, ".17g")
    return s if ("." in s or "e" in s) else s + ".0"


def _plain(obj):
    """Convert numpy containers and scalars to plain Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _encode(obj, indent, level) -> str:
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(k) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + (sep + pad).join(items) + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        # keep numeric rows on one line even when pretty printing
        if indent is not None and all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, None, 0) for v in obj) + "]"
        items = [_encode(v, indent, level + 1) for v in obj]
        return "[" + pad + (sep + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, pretty: bool = False) -> str:
    """JSON with floats written to 17 significant digits and keys in insertion order."""
    return _encode(_plain(obj), 2 if pretty else None, 0)
