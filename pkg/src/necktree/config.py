"""JSON config parsing for families, models, and gauges.

Schemas
    family: {"ambient_dim": d, "systems": [{"label": str, "weight": w,
             "maps": [{"ratio": c, "isometry": [[...]], "translation": [...]}]}]}
    model:  {"model": "homogeneous" | "recursive" | {"v_variable": V} |
             {"neck_block": {"templates": [{"weight": w, "levels": [[p, ...], ...]}]}},
             "seed": u64}
    gauge:  {"s": real | "auto", "family": "power" |
             {"loglog_power": {"beta": b}} |
             {"h1": {"beta": b | "auto", "gamma": g}} | {"h1_star": {...}}}

"auto" entries are resolved against a family: s becomes the almost-sure
dimension for the requested model and beta the envelope-matching default.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Optional, Union

from .errors import ConfigError
from .gauges import GaugeFunction
from .rifs import HOMOGENEOUS, IFS, RIFSFamily, SimilarityMap, dimension
from .trees import BlockTemplate, ModelSpec


def load_json(path: Union[str, Path]) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")


def content_hash(data: bytes) -> str:
    """64-bit content hash, hex encoded."""
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def file_hash(path: Union[str, Path]) -> str:
    return content_hash(Path(path).read_bytes())


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{where}: missing field {key!r}")
    return obj[key]


def family_from_dict(obj: dict) -> RIFSFamily:
    dim = int(obj.get("ambient_dim", 1))
    systems_raw = _require(obj, "systems", "family config")
    systems = []
    weights = []
    for i, sraw in enumerate(systems_raw):
        where = f"family config system[{i}]"
        maps = []
        for j, mraw in enumerate(_require(sraw, "maps", where)):
            ratio = _require(mraw, "ratio", f"{where} map[{j}]")
            maps.append(
                SimilarityMap(
                    ratio=float(ratio),
                    isometry=mraw.get("isometry"),
                    translation=mraw.get("translation"),
                )
            )
        systems.append(IFS(maps=tuple(maps), label=str(sraw.get("label", f"sys{i}"))))
        weights.append(float(_require(sraw, "weight", where)))
    return RIFSFamily(systems=tuple(systems), weights=tuple(weights), ambient_dim=dim)


def family_to_dict(family: RIFSFamily) -> dict:
    systems = []
    for sysm, w in zip(family.systems, family.weights):
        maps = []
        for m in sysm.maps:
            entry: dict[str, Any] = {"ratio": m.ratio}
            if m.isometry is not None:
                entry["isometry"] = m.isometry.tolist()
            if m.translation is not None:
                entry["translation"] = m.translation.tolist()
            maps.append(entry)
        systems.append({"label": sysm.label, "weight": w, "maps": maps})
    return {"ambient_dim": family.ambient_dim, "systems": systems}


def model_from_dict(obj: dict) -> tuple[ModelSpec, Optional[int]]:
    """Parse a model spec; returns (spec, default seed or None)."""
    kind_raw = _require(obj, "model", "model config")
    seed = obj.get("seed")
    if isinstance(kind_raw, str):
        if kind_raw in ("homogeneous", "recursive"):
            return ModelSpec(kind=kind_raw), seed
        raise ConfigError(f"model config: unknown model {kind_raw!r}")
    if isinstance(kind_raw, dict):
        if "v_variable" in kind_raw:
            return ModelSpec(kind="v_variable", v=int(kind_raw["v_variable"])), seed
        if "neck_block" in kind_raw:
            spec = kind_raw["neck_block"]
            templates = []
            for i, traw in enumerate(_require(spec, "templates", "model config neck_block")):
                levels = tuple(
                    tuple(float(p) for p in dist)
                    for dist in _require(traw, "levels", f"neck_block template[{i}]")
                )
                templates.append(BlockTemplate(levels=levels, weight=float(traw.get("weight", 1.0))))
            return ModelSpec(kind="neck_block", templates=tuple(templates)), seed
    raise ConfigError("model config: field 'model' is malformed")


def gauge_from_dict(
    obj: dict,
    family: Optional[RIFSFamily] = None,
    model_kind: str = HOMOGENEOUS,
) -> GaugeFunction:
    """Parse a gauge spec, resolving "auto" entries against ``family``."""
    s_raw = _require(obj, "s", "gauge config")
    fam_raw = _require(obj, "family", "gauge config")
    if s_raw == "auto":
        if family is None:
            raise ConfigError("gauge config: s = 'auto' needs a family")
        rifs_model = HOMOGENEOUS if model_kind in (HOMOGENEOUS, "v_variable", "neck_block") else "recursive"
        s = dimension(family, rifs_model)
    else:
        s = float(s_raw)

    def resolve_beta(raw: Any) -> float:
        if raw == "auto":
            if family is None:
                raise ConfigError("gauge config: beta = 'auto' needs a family")
            from .measure import beta_hat

            return beta_hat(family, s)
        return float(raw)

    if fam_raw == "power":
        return GaugeFunction(s=s, family="power")
    if isinstance(fam_raw, dict):
        if "loglog_power" in fam_raw:
            return GaugeFunction(
                s=s, family="loglog_power", beta=resolve_beta(_require(fam_raw["loglog_power"], "beta", "gauge config"))
            )
        for name in ("h1", "h1_star"):
            if name in fam_raw:
                sub = fam_raw[name]
                return GaugeFunction(
                    s=s,
                    family=name,
                    beta=resolve_beta(_require(sub, "beta", "gauge config")),
                    gamma=float(sub.get("gamma", 0.0)),
                )
    raise ConfigError("gauge config: field 'family' is malformed")
