"""Tree (JSON-able dict) serialization for maps and regions.

Every map exposes `to_tree()`; this module is the matching reader.  Trees
are plain dicts of the shape {"type": ..., "params": {...}, "children":
[...]}, so scenario files, reports, and tests share one format.  Maps whose
state is a construction trace rather than data (piecewise glue results,
flow-based deformations) serialize for inspection but are rebuilt by
re-running their pipeline, not through this reader.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import ParameterError
from .maps import (
    AffineMap,
    CompositeMap,
    ExtendByIdentityMap,
    IdentityMap,
    NewtonInverseMap,
    PolyPerturbMap,
    RadialSqueezeMap,
    SmoothMap,
    TranslatedMap,
    TwistMap,
    builtin_families,
    construct_builtin,
    region_from_tree,
    region_to_tree,
)
from .profiles import TransitionProfile

__all__ = [
    "map_to_tree",
    "map_from_tree",
    "region_to_tree",
    "region_from_tree",
    "save_map",
    "load_map",
]


def map_to_tree(mapping: SmoothMap) -> dict:
    return mapping.to_tree()


def _child(tree: dict, dimension):
    kids = tree.get("children") or []
    if len(kids) != 1:
        raise ParameterError(f"map tree '{tree.get('type')}' expects exactly one child")
    return map_from_tree(kids[0], dimension=dimension)


def map_from_tree(tree: dict, *, dimension: int | None = None) -> SmoothMap:
    """Rebuild a map from its tree.  `dimension` supplies context for
    families whose parameters do not pin it down (identity, rotation, ...).
    """
    if not isinstance(tree, dict) or "type" not in tree:
        raise ParameterError(f"not a map tree: {tree!r}")
    kind = tree["type"]
    p = dict(tree.get("params") or {})

    if kind == "identity":
        n = p.get("dimension", dimension)
        if n is None:
            raise ParameterError("identity map tree needs a dimension")
        return IdentityMap(int(n))
    if kind == "affine":
        return AffineMap(p["matrix"], p.get("offset"))
    if kind == "twist":
        return TwistMap(p["center"], p["angle"], p["inner"], p["outer"], tuple(p.get("plane", (0, 1))))
    if kind == "poly_perturb":
        return PolyPerturbMap(
            p["center"], p["coeff"], p.get("src_axis", 0), p.get("dst_axis", 1), p.get("check_radius")
        )
    if kind == "radial_squeeze":
        prof = TransitionProfile(p["a"], p["b"], p["c0"], p.get("c1", 1.0))
        return RadialSqueezeMap(prof, p["center"])
    if kind == "radial_squeeze_inverse":
        return _child(tree, dimension).inverse()
    if kind == "composite":
        kids = [map_from_tree(t, dimension=dimension) for t in tree.get("children") or []]
        if not kids:
            raise ParameterError("composite map tree has no children")
        return CompositeMap(kids)
    if kind == "translated":
        return TranslatedMap(_child(tree, dimension), p["shift"])
    if kind == "newton_inverse":
        return NewtonInverseMap(_child(tree, dimension), rtol=p.get("rtol", 1e-12), max_iter=p.get("max_iter", 50))
    if kind == "extend_by_identity":
        return ExtendByIdentityMap(_child(tree, dimension), region_from_tree(p["region"]))
    if kind in builtin_families():
        n = p.pop("dimension", dimension)
        if n is None:
            raise ParameterError(f"map tree '{kind}' needs a dimension")
        return construct_builtin(kind, p, int(n))
    raise ParameterError(f"map tree type '{kind}' cannot be rebuilt from data")


def save_map(mapping: SmoothMap, path) -> None:
    with open(path, "w") as fh:
        json.dump(map_to_tree(mapping), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_map(path, *, dimension: int | None = None) -> SmoothMap:
    with open(path) as fh:
        return map_from_tree(json.load(fh), dimension=dimension)


def _json_ready(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    return value


def dump_json(data: dict, path) -> None:
    """Stable JSON writer used for reports: sorted keys, trailing newline."""
    with open(path, "w") as fh:
        json.dump(_json_ready(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
