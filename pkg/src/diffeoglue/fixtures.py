"""Bundled seeded scenarios: the fixture set behind tests, demos, and docs.

Everything here is plain data (scenario dicts ready for parse_scenario), so
the same definitions feed the test suite, the `demo` subcommand, and the
shipped fixtures/ directory of JSON files.
"""
from __future__ import annotations

import math
import os


def _rotation(n, angle, center, plane=(0, 1)):
    return {"type": "rotation", "params": {"dimension": n, "angle": angle,
                                           "center": list(center), "plane": list(plane)}}


def _shear(n, amount, center, row=0, col=1):
    return {"type": "shear", "params": {"dimension": n, "amount": amount,
                                        "row": row, "col": col, "center": list(center)}}


def _twist(center, angle, inner, outer, plane=(0, 1)):
    return {"type": "twist", "params": {"center": list(center), "angle": angle,
                                        "inner": inner, "outer": outer, "plane": list(plane)}}


def _poly(center, coeff, src=0, dst=1, check_radius=2.5):
    return {"type": "poly_perturb", "params": {"center": list(center), "coeff": coeff,
                                               "src_axis": src, "dst_axis": dst,
                                               "check_radius": check_radius}}


def _identity(n):
    return {"type": "identity", "params": {"dimension": n}}


def _translation(n, offset):
    matrix = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    return {"type": "affine", "params": {"matrix": matrix, "offset": list(offset)}}


def _family_tree(family, n, center, *, strength=1.0):
    if family == "rotation":
        return _rotation(n, 0.7 * strength, center)
    if family == "shear":
        return _shear(n, 0.45 * strength, center)
    if family == "twist":
        return _twist(center, 0.9 * strength, 0.35, 1.3)
    if family == "poly_perturb":
        return _poly(center, 0.35 * strength)
    raise ValueError(f"unknown fixture family {family}")


def _scenario(name, kind, n, seed, task, *, steps=96, tolerances=None, samples=None):
    out = {
        "format": "diffeoglue-scenario",
        "version": 1,
        "name": name,
        "kind": kind,
        "dimension": n,
        "seed": seed,
        "steps": steps,
        "task": task,
    }
    if tolerances:
        out["tolerances"] = tolerances
    if samples:
        out["samples"] = samples
    return out


def extension_cases() -> list:
    """20 seeded ball-extension scenarios: 16 on-center family/dimension/
    epsilon combinations plus 4 off-center or strengthened variants."""
    cases = []
    index = 0
    for n in (2, 3):
        for family in ("rotation", "shear", "twist", "poly_perturb"):
            for eps in (0.2, 0.5):
                center = [0.0] * n
                cases.append(_scenario(
                    f"extend-{family}-{n}d-eps{int(eps * 100):03d}",
                    "extend", n, 1000 + index,
                    {"map": _family_tree(family, n, center), "center": center,
                     "radius": 1.0, "margin": 0.35, "epsilon": eps},
                ))
                index += 1
    variants = [
        ("extend-rotation-2d-offcenter", 2, _rotation(2, 1.1, [1.5, -0.75]), [1.5, -0.75], 0.35),
        ("extend-twist-3d-offcenter", 3, _twist([0.5, 0.25, -0.5], -0.8, 0.3, 1.3),
         [0.5, 0.25, -0.5], 0.35),
        ("extend-shear-3d-rows", 3, _shear(3, 0.3, [-1.0, 0.0, 0.5], row=1, col=2),
         [-1.0, 0.0, 0.5], 0.2),
        ("extend-poly-2d-strong", 2, _poly([0.25, 0.4], 0.5), [0.25, 0.4], 0.5),
    ]
    for name, n, tree, center, eps in variants:
        cases.append(_scenario(
            name, "extend", n, 1000 + index,
            {"map": tree, "center": center, "radius": 1.0, "margin": 0.35, "epsilon": eps},
        ))
        index += 1
    return cases


def linearization_cases() -> list:
    """One linearization scenario per family and dimension, all fixing 0."""
    cases = []
    for i, n in enumerate((2, 3)):
        origin = [0.0] * n
        for j, family in enumerate(("rotation", "shear", "twist", "poly_perturb")):
            cases.append(_scenario(
                f"linearize-{family}-{n}d", "linearize", n, 2000 + 10 * i + j,
                {"map": _family_tree(family, n, origin), "rho": 1.0},
            ))
    return cases


def glue_cases() -> list:
    """The transport fixture (one ball carried across the domain) and the
    in-place rotor fixtures (two balls spun without moving), in 2-D and 3-D."""
    translate = _scenario(
        "glue-translate-2d", "glue", 2, 3000,
        {
            "sources": [{"map": _identity(2), "center": [-2.0, 0.0], "radius": 1.0, "margin": 0.4}],
            "targets": [{"map": _translation(2, [4.5, 0.5]), "center": [-2.0, 0.0],
                         "radius": 1.0, "margin": 0.4}],
            "maps": [_translation(2, [4.5, 0.5])],
            "epsilon": 0.5,
            "domain": {"kind": "ball", "center": [0.25, 0.25], "radius": 7.0},
        },
    )
    rotors2 = _scenario(
        "glue-rotors-2d", "glue", 2, 3001,
        {
            "sources": [
                {"map": _identity(2), "center": [-3.0, 0.0], "radius": 1.0, "margin": 0.4},
                {"map": _identity(2), "center": [3.0, 0.0], "radius": 1.0, "margin": 0.4},
            ],
            "targets": [
                {"map": _identity(2), "center": [-3.0, 0.0], "radius": 1.0, "margin": 0.4},
                {"map": _identity(2), "center": [3.0, 0.0], "radius": 1.0, "margin": 0.4},
            ],
            "maps": [_rotation(2, 0.6, [-3.0, 0.0]), _rotation(2, -0.8, [3.0, 0.0])],
            "epsilon": 0.5,
            "domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 6.0},
        },
    )
    rotors3 = _scenario(
        "glue-rotors-3d", "glue", 3, 3002,
        {
            "sources": [
                {"map": _identity(3), "center": [-3.0, 0.0, 0.0], "radius": 1.0, "margin": 0.4},
                {"map": _identity(3), "center": [3.0, 0.0, 0.0], "radius": 1.0, "margin": 0.4},
            ],
            "targets": [
                {"map": _identity(3), "center": [-3.0, 0.0, 0.0], "radius": 1.0, "margin": 0.4},
                {"map": _identity(3), "center": [3.0, 0.0, 0.0], "radius": 1.0, "margin": 0.4},
            ],
            "maps": [_rotation(3, 0.6, [-3.0, 0.0, 0.0]), _rotation(3, -0.8, [3.0, 0.0, 0.0])],
            "epsilon": 0.5,
            "domain": {"kind": "ball", "center": [0.0, 0.0, 0.0], "radius": 6.0},
        },
    )
    return [translate, rotors2, rotors3]


def insertion_case() -> dict:
    """A rotation spliced into the identity on the unit ball, identity kept
    outside a larger ball."""
    return _scenario(
        "insert-rotor-2d", "insert", 2, 3100,
        {
            "base": _identity(2),
            "region": {"map": _identity(2), "center": [0.0, 0.0], "radius": 1.0, "margin": 0.5},
            "inner": _rotation(2, math.pi / 6.0, [0.0, 0.0]),
            "epsilon": 0.4,
            "domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 2.5},
        },
    )


def demo_scenarios() -> dict:
    """Small-sample variants for the `demo` subcommand: fast, all-pass."""
    light_extend = {"agreement_core": 400, "identity_far": 400, "roundtrip": 1500,
                    "orientation": 1500, "seam_audit": 192}
    demos = {}

    rot = _scenario(
        "demo-extend-rotation-2d", "extend", 2, 4000,
        {"map": _rotation(2, 0.7, [0.0, 0.0]), "center": [0.0, 0.0],
         "radius": 1.0, "margin": 0.35, "epsilon": 0.5},
        samples=light_extend,
    )
    twist = _scenario(
        "demo-extend-twist-2d", "extend", 2, 4001,
        {"map": _twist([0.0, 0.0], 0.9, 0.35, 1.3), "center": [0.0, 0.0],
         "radius": 1.0, "margin": 0.35, "epsilon": 0.5},
        samples=light_extend,
    )
    lin = _scenario(
        "demo-linearize-shear-2d", "linearize", 2, 4002,
        {"map": _shear(2, 0.45, [0.0, 0.0]), "rho": 1.0},
        samples={"roundtrip": 500, "orientation": 900},
    )
    ins = insertion_case()
    ins = dict(ins, name="demo-insert-rotor-2d", seed=4003,
               samples={"inner_agreement": 400, "base_agreement": 200, "identity_far": 400,
                        "roundtrip": 800, "orientation": 900})
    for d in (rot, twist, lin, ins):
        demos[d["name"]] = d
    return demos


def all_fixtures() -> dict:
    """Every bundled scenario by name."""
    out = {}
    for case in extension_cases() + linearization_cases() + glue_cases() + [insertion_case()]:
        out[case["name"]] = case
    for name, case in demo_scenarios().items():
        out[name] = case
    return out


def write_fixture_files(directory) -> list:
    """Write every bundled scenario as a JSON file; returns the paths."""
    from .scenario import parse_scenario

    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, case in sorted(all_fixtures().items()):
        scenario = parse_scenario(case)  # validate + canonicalize before writing
        path = os.path.join(directory, f"{name}.json")
        with open(path, "w") as fh:
            fh.write(scenario.to_json())
        paths.append(path)
    return paths
