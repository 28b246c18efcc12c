"""Acceptance gate: one test per shipped claim, over the bundled fixtures.

Each criterion below is a single test so `pytest -v` reads as one pass/fail
line per claim.  The shipped fixture scenarios are run once (module-scoped)
and their reports shared across criteria; the determinism criterion reruns
every fixture and compares canonical report bodies byte for byte.

Tolerances and sample counts here are the published contract -- they are
asserted against the reports, not just assumed, so silent drift in the
standard suites fails the gate.
"""
import json
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from diffeoglue.flows import DampedTranslationMap
from diffeoglue.linalg import linear_factorize
from diffeoglue.profiles import invert_radial_profile, transition_profile
from diffeoglue.regions import Ball, Capsule, sample_region, stream
from diffeoglue.scenario import load_scenario, run_scenario

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def canonical_body(report) -> str:
    return json.dumps(report.to_dict(with_header=False), sort_keys=True)


def run_fixture(path):
    scenario = load_scenario(path)
    t0 = time.perf_counter()
    report, _bundle = run_scenario(scenario)
    seconds = time.perf_counter() - t0
    return SimpleNamespace(
        name=path.stem,
        report=report,
        body=canonical_body(report),
        seconds=seconds,
        checks={c.name: c for c in report.checks},
    )


@pytest.fixture(scope="module")
def first_run():
    """Every shipped fixture, run once with its frozen seed."""
    paths = sorted(FIXTURES.glob("*.json"))
    assert len(paths) == 36, "fixture corpus changed size"
    return {p.stem: run_fixture(p) for p in paths}


def named(first_run, prefix):
    return [r for name, r in sorted(first_run.items()) if name.startswith(prefix)]


def test_criterion_1_extension_contract(first_run):
    runs = named(first_run, "extend-")
    assert len(runs) == 20
    for r in runs:
        agree = r.checks["agreement_core"]
        assert agree.passed, f"{r.name}: ball agreement worst {agree.worst_value:.3e}"
        assert agree.tolerance == 1e-12 and agree.samples == 1000
        far = r.checks["identity_far"]
        assert far.passed, f"{r.name}: far identity worst {far.worst_value:.3e}"
        assert far.tolerance == 1e-13 and far.samples == 1000
        rt = r.checks["roundtrip"]
        assert rt.passed, f"{r.name}: roundtrip worst {rt.worst_value:.3e}"
        assert rt.tolerance == 1e-8 and rt.samples == 10000
        orient = r.checks["orientation"]
        assert orient.passed, f"{r.name}: min det {orient.worst_value:.3e}"
        assert orient.samples >= 10000
        assert r.report.passed, f"{r.name}: full standard suite"
    total = sum(r.seconds for r in runs)
    assert total < 60.0, f"extension fixtures took {total:.1f}s"
    print(f"CRITERION 1: PASS (20 extension fixtures, {total:.1f}s < 60s)")


def test_criterion_2_local_linearization(first_run):
    runs = named(first_run, "linearize-")
    assert len(runs) == 8
    for r in runs:
        core = r.checks["identity_core"]
        assert core.passed and core.tolerance == 1e-13, f"{r.name}: core identity"
        outer = r.checks["agreement_outer"]
        assert outer.passed and outer.tolerance == 1e-12, f"{r.name}: outer agreement"
        jac = r.checks["jacobian_fd"]
        assert jac.passed, f"{r.name}: Jacobian gap {jac.worst_value:.3e}"
        assert jac.tolerance == 1e-5 and jac.samples == 200
        assert r.report.passed, f"{r.name}: full standard suite"
    total = sum(r.seconds for r in runs)
    assert total < 30.0, f"linearization fixtures took {total:.1f}s"
    print(f"CRITERION 2: PASS (8 linearization fixtures, {total:.1f}s < 30s)")


def test_criterion_3_internal_identities(first_run):
    runs = named(first_run, "extend-")
    assert len(runs) == 20
    for r in runs:
        shell = r.checks["shell_identity"]
        assert shell.passed, f"{r.name}: shell identity worst {shell.worst_value:.3e}"
        assert shell.tolerance == 1e-10 and shell.samples == 100
        inner = r.checks["inner_consistency"]
        assert inner.passed, f"{r.name}: inner consistency worst {inner.worst_value:.3e}"
        assert inner.tolerance == 1e-10 and inner.samples == 100
    print("CRITERION 3: PASS (shell and collar identities on all 20 extension runs)")


def test_criterion_4_gluing(first_run):
    runs = {r.name: r for r in named(first_run, "glue-")}
    assert set(runs) == {"glue-translate-2d", "glue-rotors-2d", "glue-rotors-3d"}
    expected_balls = {"glue-translate-2d": 1, "glue-rotors-2d": 2, "glue-rotors-3d": 2}
    for name, r in sorted(runs.items()):
        pairs = [c for c in r.report.checks if c.name.startswith("pair_agreement_")]
        assert len(pairs) == expected_balls[name]
        for c in pairs:
            assert c.passed, f"{name}/{c.name}: worst {c.worst_value:.3e}"
            assert c.tolerance == 1e-9 and c.samples == 1000
        far = r.checks["identity_far"]
        assert far.passed and far.tolerance == 1e-13, f"{name}: far identity"
        rt = r.checks["roundtrip"]
        assert rt.passed and rt.tolerance == 1e-7, f"{name}: roundtrip"
        assert r.report.passed, f"{name}: full standard suite"
    total = sum(r.seconds for r in runs.values())
    assert total < 120.0, f"gluing fixtures took {total:.1f}s"
    print(f"CRITERION 4: PASS (1 translation + 2 rotor fixtures, {total:.1f}s < 120s)")


def test_criterion_5_insertion(first_run):
    r = first_run["insert-rotor-2d"]
    inner = r.checks["inner_agreement"]
    assert inner.passed and inner.tolerance == 1e-9 and inner.samples == 1000
    base = r.checks["base_agreement"]
    assert base.passed and base.tolerance == 1e-13
    far = r.checks["identity_far"]
    assert far.passed and far.tolerance == 1e-13
    rt = r.checks["roundtrip"]
    assert rt.passed and rt.tolerance == 1e-7
    assert r.report.passed
    print("CRITERION 5: PASS (rotation inserted into an identity annulus)")


def test_criterion_6_flow_exactness():
    cases = [
        (np.array([-2.0, 0.0]), np.array([1.5, 1.0]), 0.5, 1.2),
        (np.array([0.0, -1.0, 0.5]), np.array([2.0, 1.0, -0.5]), 0.4, 1.0),
    ]
    for q, p, payload, tube in cases:
        move = DampedTranslationMap(q, p, payload, tube)
        scale = max(1.0, float(np.linalg.norm(p - q)))
        pts = sample_region(Ball(q, payload), 500, stream(800, len(q)))
        gap = np.abs(move(pts) - (pts + (p - q))).max()
        assert gap <= 1e-13 * scale, f"payload moved inexactly: {gap:.3e}"

        window = Capsule(q, p, tube)
        probe = sample_region(window, 400, stream(801, len(q)))
        doubled = move.refined(2)
        step_gap = np.abs(move(probe) - doubled(probe)).max()
        assert step_gap <= 1e-9, f"step doubling moved outputs by {step_gap:.3e}"

        back = move.inverse()
        round_gap = np.abs(back(move(probe)) - probe).max()
        assert round_gap <= 1e-9, f"reverse-flow roundtrip {round_gap:.3e}"
    print("CRITERION 6: PASS (exact payload transport, stable steps, reversible flows)")


def test_criterion_7_kernel_oracles():
    rng = np.random.default_rng(20240520)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        A = rng.normal(size=(n, n))
        if np.linalg.det(A) < 0.0:
            A[:, 0] = -A[:, 0]
        factors = linear_factorize(A)
        worst = max(worst, np.abs(factors.reconstruct() - A).max())
    assert worst <= 1e-12, f"matrix factor reconstruction worst {worst:.3e}"

    profile = transition_profile(0.6, 1.4, 0.4, 1.0)
    y = np.linspace(0.0, 2.5, 1000)
    r = invert_radial_profile(profile, y)
    residual = np.abs(profile.radial_value(r) - y).max()
    assert residual <= 1e-12, f"radial inversion residual {residual:.3e}"
    print(f"CRITERION 7: PASS (factor worst {worst:.2e}, inversion worst {residual:.2e})")


def test_criterion_8_determinism(first_run):
    mismatched = []
    for name in sorted(first_run):
        again = run_fixture(FIXTURES / f"{name}.json")
        if again.body != first_run[name].body:
            mismatched.append(name)
    assert not mismatched, f"report bodies changed on rerun: {mismatched}"
    print("CRITERION 8: PASS (36 fixtures rerun byte-identical, headers aside)")
