"""Deterministic numerical verification of claimed map properties.

Each check draws its own counter-based sample stream keyed by (seed, check
index), so a suite's verdicts are a pure function of (subject, specs, seed):
re-running reproduces every sampled point and every reported number
byte-for-byte.  Wall-clock data lives in the report header, never in the
check bodies.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .maps import SmoothMap
from .regions import Region, grid_in_region, sample_region, stream

CHECK_KINDS = (
    "agreement",
    "identity_outside",
    "roundtrip",
    "jacobian_fd",
    "orientation",
    "seam",
    "support_exact",
    "refinement",
)


@dataclass(frozen=True)
class CheckSpec:
    """One verifiable claim about a map.

    kind:
      agreement        max |subject - other| <= tolerance on the region
      identity_outside max |subject(x) - x| <= tolerance on the region
      roundtrip        max |subject^-1(subject(x)) - x| <= tolerance
      jacobian_fd      max entry gap between analytic and central-difference
                       Jacobians <= tolerance
      orientation      det of the Jacobian stays positive (worst = min det)
      seam             sampled piece disagreement of a glued map <= tolerance
      support_exact    subject(x) == x bitwise on the region (worst must be 0)
      refinement       max |subject - subject.refined(factor)| <= tolerance

    `region` is where points are drawn (with `window` required when it is
    unbounded); `subject`/`other` override the suite subject per check.
    """

    name: str
    kind: str
    tolerance: float
    samples: int = 256
    region: Region | None = None
    window: Region | None = None
    subject: SmoothMap | None = None
    other: SmoothMap | None = None
    use_grid: bool = False
    fd_step: float = 1e-6
    factor: int = 2

    def __post_init__(self):
        if self.kind not in CHECK_KINDS:
            raise ParameterError(f"unknown check kind '{self.kind}'; choose from {CHECK_KINDS}")


@dataclass
class CheckResult:
    name: str
    kind: str
    tolerance: float
    samples: int
    passed: bool
    worst_value: float
    worst_point: list | None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "passed": bool(self.passed),
            "worst_value": self.worst_value,
            "worst_point": self.worst_point,
            "note": self.note,
        }


@dataclass
class VerificationReport:
    subject: str
    seed: int
    checks: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    total_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, *, with_header: bool = True) -> dict:
        body = {
            "subject": self.subject,
            "seed": self.seed,
            "passed": bool(self.passed),
            "checks": [c.to_dict() for c in self.checks],
        }
        if with_header:
            body = {
                "header": {
                    "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                    "check_seconds": [round(s, 6) for s in self.elapsed],
                    "total_seconds": round(self.total_seconds, 6),
                },
                **body,
            }
        return body

    def summary_lines(self) -> list:
        lines = []
        for c in self.checks:
            verdict = "pass" if c.passed else "FAIL"
            lines.append(
                f"[{verdict}] {c.name} ({c.kind}): worst {c.worst_value:.3e}"
                f" vs tolerance {c.tolerance:.1e} on {c.samples} samples"
            )
        return lines


def _draw_points(spec: CheckSpec, seed: int, index: int) -> np.ndarray:
    if spec.region is None:
        raise ParameterError(f"check '{spec.name}' needs a sampling region")
    if spec.use_grid:
        return grid_in_region(spec.region, spec.samples, spec.window)
    rng = stream(seed, 0xCE, index)
    return sample_region(spec.region, spec.samples, rng, window=spec.window)


def _fd_jacobian(mapping: SmoothMap, pts: np.ndarray, step: float) -> np.ndarray:
    m, n = pts.shape
    h = step * np.maximum(1.0, np.linalg.norm(pts, axis=1))
    J = np.empty((m, n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        plus = mapping(pts + h[:, None] * e)
        minus = mapping(pts - h[:, None] * e)
        J[:, :, j] = (plus - minus) / (2.0 * h[:, None])
    return J


def run_check(subject: SmoothMap, spec: CheckSpec, *, seed: int = 0, index: int = 0) -> CheckResult:
    """Evaluate one check; never raises on a mere failure, only on misuse."""
    target = spec.subject if spec.subject is not None else subject
    note = ""

    if spec.kind == "seam":
        audit = getattr(target, "audit_seams", None)
        if audit is None:
            raise ParameterError(f"check '{spec.name}': subject has no seams to audit")
        worst, worst_point, evidence = audit(samples=spec.samples, seed=seed + index)
        passed = worst <= spec.tolerance
        note = f"{len(evidence)} overlap zone(s)"
        return CheckResult(
            spec.name, spec.kind, spec.tolerance, spec.samples, passed, float(worst),
            None if worst_point is None else np.round(worst_point, 12).tolist(), note,
        )

    if spec.kind == "refinement":
        twin = target.refined(spec.factor)
        if twin is None:
            return CheckResult(
                spec.name, spec.kind, spec.tolerance, 0, True, 0.0, None,
                "nothing to refine (no integrator inside)",
            )
        pts = _draw_points(spec, seed, index)
        gap = np.linalg.norm(target(pts) - twin(pts), axis=1)
        k = int(np.argmax(gap))
        return CheckResult(
            spec.name, spec.kind, spec.tolerance, pts.shape[0],
            bool(gap[k] <= spec.tolerance), float(gap[k]), np.round(pts[k], 12).tolist(),
        )

    pts = _draw_points(spec, seed, index)

    if spec.kind == "agreement":
        if spec.other is None:
            raise ParameterError(f"check '{spec.name}': agreement needs an `other` map")
        gap = np.linalg.norm(target(pts) - spec.other(pts), axis=1)
        worst = gap
    elif spec.kind == "identity_outside":
        worst = np.linalg.norm(target(pts) - pts, axis=1)
    elif spec.kind == "support_exact":
        diff = target(pts) - pts
        worst = np.abs(diff).max(axis=1)
    elif spec.kind == "roundtrip":
        inv = target.inverse()
        worst = np.linalg.norm(inv(target(pts)) - pts, axis=1)
    elif spec.kind == "jacobian_fd":
        J = target.jacobian(pts)
        gap = np.abs(J - _fd_jacobian(target, pts, spec.fd_step))
        scale = np.maximum(1.0, np.abs(J).reshape(pts.shape[0], -1).max(axis=1))
        worst = gap.reshape(pts.shape[0], -1).max(axis=1) / scale
    elif spec.kind == "orientation":
        dets = np.linalg.det(target.jacobian(pts))
        k = int(np.argmin(dets))
        return CheckResult(
            spec.name, spec.kind, spec.tolerance, pts.shape[0],
            bool(dets[k] > 0.0), float(dets[k]), np.round(pts[k], 12).tolist(),
            "worst value is the minimum Jacobian determinant",
        )
    else:  # pragma: no cover -- guarded by CheckSpec validation
        raise ParameterError(f"unhandled check kind {spec.kind}")

    k = int(np.argmax(worst))
    if spec.kind == "support_exact":
        passed = worst[k] == 0.0
        note = "bitwise identity required"
    else:
        passed = worst[k] <= spec.tolerance
    return CheckResult(
        spec.name, spec.kind, spec.tolerance, pts.shape[0],
        bool(passed), float(worst[k]), np.round(pts[k], 12).tolist(), note,
    )


def run_suite(subject: SmoothMap, specs, *, seed: int = 0, subject_name: str = "map") -> VerificationReport:
    """Run a list of checks against one subject; deterministic for a seed."""
    report = VerificationReport(subject=subject_name, seed=int(seed))
    t_all = time.perf_counter()
    for index, spec in enumerate(specs):
        t0 = time.perf_counter()
        report.checks.append(run_check(subject, spec, seed=seed, index=index))
        report.elapsed.append(time.perf_counter() - t0)
    report.total_seconds = time.perf_counter() - t_all
    return report
