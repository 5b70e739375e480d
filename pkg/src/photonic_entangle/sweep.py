"""Velocity grids and searches for Bell- and W-type operating points."""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from scipy.optimize import minimize

from .analysis import FinalStateReport
from .config import RunConfig, build_problem
from .dynamics import IntegrationError, final_state, integrate

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2

BELL_PHOTON_MAX = 0.01
BELL_POP_TOL = 0.02
W_PHOTON_MAX = 0.03
W_POP_TOL = 0.03
COLLISION_SPEED_GAP = 1.0
COLLISION_OFFSET_M = 0.3e-3


class SweepPointError(IntegrationError):
    def __init__(self, velocities, cause: Exception):
        super().__init__(f"integration failed at velocities {velocities}: {cause}", getattr(cause, "t", None))
        self.velocities = velocities


@dataclass(frozen=True)
class SweepSpec:
    """Grid over the speed of atoms[1] (and atoms[2]); ranges are (lo, hi, n)."""

    base_config: RunConfig
    vb_range: tuple[float, float, int]
    vc_range: tuple[float, float, int] | None = None

    def __post_init__(self):
        for rng in filter(None, (self.vb_range, self.vc_range)):
            lo, hi, n = rng
            if int(n) < 1 or (n == 1 and lo != hi) or (n > 1 and not hi > lo):
                raise ValueError(f"bad velocity range {rng}")
        needed = 3 if self.vc_range is not None else 2
        if self.base_config.n_atoms != needed:
            raise ValueError(f"sweep over {needed - 1} velocities needs a {needed}-atom config")

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        ranges = [self.vb_range] + ([self.vc_range] if self.vc_range is not None else [])
        return tuple(np.linspace(lo, hi, int(n)) for lo, hi, n in ranges)

    def digest(self) -> str:
        payload = json.dumps(
            {"config": self.base_config.data, "vb": list(self.vb_range), "vc": self.vc_range and list(self.vc_range)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class SweepResult:
    axes: tuple[np.ndarray, ...]
    reports: np.ndarray  # object array of FinalStateReport, shape = axis lengths
    provenance: dict = field(default_factory=dict)

    def population_grid(self, atom: int) -> np.ndarray:
        return np.vectorize(lambda r: r.populations[atom], otypes=[float])(self.reports)

    def photon_grid(self) -> np.ndarray:
        return np.vectorize(lambda r: r.photon_prob, otypes=[float])(self.reports)

    def amplitude_grid(self) -> np.ndarray:
        return np.array([r.state.as_array() for r in self.reports.ravel()]).reshape(
            *self.reports.shape, -1
        )

    def to_dict(self) -> dict:
        return {
            "axes_mps": [ax.tolist() for ax in self.axes],
            "shape": list(self.reports.shape),
            "reports": [r.to_dict() for r in self.reports.ravel()],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepResult":
        reports = np.empty(len(data["reports"]), dtype=object)
        for i, r in enumerate(data["reports"]):
            reports[i] = FinalStateReport.from_dict(r)
        return cls(
            tuple(np.asarray(ax) for ax in data["axes_mps"]),
            reports.reshape(data["shape"]),
            data.get("provenance", {}),
        )


def apply_collision_guard(config: RunConfig) -> RunConfig:
    """Displace atom A by 0.3 mm when two atoms fly at nearly equal speeds."""
    atoms = config.data["atoms"]
    if len(atoms) != 2:
        return config
    first, second = atoms
    if first["x_offset_m"] is not None or abs(first["speed_mps"] - second["speed_mps"]) >= COLLISION_SPEED_GAP:
        return config
    return config.with_x_offset(0, COLLISION_OFFSET_M)


def evaluate_point(config: RunConfig, velocities: tuple[float, ...]) -> FinalStateReport:
    """Final-state report with atoms[1], atoms[2], ... set to ``velocities``."""
    cfg = apply_collision_guard(config.with_speeds({i + 1: v for i, v in enumerate(velocities)}))
    try:
        series = integrate(build_problem(cfg, grid_points=1))
        state = final_state(series)
    except IntegrationError as exc:
        raise SweepPointError(tuple(velocities), exc) from exc
    return FinalStateReport(state, series.labels)


def _evaluate_task(args):
    config, velocities = args
    return evaluate_point(config, velocities)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """One integration per grid point; results are stored by grid index."""
    axes = spec.axes
    points = list(itertools.product(*[ax.tolist() for ax in axes]))
    tasks = [(spec.base_config, p) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_evaluate_task(t) for t in tasks]
    reports = np.empty(len(results), dtype=object)
    for i, r in enumerate(results):
        reports[i] = r
    provenance = {
        "config_sha256": spec.digest(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "grid_points": len(points),
    }
    return SweepResult(axes, reports.reshape([len(ax) for ax in axes]), provenance)


def bell_objective(report: FinalStateReport) -> float:
    pa, pb = report.populations
    return report.photon_prob + (pa - 0.5) ** 2 + (pb - 0.5) ** 2


def w_objective(report: FinalStateReport) -> float:
    return report.photon_prob + sum((p - 1 / 3) ** 2 for p in report.populations)


def bell_target_met(report: FinalStateReport) -> bool:
    return report.photon_prob <= BELL_PHOTON_MAX and all(
        abs(p - 0.5) <= BELL_POP_TOL for p in report.populations
    )


def w_target_met(report: FinalStateReport) -> bool:
    return report.photon_prob <= W_PHOTON_MAX and all(abs(p - 1 / 3) <= W_POP_TOL for p in report.populations)


@dataclass(frozen=True)
class SearchResult:
    velocities: tuple[float, ...]
    report: FinalStateReport
    objective: float
    target_met: bool
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "velocities_mps": list(self.velocities),
            "objective": self.objective,
            "target_met": self.target_met,
            "evaluations": self.evaluations,
            "report": self.report.to_dict(),
        }


class _Memo:
    """Caches objective evaluations and remembers the best point seen."""

    def __init__(self, config: RunConfig, objective):
        self.config = config
        self.objective = objective
        self.cache: dict[tuple[float, ...], tuple[float, FinalStateReport]] = {}

    def store(self, velocities, report: FinalStateReport) -> float:
        key = tuple(float(v) for v in velocities)
        value = self.objective(report)
        self.cache[key] = (value, report)
        return value

    def __call__(self, velocities) -> float:
        key = tuple(float(v) for v in velocities)
        if key not in self.cache:
            self.store(key, evaluate_point(self.config, key))
        return self.cache[key][0]

    def best(self):
        key = min(self.cache, key=lambda k: (self.cache[k][0], k))
        return key, *self.cache[key]


def golden_section(f, lo: float, hi: float, tol: float) -> float:
    """Minimise a unimodal ``f`` on [lo, hi] to interval width ``tol``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _check_bracket(bracket) -> tuple[float, float]:
    lo, hi = map(float, bracket)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo or lo <= 0:
        raise ValueError(f"invalid velocity bracket {bracket}")
    return lo, hi


def search_bell_velocity(
    base_config: RunConfig,
    bracket: tuple[float, float],
    grid_points: int = 61,
    resolution: float = 0.01,
    workers: int = 1,
) -> SearchResult:
    """Speed of atoms[1] giving the most Bell-like final state.

    Coarse scan over the bracket, then golden-section refinement between the
    neighbours of the best coarse point. The best evaluated point is
    returned, flagged by whether it meets the target thresholds.
    """
    if base_config.n_atoms != 2:
        raise ValueError("Bell search needs a two-atom config")
    lo, hi = _check_bracket(bracket)
    memo = _Memo(base_config, bell_objective)

    if lo == hi:
        memo((lo,))
    else:
        spec = SweepSpec(base_config, (lo, hi, grid_points))
        coarse = run_sweep(spec, workers)
        grid = spec.axes[0]
        for v, report in zip(grid, coarse.reports):
            memo.store((v,), report)
        i = int(np.argmin([memo.cache[(float(v),)][0] for v in grid]))
        left, right = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        v_ref = golden_section(lambda v: memo((v,)), float(left), float(right), resolution)
        memo((v_ref,))

    (v_best,), value, report = memo.best()
    if not math.isfinite(value):
        raise ValueError("no minimum found in bracket")
    met = bell_target_met(report)
    log.info("Bell search: v = %.3f m/s, objective %.3e, target %s", v_best, value, "met" if met else "not met")
    return SearchResult((v_best,), report, value, met, len(memo.cache))


def search_w_velocities(
    base_config: RunConfig,
    vb_bracket: tuple[float, float],
    vc_bracket: tuple[float, float],
    grid_points: int = 61,
    resolution: float = 0.01,
    workers: int = 1,
    coarse: SweepResult | None = None,
) -> SearchResult:
    """Speeds of atoms[1], atoms[2] giving the most W-like final state.

    A precomputed ``coarse`` sweep over the same brackets may be supplied
    to skip the scan.
    """
    if base_config.n_atoms != 3:
        raise ValueError("W search needs a three-atom config")
    vb_lo, vb_hi = _check_bracket(vb_bracket)
    vc_lo, vc_hi = _check_bracket(vc_bracket)
    memo = _Memo(base_config, w_objective)

    nb = 1 if vb_lo == vb_hi else grid_points
    nc = 1 if vc_lo == vc_hi else grid_points
    if coarse is None:
        coarse = run_sweep(SweepSpec(base_config, (vb_lo, vb_hi, nb), (vc_lo, vc_hi, nc)), workers)
    vb_axis, vc_axis = coarse.axes
    for (i, vb), (j, vc) in itertools.product(enumerate(vb_axis), enumerate(vc_axis)):
        memo.store((vb, vc), coarse.reports[i, j])

    if nb > 1 or nc > 1:
        (vb0, vc0), _, _ = memo.best()
        step_b = (vb_hi - vb_lo) / max(nb - 1, 1)
        step_c = (vc_hi - vc_lo) / max(nc - 1, 1)
        bounds = [
            (max(vb_lo, vb0 - step_b), min(vb_hi, vb0 + step_b)),
            (max(vc_lo, vc0 - step_c), min(vc_hi, vc0 + step_c)),
        ]
        simplex = [
            (vb0, vc0),
            (vb0 + (0.5 * step_b if vb0 + 0.5 * step_b <= bounds[0][1] else -0.5 * step_b), vc0),
            (vb0, vc0 + (0.5 * step_c if vc0 + 0.5 * step_c <= bounds[1][1] else -0.5 * step_c)),
        ]
        minimize(
            memo,
            x0=(vb0, vc0),
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": resolution, "fatol": 1e-9, "initial_simplex": simplex, "maxfev": 400},
        )

    (vb_best, vc_best), value, report = memo.best()
    met = w_target_met(report)
    log.info(
        "W search: v_B = %.3f, v_C = %.3f m/s, objective %.3e, target %s",
        vb_best, vc_best, value, "met" if met else "not met",
    )
    return SearchResult((vb_best, vc_best), report, value, met, len(memo.cache))


def population_spread(base_config: RunConfig, velocities: tuple[float, ...], delta: float = 0.4) -> float:
    """Largest population change over all +-delta perturbations of the given speeds."""
    ref = evaluate_point(base_config, velocities).populations
    worst = 0.0
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=len(velocities)):
        if not any(signs):
            continue
        moved = tuple(v + s * delta for v, s in zip(velocities, signs))
        pops = evaluate_point(base_config, moved).populations
        worst = max(worst, max(abs(p - q) for p, q in zip(pops, ref)))
    return worst
