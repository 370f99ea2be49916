"""Mean-field scaling experiments.

For a ladder of scaling parameters eps in (0, 1], the particle system is run
with the potential weakened to eps * phi and the initial Poisson density
boosted to rho0 / eps. Correlation estimates are renormalized (k1 by eps,
k2 by eps^2) and compared, bin-wise in sup norm, against the kinetic
reference density rho_t solved once on the same grid. As eps decreases the
discrepancies e1 (density level) and e2 (pair level) should shrink toward
the Monte Carlo noise floor; the sweep records both with standard errors and
a monotone-within-noise verdict, and the report fits a log-log slope of
e1 versus eps.

Trajectory counts default to n_traj(eps) ~ eps * n_traj_base, which keeps
the total number of particle updates (and hence the renormalized estimator
noise) roughly constant across the ladder.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, ConfigError
from .estimator import (CorrelationEstimate, estimate_correlations,
                        radial_product_profile)
from .fields import DensityField
from .kernels import KernelSpec, PotentialSpec, alpha as kernel_alpha
from .kinetic import solve_kinetic
from .simulator import SimulationParams, simulate_ensemble
from .torus import Torus


@dataclass(frozen=True, eq=False)
class SweepSpec:
    """Plan for one scaling ladder."""

    torus: Torus
    kernel: KernelSpec
    potential: PotentialSpec
    epsilons: tuple
    rho0: object  # limit density: constant or DensityField on the sweep grid
    times: tuple
    n_traj_base: int = 200
    n_traj: tuple = None  # explicit per-eps override
    n_cells: int = 64
    r_edges: tuple = None
    dt: float = None
    budget_max_particles: float = 1e4
    base_seed: int = 0
    n_jobs: int = 1

    def validate(self):
        eps = tuple(self.epsilons)
        if len(eps) < 1 or any(not (0 < e <= 1) for e in eps):
            raise ConfigError("epsilons must lie in (0, 1]")
        if len(set(eps)) != len(eps) or list(eps) != sorted(eps, reverse=True):
            raise ConfigError("epsilons must be strictly decreasing")
        if len(self.times) < 1 or any(t < 0 for t in self.times):
            raise ConfigError("comparison times must be >= 0")
        if self.n_traj is not None and len(self.n_traj) != len(eps):
            raise ConfigError("n_traj must match the epsilon ladder")

    def limit_field(self) -> DensityField:
        if isinstance(self.rho0, DensityField):
            if self.rho0.n_cells != self.n_cells:
                raise ConfigError("rho0 grid must match n_cells")
            return self.rho0
        return DensityField.constant(self.torus, self.n_cells, float(self.rho0))

    def trajectories_for(self, i: int) -> int:
        if self.n_traj is not None:
            return int(self.n_traj[i])
        return max(2, int(round(self.n_traj_base * self.epsilons[i])))

    def pair_edges(self) -> np.ndarray:
        if self.r_edges is not None:
            return np.asarray(self.r_edges, dtype=float)
        return np.linspace(0.0, self.torus.side / 4.0, 21)


@dataclass(eq=False)
class SweepResult:
    """Per-(eps, time) sup-bin discrepancies against the kinetic reference."""

    epsilons: tuple
    times: tuple
    n_traj: tuple
    e1: np.ndarray      # shape (n_eps, n_times)
    e1_se: np.ndarray
    e2: np.ndarray
    e2_se: np.ndarray
    monotone_within_noise: dict = field(default_factory=dict)
    estimates: list = None  # estimates[i][j]: renormalized estimate at (eps_i, t_j)
    reference: list = None  # kinetic DensityField per comparison time

    def to_json(self) -> dict:
        return {
            "epsilons": list(self.epsilons),
            "times": list(self.times),
            "n_traj": list(self.n_traj),
            "e1": self.e1.tolist(),
            "e1_se": self.e1_se.tolist(),
            "e2": self.e2.tolist(),
            "e2_se": self.e2_se.tolist(),
            "monotone_within_noise": {str(k): bool(v)
                                      for k, v in self.monotone_within_noise.items()},
        }


def renormalize(estimate: CorrelationEstimate, epsilon: float) -> CorrelationEstimate:
    """Scale k1 by eps and k2 by eps^2 (standard errors likewise)."""
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    out = CorrelationEstimate(
        torus=estimate.torus, time=estimate.time, n_traj=estimate.n_traj,
        mean_count=estimate.mean_count, n_cells=estimate.n_cells,
    )
    if estimate.k1 is not None:
        out.k1 = epsilon * estimate.k1
        out.k1_se = epsilon * estimate.k1_se
    if estimate.k2 is not None:
        out.r_edges = estimate.r_edges
        out.k2 = epsilon * epsilon * estimate.k2
        out.k2_se = epsilon * epsilon * estimate.k2_se
    return out


def plan_budget(spec: SweepSpec):
    """Expected particle count per eps; raises BudgetError before any run."""
    mass = spec.limit_field().mass
    expected = [mass / e for e in spec.epsilons]
    worst = max(expected)
    if worst > spec.budget_max_particles:
        raise BudgetError(
            f"expected particle count {worst:.0f} exceeds the budget "
            f"{spec.budget_max_particles:.0f} at eps={min(spec.epsilons):g}"
        )
    return expected


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Execute the ladder and compare against the kinetic reference."""
    spec.validate()
    plan_budget(spec)
    rho0 = spec.limit_field()
    a = kernel_alpha(spec.kernel)
    dt = spec.dt if spec.dt is not None else 0.05 / a
    t_end = max(spec.times)
    ref = solve_kinetic(rho0, spec.kernel, spec.potential, dt=dt, t_end=t_end,
                        snapshot_times=spec.times)
    ref_fields = [ref.snapshot_at(t) for t in spec.times]
    r_edges = spec.pair_edges()
    ref_prods = [radial_product_profile(f, r_edges)[0] for f in ref_fields]

    n_eps, n_t = len(spec.epsilons), len(spec.times)
    e1 = np.zeros((n_eps, n_t))
    e1_se = np.zeros_like(e1)
    e2 = np.zeros_like(e1)
    e2_se = np.zeros_like(e1)
    estimates = []
    n_traj_used = []

    for i, eps in enumerate(spec.epsilons):
        n_traj = spec.trajectories_for(i)
        n_traj_used.append(n_traj)
        params = SimulationParams(
            torus=spec.torus, kernel=spec.kernel, potential=spec.potential,
            epsilon=eps, rho0=rho0.with_values(rho0.values / eps),
            t_end=t_end, snapshot_times=tuple(spec.times), record_events=False,
        )
        ensemble = simulate_ensemble(params, n_traj, base_seed=(spec.base_seed, i),
                                     n_jobs=spec.n_jobs)
        row = []
        for j, t in enumerate(spec.times):
            est = renormalize(
                estimate_correlations(ensemble, t, spec.n_cells, r_edges,
                                      torus=spec.torus), eps)
            row.append(est)
            diff1 = np.abs(est.k1 - ref_fields[j].values)
            b1 = int(np.argmax(diff1))
            e1[i, j] = float(diff1.ravel()[b1])
            e1_se[i, j] = float(est.k1_se.ravel()[b1])
            diff2 = np.abs(est.k2 - ref_prods[j])
            b2 = int(np.argmax(diff2))
            e2[i, j] = float(diff2[b2])
            e2_se[i, j] = float(est.k2_se[b2])
        estimates.append(row)

    verdict = {}
    for j, t in enumerate(spec.times):
        ok = True
        for i in range(n_eps - 1):
            slack = 2.0 * math.hypot(e1_se[i, j], e1_se[i + 1, j])
            if e1[i + 1, j] > e1[i, j] + slack:
                ok = False
        verdict[t] = ok

    return SweepResult(epsilons=tuple(spec.epsilons), times=tuple(spec.times),
                       n_traj=tuple(n_traj_used), e1=e1, e1_se=e1_se,
                       e2=e2, e2_se=e2_se, monotone_within_noise=verdict,
                       estimates=estimates, reference=ref_fields)


@dataclass
class ConvergenceReport:
    """Log-log slope of e1 versus eps per comparison time."""

    times: tuple
    slopes: dict = field(default_factory=dict)  # time -> (slope, se) or None

    def to_json(self) -> dict:
        out = {"times": list(self.times), "slopes": {}}
        for t, v in self.slopes.items():
            out["slopes"][str(t)] = None if v is None else {
                "slope": v[0], "stderr": v[1],
                "ci95": [v[0] - 1.96 * v[1], v[0] + 1.96 * v[1]],
            }
        return out


def _loglog_slope(eps, e, se):
    eps = np.asarray(eps, dtype=float)
    e = np.asarray(e, dtype=float)
    se = np.asarray(se, dtype=float)
    if np.any(e <= 0):
        return None
    x = np.log(eps)
    y = np.log(e)
    if np.all(se > 0):
        w = (e / se) ** 2  # delta method: var(log e) = (se / e)^2
    else:
        w = np.ones_like(e)
    xbar = np.average(x, weights=w)
    ybar = np.average(y, weights=w)
    sxx = np.sum(w * (x - xbar) ** 2)
    if sxx == 0:
        return None
    slope = float(np.sum(w * (x - xbar) * (y - ybar)) / sxx)
    if np.all(se > 0):
        slope_se = float(1.0 / math.sqrt(sxx))
    else:
        resid = y - ybar - slope * (x - xbar)
        dof = max(len(x) - 2, 1)
        slope_se = float(math.sqrt(np.sum(resid**2) / dof / np.sum((x - xbar) ** 2)))
    return slope, slope_se


def convergence_report(result: SweepResult) -> ConvergenceReport:
    """Fit e1 ~ C eps^slope per time (weighted in log space)."""
    if len(result.epsilons) < 2:
        raise ConfigError("need at least two epsilon values for a slope")
    rep = ConvergenceReport(times=result.times)
    for j, t in enumerate(result.times):
        rep.slopes[t] = _loglog_slope(result.epsilons, result.e1[:, j],
                                      result.e1_se[:, j])
    return rep


def write_sweep_outputs(result: SweepResult, out_dir, report=None):
    """Write errors.csv, per-estimate CSVs, and report.json into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "errors.csv"), "w") as fh:
        fh.write("epsilon,time,e1,e1_stderr,e2,e2_stderr\n")
        for i, eps in enumerate(result.epsilons):
            for j, t in enumerate(result.times):
                fh.write(f"{float(eps)!r},{float(t)!r},"
                         f"{float(result.e1[i, j])!r},{float(result.e1_se[i, j])!r},"
                         f"{float(result.e2[i, j])!r},{float(result.e2_se[i, j])!r}\n")
    if result.estimates is not None:
        for i, eps in enumerate(result.epsilons):
            for j, t in enumerate(result.times):
                est = result.estimates[i][j]
                tag = f"eps{i}_t{j}"
                est.write_k1_csv(os.path.join(out_dir, f"{tag}_k1.csv"))
                est.write_k2_csv(os.path.join(out_dir, f"{tag}_k2.csv"))
                est.write_meta_json(os.path.join(out_dir, f"{tag}_meta.json"))
    payload = result.to_json()
    if report is not None:
        payload["convergence"] = report.to_json()
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
