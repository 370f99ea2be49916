"""Deterministic solvers for the mean-field kinetic equation.

The density of the hopping gas in the weak-interaction / high-density limit
solves the nonlocal equation

    d/dt rho = (a * rho) exp(-(phi * rho)) - rho * (a * exp(-(phi * rho))),

with * the spatial convolution; for the contact potential local(kappa) the
convolution phi * rho degenerates to kappa * rho pointwise. Two integrators
are provided on a shared uniform time grid:

* a classical explicit 4-stage Runge-Kutta march (the production path), and
* fixed-point iteration of the Duhamel integral form
      rho_t = rho_0 e^{-alpha t}
            + int_0^t e^{-alpha (t-s)} (a * rho_s) e^{-(phi * rho_s)} ds
            + int_0^t e^{-alpha (t-s)} rho_s [a * (1 - e^{-(phi * rho_s)})] ds,
  used as an independent verification path on short windows where the
  contraction factor q(T) from the `horizon` module is below one. The time
  integrals use the trapezoid rule; the decaying weight makes the quadrature
  a one-step recursion, so each sweep costs one pass over the grid.

Kernels are tabulated on the grid via minimal-image distances and rescaled
so the discrete sum times the cell volume equals the continuum integral
exactly; this makes constant densities exact stationary points and mass
conservation hold to round-off. Convolutions go through the FFT when the
grid size is a power of two and through explicit minimal-image summation
otherwise; `vlasov_first_order` always takes the summation route so the
product-state identity rhs == first-order hierarchy action is a genuine
cross-check of two code paths.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BoundViolation, ConfigError, GeometryError, HorizonError,
                     NumericError, StepSizeError)
from .fields import DensityField
from .horizon import contraction_factor
from .kernels import KernelSpec, PotentialSpec, alpha as kernel_alpha, mean_phi
from .torus import Torus


# -- kernel tabulation -------------------------------------------------------


class TabulatedKernel:
    """A radial spec sampled on the grid, renormalized to its exact integral."""

    def __init__(self, spec, torus: Torus, n_cells: int):
        self.spec = spec
        self.torus = torus
        self.n = int(n_cells)
        d = torus.dim
        h = torus.side / self.n
        self.cell_volume = h ** d
        if spec.family != "local" and spec.support_radius >= 0.5 * torus.side:
            raise GeometryError(
                f"kernel support radius {spec.support_radius:g} must be below "
                f"half the torus side {torus.side:g}"
            )
        offs = (np.arange(self.n) * h + 0.5 * torus.side) % torus.side - 0.5 * torus.side
        grids = np.meshgrid(*([offs] * d), indexing="ij")
        dist = np.sqrt(sum(g * g for g in grids))
        tab = np.asarray(spec.radial(dist), dtype=float)
        tab[dist > spec.support_radius] = 0.0
        target = spec.integral
        s = tab.sum() * self.cell_volume
        if s > 0.0:
            tab *= target / s
        elif target > 0.0:
            # support narrower than a cell (includes local(kappa)): lump the
            # whole mass at zero offset, i.e. convolution becomes target * rho
            tab[(0,) * d] = target / self.cell_volume
        self.values = tab
        self.is_pow2 = self.n & (self.n - 1) == 0
        self._fft = None
        nz = np.nonzero(tab)
        self._nz_shifts = np.column_stack(nz)
        self._nz_values = tab[nz]

    @property
    def fft(self):
        if self._fft is None:
            self._fft = np.fft.rfftn(self.values)
        return self._fft

    def convolve(self, values, method="auto"):
        """Circular convolution (kernel * values) * cell_volume.

        `values` may carry extra leading axes (e.g. a time stack); the
        convolution acts on the trailing spatial axes.
        """
        d = self.torus.dim
        axes = tuple(range(values.ndim - d, values.ndim))
        if method == "auto":
            method = "fft" if self.is_pow2 else "direct"
        if method == "fft":
            if not self.is_pow2:
                raise ConfigError("spectral convolution needs a power-of-two grid")
            out = np.fft.irfftn(
                np.fft.rfftn(values, axes=axes) * self.fft, axes=axes,
                s=(self.n,) * d,
            )
            return out * self.cell_volume
        if method != "direct":
            raise ConfigError(f"unknown convolution method {method!r}")
        out = np.zeros_like(values, dtype=float)
        for shift, val in zip(self._nz_shifts, self._nz_values):
            out += val * np.roll(values, shift=tuple(shift), axis=axes)
        return out * self.cell_volume


_TAB_CACHE: dict = {}


def tabulate(spec, torus: Torus, n_cells: int) -> TabulatedKernel:
    key = (spec, torus, int(n_cells))
    tab = _TAB_CACHE.get(key)
    if tab is None:
        tab = _TAB_CACHE[key] = TabulatedKernel(spec, torus, n_cells)
    return tab


def convolve(rho: DensityField, spec, method="auto") -> np.ndarray:
    """Periodic convolution of a density field with a kernel/potential spec."""
    tab = tabulate(spec, rho.torus, rho.n_cells)
    return tab.convolve(rho.values, method=method)


# -- right-hand side ---------------------------------------------------------


def _rhs_values(values, tab_a, tab_phi, local_kappa, method="auto"):
    if local_kappa is not None:
        w = local_kappa * values
    else:
        w = tab_phi.convolve(values, method=method)
    g = np.exp(-w)
    return tab_a.convolve(values, method=method) * g - values * tab_a.convolve(g, method=method)


def _tabs_for(rho, kernel, potential):
    tab_a = tabulate(kernel, rho.torus, rho.n_cells)
    if potential.family == "local":
        return tab_a, None, potential.kappa
    return tab_a, tabulate(potential, rho.torus, rho.n_cells), None


def kinetic_rhs(rho: DensityField, kernel: KernelSpec, potential: PotentialSpec) -> np.ndarray:
    """(a * rho) e^{-(phi * rho)} - rho (a * e^{-(phi * rho)}) on the grid."""
    tab_a, tab_phi, kappa = _tabs_for(rho, kernel, potential)
    return _rhs_values(rho.values, tab_a, tab_phi, kappa)


def vlasov_first_order(rho: DensityField, kernel: KernelSpec,
                       potential: PotentialSpec) -> np.ndarray:
    """First-order action of the limiting hierarchy on the product state.

    For a product (Poissonian) ansatz the configuration-space integrals of
    the hierarchy generator collapse to exp(-(phi * rho)), leaving a gain
    term (a * rho)(y) e^{-(phi*rho)(y)} and a loss term
    rho(x) (a * e^{-(phi*rho)})(x). Chaos propagation says this equals
    kinetic_rhs identically; this implementation goes through direct
    minimal-image summation so the identity compares two numerical routes.
    """
    tab_a, tab_phi, kappa = _tabs_for(rho, kernel, potential)
    vals = rho.values
    if kappa is not None:
        w = kappa * vals
    else:
        w = tab_phi.convolve(vals, method="direct")
    escape = np.exp(-w)
    gain = tab_a.convolve(vals, method="direct") * escape
    loss = vals * tab_a.convolve(escape, method="direct")
    return gain - loss


# -- RK4 marching ------------------------------------------------------------

_CLAMP_FLOOR = -1e-13


@dataclass(frozen=True)
class SolverConfig:
    """Time-grid and method selection for the kinetic solvers."""

    dt: float
    t_end: float
    method: str = "rk4"
    picard_tolerance: float = 1e-10
    picard_max_iter: int = 200

    def validate(self, alpha: float):
        if self.method not in ("rk4", "picard"):
            raise ConfigError(f"method must be rk4 or picard, got {self.method!r}")
        if not 0 < self.dt:
            raise ConfigError("dt must be positive")
        if self.dt > 0.1 / alpha * (1. + 1e-12):
            raise ConfigError(
                f"dt={self.dt:g} violates the stability guard dt <= 0.1/alpha = {0.1 / alpha:g}"
            )
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")


def _rk4_once(values, dt, tab_a, tab_phi, kappa):
    k1 = _rhs_values(values, tab_a, tab_phi, kappa)
    k2 = _rhs_values(values + 0.5 * dt * k1, tab_a, tab_phi, kappa)
    k3 = _rhs_values(values + 0.5 * dt * k2, tab_a, tab_phi, kappa)
    k4 = _rhs_values(values + dt * k3, tab_a, tab_phi, kappa)
    return values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(rho: DensityField, dt: float, kernel: KernelSpec,
             potential: PotentialSpec) -> DensityField:
    """One classical RK4 step; round-off negativity (>= -1e-13) is clamped."""
    tab_a, tab_phi, kappa = _tabs_for(rho, kernel, potential)
    new = _rk4_once(rho.values, dt, tab_a, tab_phi, kappa)
    low = float(new.min())
    if low < _CLAMP_FLOOR:
        raise StepSizeError(
            f"negativity {low:.3e} beyond round-off; reduce dt below {dt:g}"
        )
    return rho.with_values(np.maximum(new, 0.0))


@dataclass(eq=False)
class KineticTrajectory:
    """Stored solver history: per-step scalar monitors plus snapshot fields."""

    torus: Torus
    kernel: KernelSpec
    potential: PotentialSpec
    dt: float
    alpha: float
    times: np.ndarray
    sup_norms: np.ndarray
    min_pre_clamp: np.ndarray
    masses: np.ndarray
    snapshot_times: tuple
    snapshot_fields: list
    final: DensityField

    @property
    def local_mode(self) -> bool:
        return self.potential.family == "local"

    def snapshot_at(self, time: float) -> DensityField:
        for s, f in zip(self.snapshot_times, self.snapshot_fields):
            if abs(s - time) <= 1e-9:
                return f
        raise KeyError(f"no snapshot stored at t={time}")


def solve_kinetic(rho0: DensityField, kernel: KernelSpec, potential: PotentialSpec,
                  dt: float, t_end: float, snapshot_times=()) -> KineticTrajectory:
    """March the kinetic equation with RK4 on a uniform grid.

    dt is adjusted to the nearest value dividing t_end exactly; snapshot
    times must lie on the resulting grid (to 1e-9).
    """
    a = kernel_alpha(kernel)
    SolverConfig(dt=dt, t_end=t_end).validate(a)
    n_steps = max(1, int(round(t_end / dt))) if t_end > 0 else 0
    dt_eff = t_end / n_steps if n_steps else dt
    tab_a, tab_phi, kappa = _tabs_for(rho0, kernel, potential)

    sts = tuple(sorted(snapshot_times))
    snap_idx = {}
    for s in sts:
        k = int(round(s / dt_eff)) if dt_eff else 0
        if abs(k * dt_eff - s) > 1e-9 or k > n_steps:
            raise ConfigError(f"snapshot time {s} is not on the dt grid")
        snap_idx.setdefault(k, []).append(s)

    vals = rho0.values.copy()
    times = np.empty(n_steps + 1)
    sups = np.empty(n_steps + 1)
    lows = np.empty(n_steps + 1)
    masses = np.empty(n_steps + 1)
    cellvol = rho0.cell_volume
    snaps = {}

    def record(k):
        times[k] = k * dt_eff
        sups[k] = vals.max()
        masses[k] = vals.sum() * cellvol
        for s in snap_idx.get(k, ()):
            snaps[s] = DensityField(rho0.torus, vals.copy())

    lows[0] = float(rho0.values.min())
    record(0)
    for k in range(1, n_steps + 1):
        vals = _rk4_once(vals, dt_eff, tab_a, tab_phi, kappa)
        low = float(vals.min())
        if low < _CLAMP_FLOOR:
            raise StepSizeError(
                f"negativity {low:.3e} at t={k * dt_eff:g}; reduce dt below {dt_eff:g}"
            )
        if low < 0.0:
            vals = np.maximum(vals, 0.0)
        lows[k] = low
        record(k)

    return KineticTrajectory(
        torus=rho0.torus, kernel=kernel, potential=potential, dt=dt_eff,
        alpha=a, times=times, sup_norms=sups, min_pre_clamp=lows, masses=masses,
        snapshot_times=sts, snapshot_fields=[snaps[s] for s in sts],
        final=DensityField(rho0.torus, vals),
    )


# -- bound monitors ----------------------------------------------------------


@dataclass
class BoundReport:
    """Outcome of the a-priori bound checks along a solver trajectory."""

    ok: bool
    u0: float
    alpha: float
    local_mode: bool
    violations: list = field(default_factory=list)

    def raise_if_failed(self):
        if not self.ok:
            v = self.violations[0]
            raise BoundViolation(
                f"{v['kind']} bound violated at t={v['time']:g} "
                f"(margin {v['margin']:.3e})",
                time=v["time"], margin=v["margin"],
            )

    def to_json(self) -> dict:
        return {"ok": self.ok, "u0": self.u0, "alpha": self.alpha,
                "local_mode": self.local_mode, "violations": self.violations}


def monitor_bounds(traj: KineticTrajectory, rtol: float = 1e-9) -> BoundReport:
    """Check the growth, invariant-region, positivity, and (in local mode)
    maximum-principle bounds at every stored step."""
    if len(traj.times) == 0:
        raise ConfigError("empty trajectory")
    u0 = float(traj.sup_norms[0])
    a = traj.alpha
    report = BoundReport(ok=True, u0=u0, alpha=a, local_mode=traj.local_mode)

    def violate(kind, time, margin):
        report.ok = False
        report.violations.append({"kind": kind, "time": float(time),
                                  "margin": float(margin)})

    for t, u, low in zip(traj.times, traj.sup_norms, traj.min_pre_clamp):
        grow = u0 * math.exp(a * t) * (1.0 + rtol)
        if u > grow:
            violate("growth", t, u - grow)
        eat = math.exp(a * t)
        if eat < 2.0:
            inv = u0 / (2.0 - eat) * (1.0 + rtol)
            if u > inv:
                violate("invariant-region", t, u - inv)
        if traj.local_mode and u > u0 + 1e-6:
            violate("maximum-principle", t, u - (u0 + 1e-6))
        if low < _CLAMP_FLOOR:
            violate("positivity", t, _CLAMP_FLOOR - low)
    return report


# -- Picard iteration of the integral form ------------------------------------


@dataclass(eq=False)
class PicardResult:
    """Fixed-point iteration history and the converged time slab."""

    torus: Torus
    dt: float
    times: np.ndarray
    fields: np.ndarray  # shape (n_steps + 1, *grid)
    deltas: list
    ratios: list
    q_bound: float
    iterations: int
    converged: bool

    @property
    def final(self) -> DensityField:
        return DensityField(self.torus, self.fields[-1])

    def field_at(self, k: int) -> DensityField:
        return DensityField(self.torus, self.fields[k])


def picard_solve(rho0: DensityField, T: float, kernel: KernelSpec,
                 potential: PotentialSpec, tolerance: float = 1e-10,
                 dt: float = None, max_iter: int = 200) -> PicardResult:
    """Iterate the integral form on [0, T]; requires a certified window.

    The contraction factor q(T) for sup-norm-u0 data must be below one
    (checked via the analytic certificate; raises HorizonError otherwise).
    Iteration stops once the sup-over-time sup-norm update is below
    `tolerance`; the update sizes and their successive ratios are reported.
    """
    a = kernel_alpha(kernel)
    u0 = rho0.sup
    mphi = mean_phi(potential)
    q = contraction_factor(u0, a, mphi, T)  # raises for exp(alpha T) >= 2
    if q >= 1.0:
        raise HorizonError(
            f"Picard window not certified: q(T) = {q:.4f} >= 1 for T = {T:g}"
        )
    if dt is None:
        dt = min(0.1 / a, T / 16.0)
    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps
    tab_a, tab_phi, kappa = _tabs_for(rho0, kernel, potential)

    times = np.arange(n_steps + 1) * dt
    shape = rho0.values.shape
    cur = np.broadcast_to(rho0.values, (n_steps + 1,) + shape).copy()
    decay = np.exp(-a * times).reshape((-1,) + (1,) * len(shape))
    base = rho0.values[None] * decay

    deltas, ratios = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if kappa is not None:
            w = kappa * cur
        else:
            w = tab_phi.convolve(cur)
        g = np.exp(-w)
        integrand = tab_a.convolve(cur) * g + cur * tab_a.convolve(1.0 - g)
        # exact-decay trapezoid recursion for int_0^t e^{-alpha (t-s)} G_s ds
        nxt = np.empty_like(cur)
        nxt[0] = rho0.values
        acc = np.zeros(shape)
        decay_dt = math.exp(-a * dt)
        for k in range(1, n_steps + 1):
            acc = decay_dt * (acc + 0.5 * dt * integrand[k - 1]) + 0.5 * dt * integrand[k]
            nxt[k] = base[k] + acc
        delta = float(np.max(np.abs(nxt - cur)))
        deltas.append(delta)
        if len(deltas) > 1 and deltas[-2] > 0:
            ratios.append(deltas[-1] / deltas[-2])
        cur = nxt
        if delta < tolerance:
            converged = True
            break
    if not converged:
        err = NumericError(
            f"Picard iteration did not reach {tolerance:g} in {max_iter} sweeps"
        )
        err.deltas = deltas
        raise err
    return PicardResult(torus=rho0.torus, dt=dt, times=times, fields=cur,
                        deltas=deltas, ratios=ratios, q_bound=q,
                        iterations=it, converged=converged)
