"""Analytic well-posedness certificates.

Closed-form estimates for the correlation-function evolution in the scale of
weighted sup-norm spaces indexed by theta:

* ``existence_horizon``: the guaranteed lifetime
  T(theta) = (theta0 - theta) / (2 alpha) * exp(-c_phi * e^{-theta})
  of the evolution started in the theta0-space and observed in the
  theta-space (theta <= theta0).
* ``theta_of_t``: the generalized inverse sup{theta <= theta0 : t < T(theta)},
  computed on the branch adjacent to theta0 (the sup picks the larger of the
  two preimages when T is past its maximum T_*).
* ``op_norm_bound``: the two-space operator norm bound
  2 alpha / (e (theta'' - theta')) * exp(c * e^{-theta''}), with c = c_phi
  for the bare generator and c = <phi> for the scaling-uniform and limiting
  variants.
* ``contraction_factor``: the Picard factor
  q(T) = 2 (1 - e^{-alpha T}) (1 + <phi> u0 exp(alpha T + 2 <phi> u0 e^{alpha T})),
  valid on windows with e^{alpha T} < 2; q(T) < 1 certifies geometric
  convergence of the integral-equation iteration with sup-norm-u0 data.

All root finding is plain bisection on monotone branches; the maximum T_* is
located by golden-section search. Tolerances are fixed at 1e-12.
"""

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError, HorizonError, NumericError

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_TOL = 1e-12


def existence_horizon(theta0: float, theta: float, alpha: float, c_phi: float) -> float:
    """Guaranteed lifetime T(theta) of the evolution entering the theta-space."""
    if theta > theta0:
        raise ConfigError(f"theta ({theta}) must be <= theta0 ({theta0})")
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if c_phi < 0:
        raise ConfigError(f"c_phi must be >= 0, got {c_phi}")
    return (theta0 - theta) / (2.0 * alpha) * math.exp(-c_phi * math.exp(-theta))


def t_star(theta0: float, alpha: float, c_phi: float):
    """Maximum of T(.) over (-inf, theta0]: returns (T_*, argmax theta_*).

    For c_phi = 0 the horizon grows without bound as theta decreases, so
    T_* = inf with no finite maximizer.
    """
    if c_phi == 0.0:
        return math.inf, -math.inf

    def T(th):
        return existence_horizon(theta0, th, alpha, c_phi)

    # the derivative sign is that of (theta0 - theta) c e^{-theta} - 1, which
    # is decreasing in theta; expand left until the bracket contains the root
    width = 1.0
    while (theta0 - (theta0 - width)) * c_phi * math.exp(-(theta0 - width)) <= 1.0:
        width *= 2.0
        if width > 1e8:
            raise NumericError("failed to bracket the horizon maximum")
    lo, hi = theta0 - width, theta0
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = T(x1), T(x2)
    while hi - lo > _TOL:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = T(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = T(x1)
    th = 0.5 * (lo + hi)
    return T(th), th


def theta_of_t(theta0: float, alpha: float, c_phi: float, t: float):
    """sup{theta <= theta0 : t < T(theta)}, or None when t >= T_*."""
    if t < 0:
        raise ConfigError(f"t must be >= 0, got {t}")
    if t == 0.0:
        return theta0
    if c_phi == 0.0:
        # T(theta) = (theta0 - theta) / (2 alpha) is strictly decreasing
        return theta0 - 2.0 * alpha * t
    T_max, th_max = t_star(theta0, alpha, c_phi)
    if t >= T_max:
        return None
    lo, hi = th_max, theta0  # T decreases from T_* to 0 on this branch
    while hi - lo > _TOL:
        mid = 0.5 * (lo + hi)
        if existence_horizon(theta0, mid, alpha, c_phi) > t:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_VARIANTS = ("delta", "renormalized", "vlasov")


def op_norm_bound(theta_pp: float, theta_p: float, alpha: float, c: float,
                  variant: str = "delta") -> float:
    """Two-space norm bound 2 alpha / (e (theta'' - theta')) * exp(c e^{-theta''}).

    `c` is c_phi for the bare-generator ("delta") variant and <phi> for the
    scaling-uniform ("renormalized") and limiting ("vlasov") variants, which
    share the same closed form.
    """
    if variant not in _VARIANTS:
        raise ConfigError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    if not theta_pp > theta_p:
        raise ConfigError(f"need theta'' > theta', got {theta_pp} <= {theta_p}")
    if alpha <= 0 or c < 0:
        raise ConfigError("need alpha > 0 and c >= 0")
    return 2.0 * alpha / (math.e * (theta_pp - theta_p)) * math.exp(c * math.exp(-theta_pp))


def contraction_factor(u0: float, alpha: float, mean_phi: float, T: float) -> float:
    """Picard contraction factor q(T) on [0, T]; requires e^{alpha T} < 2."""
    if T < 0:
        raise ConfigError(f"T must be >= 0, got {T}")
    if u0 < 0 or mean_phi < 0 or alpha <= 0:
        raise ConfigError("need u0 >= 0, <phi> >= 0, alpha > 0")
    if alpha * T >= math.log(2.0):
        raise HorizonError(
            f"window too long: exp(alpha T) = {math.exp(alpha * T):g} >= 2, "
            "the invariant-region constant u0 / (2 - e^{alpha T}) degenerates"
        )
    eat = math.exp(alpha * T)
    return 2.0 * (1.0 - math.exp(-alpha * T)) * (
        1.0 + mean_phi * u0 * math.exp(alpha * T + 2.0 * mean_phi * u0 * eat)
    )


def find_T_for_q(q_target: float, u0: float, alpha: float, mean_phi: float,
                 tol: float = 1e-10) -> float:
    """Window length T with q(T) = q_target, by bisection; q_target in (0, 1)."""
    if not 0.0 < q_target < 1.0:
        raise ConfigError(f"q_target must be in (0, 1), got {q_target}")
    lo = 0.0
    hi = math.log(2.0) / alpha * (1.0 - 1e-12)
    if contraction_factor(u0, alpha, mean_phi, hi) < q_target:
        raise NumericError("q stays below the target on the admissible window")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if contraction_factor(u0, alpha, mean_phi, mid) < q_target:
            lo = mid
        else:
            hi = mid
    T = 0.5 * (lo + hi)
    if abs(contraction_factor(u0, alpha, mean_phi, T) - q_target) > tol:
        raise NumericError("bisection for q(T) did not reach tolerance")
    return T


@dataclass
class HorizonReport:
    """Bundle of analytic certificates for one model parameterization."""

    theta0: float
    alpha: float
    c_phi: float
    mean_phi: float = None
    theta: float = None
    T_of_theta: float = None
    T_star: float = None
    theta_star: float = None
    theta_of_t: dict = field(default_factory=dict)
    norm_bound: float = None
    u0: float = None
    q_of_T: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, dict):
                out[k] = {str(kk): vv for kk, vv in v.items()}
            elif v is None or isinstance(v, (int, float)):
                out[k] = v
        return out

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def horizon_report(theta0, alpha, c_phi, mean_phi=None, theta=None, times=(),
                   u0=1.0, windows=()) -> HorizonReport:
    """Evaluate the full certificate set for one model.

    `times` requests theta(t) entries; `windows` requests q(T) entries (these
    need mean_phi). The norm bound is reported for the gap (theta0 - 1, theta0)
    in the bare variant.
    """
    rep = HorizonReport(theta0=theta0, alpha=alpha, c_phi=c_phi, mean_phi=mean_phi,
                        theta=theta, u0=u0)
    T_max, th_max = t_star(theta0, alpha, c_phi)
    rep.T_star, rep.theta_star = T_max, th_max
    if theta is not None:
        rep.T_of_theta = existence_horizon(theta0, theta, alpha, c_phi)
    for t in times:
        rep.theta_of_t[t] = theta_of_t(theta0, alpha, c_phi, t)
    rep.norm_bound = op_norm_bound(theta0, theta0 - 1.0, alpha, c_phi, "delta")
    if mean_phi is not None:
        for T in windows:
            rep.q_of_T[T] = contraction_factor(u0, alpha, mean_phi, T)
    return rep
