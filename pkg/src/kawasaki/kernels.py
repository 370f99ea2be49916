"""Jump kernels and repulsion potentials.

Both ingredients of the hop rate are radial functions on R^d drawn from a
small set of closed-form families:

    top_hat(radius, height)      height * 1{|x| <= radius}
    gaussian(sigma, height)      height * exp(-|x|^2 / (2 sigma^2))
    exponential(rate, height)    height * exp(-rate * |x|)

Potentials additionally admit ``local(kappa)``, the contact (zero-range)
idealization whose only meaningful datum is its integral kappa; it is
accepted by the gridded kinetic solver and rejected by the particle
simulator.

Radial symmetry makes a(x) = a(-x) and phi(x) = phi(-x) structural, and the
closed-form integrals give the total hop rate per particle

    alpha = integral of a,

the potential mass <phi> = integral of phi, and the relative-entropy-style
constant

    c_phi(eps) = (1/eps) * integral of (1 - exp(-eps * phi)),

which is computed by adaptive radial quadrature and obeys
0 <= c_phi(eps) <= <phi> with c_phi non-increasing in eps.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidSpecError, NumericError

FAMILIES = ("top_hat", "gaussian", "exponential")
POTENTIAL_FAMILIES = FAMILIES + ("local",)

# Radial value below height * SUPPORT_CUTOFF is treated as zero; this bounds
# the cell-list interaction radius for the unbounded-support families.
SUPPORT_CUTOFF = 1e-12


def ball_volume(dim: int, radius: float) -> float:
    """Volume of the d-ball (closed forms for d <= 3)."""
    if dim == 1:
        return 2.0 * radius
    if dim == 2:
        return math.pi * radius * radius
    if dim == 3:
        return 4.0 * math.pi * radius**3 / 3.0
    return math.pi ** (dim / 2.0) * radius ** dim / math.gamma(dim / 2.0 + 1.0)


def sphere_area(dim: int) -> float:
    """Surface area of the unit (d-1)-sphere (closed forms for d <= 3)."""
    if dim == 1:
        return 2.0
    if dim == 2:
        return 2.0 * math.pi
    if dim == 3:
        return 4.0 * math.pi
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def _check_positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise InvalidSpecError(f"{name} must be strictly positive, got {value!r}")


@dataclass(frozen=True)
class RadialSpec:
    """Shared machinery of kernel and potential specifications."""

    family: str
    dim: int
    radius: float | None = None
    sigma: float | None = None
    rate: float | None = None
    height: float = 1.0
    kappa: float | None = None

    def _validate(self, allow_local, allow_zero_height):
        if self.dim not in (1, 2, 3):
            raise InvalidSpecError(f"dimension must be 1, 2 or 3, got {self.dim}")
        fam = self.family
        if fam == "top_hat":
            _check_positive("radius", self.radius)
        elif fam == "gaussian":
            _check_positive("sigma", self.sigma)
        elif fam == "exponential":
            _check_positive("rate", self.rate)
        elif fam == "local":
            if not allow_local:
                raise InvalidSpecError("local(kappa) is only valid as a potential")
            if self.kappa is None or self.kappa < 0:
                raise InvalidSpecError(f"kappa must be >= 0, got {self.kappa!r}")
            return
        else:
            raise InvalidSpecError(f"unknown family {fam!r}")
        if allow_zero_height:
            if self.height < 0:
                raise InvalidSpecError(f"height must be >= 0, got {self.height!r}")
        else:
            _check_positive("height", self.height)

    # -- radial profile ----------------------------------------------------

    def radial(self, r):
        """Profile value at radial distance r (vectorized)."""
        r = np.asarray(r, dtype=float)
        fam = self.family
        if fam == "top_hat":
            return self.height * (r <= self.radius).astype(float)
        if fam == "gaussian":
            return self.height * np.exp(-0.5 * (r / self.sigma) ** 2)
        if fam == "exponential":
            return self.height * np.exp(-self.rate * r)
        # local: zero almost everywhere
        return np.zeros_like(r)

    def value(self, x):
        """Value at displacement(s) x; last axis is the coordinate axis for d > 1."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return self.radial(np.abs(x))
        return self.radial(np.sqrt(np.sum(x * x, axis=-1)))

    @property
    def support_radius(self) -> float:
        """Radius beyond which the profile is below SUPPORT_CUTOFF * height."""
        fam = self.family
        if fam == "local" or self.height == 0.0:
            return 0.0
        if fam == "top_hat":
            return self.radius
        cut = -math.log(SUPPORT_CUTOFF)
        if fam == "gaussian":
            return self.sigma * math.sqrt(2.0 * cut)
        return cut / self.rate

    @property
    def integral(self) -> float:
        """Closed-form integral over R^d."""
        fam = self.family
        if fam == "local":
            return self.kappa
        if self.height == 0.0:
            return 0.0
        if fam == "top_hat":
            return self.height * ball_volume(self.dim, self.radius)
        if fam == "gaussian":
            return self.height * (2.0 * math.pi) ** (self.dim / 2.0) * self.sigma ** self.dim
        # exponential: S_{d-1} * Gamma(d) / rate^d
        return self.height * sphere_area(self.dim) * math.gamma(self.dim) / self.rate ** self.dim

    @property
    def is_zero(self) -> bool:
        if self.family == "local":
            return self.kappa == 0.0
        return self.height == 0.0

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        obj = {"family": self.family, "dim": self.dim}
        if self.family == "top_hat":
            obj.update(radius=self.radius, height=self.height)
        elif self.family == "gaussian":
            obj.update(sigma=self.sigma, height=self.height)
        elif self.family == "exponential":
            obj.update(rate=self.rate, height=self.height)
        else:
            obj.update(kappa=self.kappa)
        return obj

    @classmethod
    def _from_json(cls, obj: dict):
        obj = dict(obj)
        try:
            family = obj.pop("family")
            dim = int(obj.pop("dim"))
        except KeyError as exc:
            raise InvalidSpecError(f"spec missing field {exc}") from None
        fields = {}
        for key in ("radius", "sigma", "rate", "height", "kappa"):
            if key in obj:
                fields[key] = float(obj.pop(key))
        if obj:
            raise InvalidSpecError(f"unknown spec fields {sorted(obj)}")
        return cls(family=family, dim=dim, **fields)


@dataclass(frozen=True)
class KernelSpec(RadialSpec):
    """Jump kernel a: symmetric, non-negative, integrable with alpha > 0."""

    def __post_init__(self):
        self._validate(allow_local=False, allow_zero_height=False)

    @classmethod
    def top_hat(cls, radius, height=1.0, dim=1):
        return cls(family="top_hat", dim=dim, radius=radius, height=height)

    @classmethod
    def gaussian(cls, sigma, height=1.0, dim=1):
        return cls(family="gaussian", dim=dim, sigma=sigma, height=height)

    @classmethod
    def exponential(cls, rate, height=1.0, dim=1):
        return cls(family="exponential", dim=dim, rate=rate, height=height)

    @classmethod
    def from_json(cls, obj: dict) -> "KernelSpec":
        return cls._from_json(obj)


@dataclass(frozen=True)
class PotentialSpec(RadialSpec):
    """Repulsion potential phi >= 0; height 0 gives the free (non-interacting) case."""

    def __post_init__(self):
        self._validate(allow_local=True, allow_zero_height=True)

    @classmethod
    def top_hat(cls, radius, height=1.0, dim=1):
        return cls(family="top_hat", dim=dim, radius=radius, height=height)

    @classmethod
    def gaussian(cls, sigma, height=1.0, dim=1):
        return cls(family="gaussian", dim=dim, sigma=sigma, height=height)

    @classmethod
    def exponential(cls, rate, height=1.0, dim=1):
        return cls(family="exponential", dim=dim, rate=rate, height=height)

    @classmethod
    def local(cls, kappa, dim=1):
        return cls(family="local", dim=dim, kappa=kappa)

    @classmethod
    def zero(cls, dim=1):
        return cls(family="top_hat", dim=dim, radius=1.0, height=0.0)

    @classmethod
    def from_json(cls, obj: dict) -> "PotentialSpec":
        return cls._from_json(obj)


# -- derived scalars -------------------------------------------------------


def alpha(kernel: KernelSpec) -> float:
    """Total hop rate per particle: the closed-form integral of the kernel."""
    if not isinstance(kernel, RadialSpec):
        raise InvalidSpecError(f"expected a kernel spec, got {type(kernel)!r}")
    a = kernel.integral
    if not a > 0:
        raise InvalidSpecError("kernel must have strictly positive integral")
    return a


def mean_phi(potential: PotentialSpec) -> float:
    """<phi>: the integral of the potential (kappa for the local family)."""
    return potential.integral


def c_phi(potential: PotentialSpec, epsilon: float = 1.0) -> float:
    """(1/eps) * integral of (1 - exp(-eps * phi)) by adaptive radial quadrature.

    Non-increasing in eps, bounded by <phi>, and -> <phi> as eps -> 0. For the
    local family the defining limit is 0 for every eps.
    """
    if not epsilon > 0:
        raise InvalidSpecError(f"epsilon must be positive, got {epsilon}")
    if potential.family == "local" or potential.is_zero:
        return 0.0
    dim = potential.dim
    r_max = potential.support_radius
    surf = sphere_area(dim)

    def integrand(r):
        return r ** (dim - 1) * (-np.expm1(-epsilon * potential.radial(r)))

    points = [potential.radius] if potential.family == "top_hat" else None
    val, abserr = quad(integrand, 0.0, max(r_max, 1e-300), points=points,
                       epsabs=0.0, epsrel=1e-10, limit=200)
    if val != 0.0 and abserr > 1e-8 * abs(val):
        raise NumericError(
            f"c_phi quadrature did not converge: value {val:g}, residual {abserr:g}"
        )
    return surf * val / epsilon


@dataclass(frozen=True)
class ScaledFactors:
    """Mayer-type factors of the weakened potential eps * phi.

    t(x) = exp(-eps * phi(x)) - 1 lies in [-1, 0] and tau = t + 1 in [0, 1];
    these ranges are what make the thinning envelope of the simulator exact.
    """

    epsilon: float
    potential: PotentialSpec

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidSpecError(f"epsilon must be positive, got {self.epsilon}")

    def t(self, x):
        return np.expm1(-self.epsilon * self.potential.value(x))

    def tau(self, x):
        return np.expm1(-self.epsilon * self.potential.value(x)) + 1.0


# -- displacement sampling --------------------------------------------------


def sample_displacement(kernel: KernelSpec, rng: np.random.Generator, size=None):
    """Draw displacement(s) with probability density a(.) / alpha.

    Returns shape (dim,) for size=None, else (size, dim). Every family is
    sampled exactly (no rejection): top-hat by a uniform ball draw, gaussian
    by scaled normals, exponential by a Gamma(d) radius and a uniform
    direction.
    """
    n = 1 if size is None else int(size)
    d = kernel.dim
    fam = kernel.family
    if fam == "gaussian":
        out = kernel.sigma * rng.standard_normal((n, d))
    elif fam == "top_hat":
        if d == 1:
            out = kernel.radius * (2.0 * rng.random((n, 1)) - 1.0)
        else:
            dirs = _uniform_directions(rng, n, d)
            radii = kernel.radius * rng.random(n) ** (1.0 / d)
            out = dirs * radii[:, None]
    else:  # exponential
        radii = rng.gamma(shape=d, scale=1.0 / kernel.rate, size=n)
        dirs = _uniform_directions(rng, n, d)
        out = dirs * radii[:, None]
    return out[0] if size is None else out


def _uniform_directions(rng, n, d):
    if d == 1:
        return np.where(rng.random((n, 1)) < 0.5, -1.0, 1.0)
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v
