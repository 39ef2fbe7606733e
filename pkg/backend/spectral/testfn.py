"""
Test functions with exact Fourier transforms.

The transform convention is psi_hat(u) = integral of exp(-iux) psi(x) dx, so
Parseval reads ||psi_hat||^2 = 2 pi ||psi||^2 and translation by t multiplies
the transform by exp(-iut).
"""
import abc
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate as quadpack

from .exceptions import UnreachableTolerance, Unsupported
from .expressions import Expression, parse_expression

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2 * math.pi)
# exp(-800) underflows every product formed with these functions
BAND_SIGMAS = 40.0
SERIES_CUTOFF = 1e-4


def increment_kernel(t, u):
    """xi_t(u) = (exp(itu) - 1) / u, with xi_t(0) = it and xi_0 = 0."""
    u = np.asarray(u, dtype=float)
    if t == 0:
        return np.zeros(u.shape, dtype=complex)
    z = t * u
    small = np.abs(z) < SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.expm1(1j * z) / np.where(small, 1.0, u)
    # it (1 + iz/2 - z^2/6 - iz^3/24)
    series = 1j * t * (1 + 1j * z / 2 - z * z / 6 - 1j * z ** 3 / 24)
    return np.where(small, series, direct)


def hermite_functions(order, x):
    """Orthonormal Hermite functions h_0..h_order at x, by the stable three-term recurrence."""
    x = np.asarray(x, dtype=float)
    values = np.empty((order + 1,) + x.shape)
    values[0] = math.pi ** -0.25 * np.exp(-x * x / 2)
    if order >= 1:
        values[1] = math.sqrt(2) * x * values[0]
    for m in range(1, order):
        values[m + 1] = math.sqrt(2 / (m + 1)) * x * values[m] - math.sqrt(m / (m + 1)) * values[m - 1]
    return values


def _hermite_envelope(order, x):
    """Upper bounds of |h_0..h_order| at x built from the recurrence with absolute values."""
    y = np.abs(np.asarray(x, dtype=float))
    values = np.empty((order + 1,) + y.shape)
    values[0] = math.pi ** -0.25 * np.exp(-y * y / 2)
    if order >= 1:
        values[1] = math.sqrt(2) * y * values[0]
    for m in range(1, order):
        values[m + 1] = math.sqrt(2 / (m + 1)) * y * values[m] + math.sqrt(m / (m + 1)) * values[m - 1]
    return values


class TestFunction(abc.ABC):
    """A test function known through its closed-form Fourier transform."""

    real_valued = False

    @abc.abstractmethod
    def fourier_transform(self, u):
        """psi_hat evaluated at frequencies u."""

    @abc.abstractmethod
    def __call__(self, x):
        """psi evaluated at times x."""

    @abc.abstractmethod
    def translate(self, t):
        """U_t psi = psi(. - t)."""

    @abc.abstractmethod
    def scale(self, factor):
        """factor * psi."""

    @abc.abstractmethod
    def to_config(self):
        """JSON-compatible description."""

    @property
    def bandwidth(self):
        """Frequency interval outside of which psi_hat is below double precision, or None."""
        return None

    @property
    def time_radius(self):
        """Rough distance from the origin at which psi is concentrated; used for panelling only."""
        return 0.0

    @property
    def has_decay(self):
        return False

    def envelope(self, x):
        raise UnreachableTolerance(f"{type(self).__name__} carries no decay certificate")

    @property
    def decay_region(self):
        """(center, radius) such that the envelope decreases away from center beyond radius."""
        raise UnreachableTolerance(f"{type(self).__name__} carries no decay certificate")

    def time_support(self):
        center, radius = self.decay_region
        return (center - radius - BAND_SIGMAS, center + radius + BAND_SIGMAS)

    def is_zero(self):
        return False

    def __add__(self, other):
        return Combination(((1.0, self), (1.0, other))).simplified()

    def __sub__(self, other):
        return Combination(((1.0, self), (-1.0, other))).simplified()

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, factor):
        return self.scale(factor)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=True)
class GaussianPacket(TestFunction):
    """A exp(-(x-c)^2 / (2 w^2)) exp(i omega x)."""

    center: float = 0.0
    width: float = 1.0
    frequency: float = 0.0
    amplitude: complex = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"Gaussian packet width must be positive, got {self.width}")

    @property
    def real_valued(self):
        return self.frequency == 0 and complex(self.amplitude).imag == 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-((x - self.center) ** 2) / (2 * self.width ** 2)) * np.exp(1j * self.frequency * x)

    def fourier_transform(self, u):
        u = np.asarray(u, dtype=float)
        offset = u - self.frequency
        return (self.amplitude * self.width * SQRT_2PI * np.exp(-(self.width * offset) ** 2 / 2)
                * np.exp(-1j * offset * self.center))

    def translate(self, t):
        return replace(self, center=self.center + t, amplitude=self.amplitude * np.exp(-1j * self.frequency * t))

    def scale(self, factor):
        return replace(self, amplitude=self.amplitude * factor)

    @property
    def bandwidth(self):
        reach = BAND_SIGMAS / self.width
        return (self.frequency - reach, self.frequency + reach)

    @property
    def time_radius(self):
        return abs(self.center)

    @property
    def has_decay(self):
        return True

    def envelope(self, x):
        x = np.asarray(x, dtype=float)
        return abs(self.amplitude) * np.exp(-((x - self.center) ** 2) / (2 * self.width ** 2))

    @property
    def decay_region(self):
        return (self.center, 0.0)

    def time_support(self):
        reach = BAND_SIGMAS * self.width
        return (self.center - reach, self.center + reach)

    def is_zero(self):
        return self.amplitude == 0

    def to_config(self):
        amplitude = complex(self.amplitude)
        config = {"form": "gaussian_packet", "center": self.center, "width": self.width, "frequency": self.frequency}
        if amplitude != 1:
            config["amplitude"] = amplitude.real if amplitude.imag == 0 else [amplitude.real, amplitude.imag]
        return config


@dataclass(frozen=True)
class HermiteExpansion(TestFunction):
    """Sum of c_m h_m(x - shift) over the normalized Hermite functions."""

    coefficients: tuple = (1.0,)
    shift: float = 0.0

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("Hermite expansion needs at least one coefficient")
        object.__setattr__(self, "coefficients", tuple(complex(c) if complex(c).imag else float(np.real(c))
                                                        for c in self.coefficients))

    @property
    def order(self):
        return len(self.coefficients) - 1

    @property
    def real_valued(self):
        return all(complex(c).imag == 0 for c in self.coefficients)

    def __call__(self, x):
        values = hermite_functions(self.order, np.asarray(x, dtype=float) - self.shift)
        return np.tensordot(np.asarray(self.coefficients), values, axes=1)

    def fourier_transform(self, u):
        u = np.asarray(u, dtype=float)
        phases = np.asarray([(-1j) ** m for m in range(self.order + 1)])
        values = hermite_functions(self.order, u)
        return SQRT_2PI * np.exp(-1j * u * self.shift) * np.tensordot(np.asarray(self.coefficients) * phases,
                                                                         values, axes=1)

    def translate(self, t):
        return replace(self, shift=self.shift + t)

    def scale(self, factor):
        return replace(self, coefficients=tuple(factor * c for c in self.coefficients))

    @property
    def bandwidth(self):
        reach = math.sqrt(2 * self.order + 1) + BAND_SIGMAS
        return (-reach, reach)

    @property
    def time_radius(self):
        return abs(self.shift) + math.sqrt(2 * self.order + 1)

    @property
    def has_decay(self):
        return True

    def envelope(self, x):
        bounds = _hermite_envelope(self.order, np.asarray(x, dtype=float) - self.shift)
        return np.tensordot(np.abs(np.asarray(self.coefficients)), bounds, axes=1)

    @property
    def decay_region(self):
        return (self.shift, math.sqrt(2 * self.order + 1) + 1.0)

    def is_zero(self):
        return not any(self.coefficients)

    def to_config(self):
        coefficients = [c if isinstance(c, float) else [c.real, c.imag] for c in self.coefficients]
        return {"form": "hermite", "coefficients": coefficients, "shift": self.shift}


@dataclass(frozen=True)
class FourierSide(TestFunction):
    """A test function given only by psi_hat(u) = exp(-iu shift) * factor * F(u)."""

    spectrum: object = field(default_factory=lambda: Expression("exp(-u^2/2)"))
    shift: float = 0.0
    factor: complex = 1.0
    real_valued: bool = False
    band: tuple | None = None

    def fourier_transform(self, u):
        u = np.asarray(u, dtype=float)
        return self.factor * np.exp(-1j * u * self.shift) * np.asarray(self.spectrum(u))

    def __call__(self, x):
        raise Unsupported("time-domain values of a Fourier-side test function are not available")

    def translate(self, t):
        return replace(self, shift=self.shift + t)

    def scale(self, factor):
        real = self.real_valued and complex(factor).imag == 0
        return replace(self, factor=self.factor * factor, real_valued=real)

    @property
    def bandwidth(self):
        return self.band

    @property
    def time_radius(self):
        return abs(self.shift)

    def is_zero(self):
        return self.factor == 0

    def to_config(self):
        config = {"form": "fourier_side", "spectrum": self.spectrum.to_config() if hasattr(self.spectrum, "to_config")
                  else repr(self.spectrum), "shift": self.shift, "real_valued": self.real_valued}
        if self.band is not None:
            config["bandwidth"] = list(self.band)
        if self.factor != 1:
            factor = complex(self.factor)
            config["factor"] = factor.real if factor.imag == 0 else [factor.real, factor.imag]
        return config


@dataclass(frozen=True)
class Combination(TestFunction):
    """Finite linear combination of test functions."""

    terms: tuple = ()

    @property
    def real_valued(self):
        return all(complex(c).imag == 0 and f.real_valued for c, f in self.terms)

    def simplified(self):
        flat = []
        for coefficient, function in self.terms:
            if isinstance(function, Combination):
                flat.extend((coefficient * c, f) for c, f in function.terms)
            else:
                flat.append((coefficient, function))
        return Combination(tuple((c, f) for c, f in flat if c != 0 and not f.is_zero()))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape, dtype=complex)
        for coefficient, function in self.terms:
            total = total + coefficient * function(x)
        return total

    def fourier_transform(self, u):
        u = np.asarray(u, dtype=float)
        total = np.zeros(u.shape, dtype=complex)
        for coefficient, function in self.terms:
            total = total + coefficient * function.fourier_transform(u)
        return total

    def translate(self, t):
        return Combination(tuple((c, f.translate(t)) for c, f in self.terms))

    def scale(self, factor):
        return Combination(tuple((factor * c, f) for c, f in self.terms))

    @property
    def bandwidth(self):
        if not self.terms:
            return (0.0, 0.0)
        bands = [f.bandwidth for _, f in self.terms]
        if any(b is None for b in bands):
            return None
        return (min(b[0] for b in bands), max(b[1] for b in bands))

    @property
    def time_radius(self):
        return max((f.time_radius for _, f in self.terms), default=0.0)

    @property
    def has_decay(self):
        return all(f.has_decay for _, f in self.terms)

    def envelope(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape)
        for coefficient, function in self.terms:
            total = total + abs(coefficient) * function.envelope(x)
        return total

    @property
    def decay_region(self):
        if not self.terms:
            return (0.0, 0.0)
        regions = [f.decay_region for _, f in self.terms]
        lo = min(c - r for c, r in regions)
        hi = max(c + r for c, r in regions)
        return ((lo + hi) / 2, (hi - lo) / 2)

    def time_support(self):
        if not self.terms:
            return (0.0, 0.0)
        supports = [f.time_support() for _, f in self.terms]
        return (min(s[0] for s in supports), max(s[1] for s in supports))

    def is_zero(self):
        return all(c == 0 or f.is_zero() for c, f in self.terms)

    def to_config(self):
        terms = []
        for coefficient, function in self.terms:
            c = complex(coefficient)
            terms.append({"coefficient": c.real if c.imag == 0 else [c.real, c.imag], "function": function.to_config()})
        return {"form": "combination", "terms": terms}


ZERO_FUNCTION = Combination(())


@dataclass(frozen=True)
class IncrementKernel:
    """The frequency-side kernel xi_t of the pointwise process value X(t)."""

    t: float

    def fourier_transform(self, u):
        return increment_kernel(self.t, u)

    @property
    def bandwidth(self):
        return None

    @property
    def time_radius(self):
        return abs(self.t)

    def is_zero(self):
        return self.t == 0


def fourier_transform(psi):
    """psi_hat as a vectorised callable."""
    return psi.fourier_transform


def translate(psi, t):
    if t == 0:
        return psi
    return psi.translate(t)


def parse_spectrum(source):
    return parse_expression(source, variable="u")


# -- periodization ---------------------------------------------------------


@dataclass(frozen=True)
class Periodization:
    value: complex
    tail_bound: float
    terms: int


def _tail(psi, x, start, direction):
    """Bound on the sum of |psi(x + 2 pi n)| over n >= start (direction +1) or n <= -start (-1)."""
    center, radius = psi.decay_region
    explicit, n = 0.0, start
    while True:
        y = x + direction * 2 * math.pi * n
        if direction * (y - center) >= radius:
            break
        explicit += float(psi.envelope(y))
        n += 1
    y = x + direction * 2 * math.pi * n
    if direction > 0:
        integral, _ = quadpack.quad(lambda v: float(psi.envelope(v)), y, math.inf)
    else:
        integral, _ = quadpack.quad(lambda v: float(psi.envelope(v)), -math.inf, y)
    return explicit + float(psi.envelope(y)) + integral / (2 * math.pi)


def periodize(psi, x, n_terms):
    """Sum of psi(x + 2 pi n) over |n| <= n_terms with a bound on the omitted terms."""
    if not psi.has_decay:
        raise UnreachableTolerance(f"{type(psi).__name__} carries no decay certificate; cannot periodize")
    n = np.arange(-n_terms, n_terms + 1)
    values = psi(x + 2 * math.pi * n)
    value = complex(np.sum(values))
    bound = _tail(psi, x, n_terms + 1, 1) + _tail(psi, x, n_terms + 1, -1)
    if psi.real_valued:
        value = value.real
    return Periodization(value, bound, len(n))


def periodized(psi, x):
    """The periodization of psi at points x, with enough terms that the omitted tail is negligible."""
    lo, hi = psi.time_support()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    reach = max(abs(lo), abs(hi)) + float(np.max(np.abs(x)))
    n = np.arange(-math.ceil(reach / (2 * math.pi)) - 1, math.ceil(reach / (2 * math.pi)) + 2)
    return psi(x[:, None] + 2 * math.pi * n[None, :]).sum(axis=1)


@dataclass(frozen=True)
class PoissonPairing:
    """Both sides of the periodization pairing and their ratio."""

    time_side: complex
    frequency_sum: complex
    constant: float
    expected_constant: float = 1 / (2 * math.pi)

    @property
    def relative_gap(self):
        predicted = self.expected_constant * self.frequency_sum
        if predicted == 0:
            return abs(self.time_side)
        return abs(self.time_side - predicted) / abs(predicted)

    def to_dict(self):
        return {
            "time_side": [self.time_side.real, self.time_side.imag],
            "frequency_sum": [self.frequency_sum.real, self.frequency_sum.imag],
            "constant": self.constant,
            "expected_constant": self.expected_constant,
            "relative_gap": self.relative_gap,
        }


def poisson_pairing(psi, phi):
    """
    The time-side pairing of periodize(psi) with conj(phi) and the sum of
    psi_hat(n) conj(phi_hat(n)) over the integers.
    """
    if not (psi.has_decay and phi.has_decay):
        raise UnreachableTolerance("Poisson pairing needs test functions with a decay certificate")
    lo, hi = phi.time_support()

    def integrand(x):
        return periodized(psi, x)[0] * np.conj(phi(x))

    real, _ = quadpack.quad(lambda x: float(np.real(integrand(x))), lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
    imag, _ = quadpack.quad(lambda x: float(np.imag(integrand(x))), lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
    time_side = complex(real, imag)

    band_lo, band_hi = psi.bandwidth
    other_lo, other_hi = phi.bandwidth
    n = np.arange(math.floor(max(band_lo, other_lo)), math.ceil(min(band_hi, other_hi)) + 1, dtype=float)
    frequency_sum = complex(np.sum(psi.fourier_transform(n) * np.conj(phi.fourier_transform(n)))) if len(n) else 0j
    constant = abs(time_side / frequency_sum) if frequency_sum != 0 else math.nan
    logger.debug(f"Poisson pairing: time side {time_side}, frequency sum {frequency_sum}, constant {constant}")
    return PoissonPairing(time_side, frequency_sum, constant)
