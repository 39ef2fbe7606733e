"""
Spectral measures on the real line.

A measure is an immutable value of one of five kinds: a density with an
integrability certificate, an atomic measure (a finite atom table or a
lattice generated from a weight function of the index), a self-similar
measure generated by an iterated function system of affine contractions,
a mixture with nonnegative coefficients, or a shift of another measure.

Every kind integrates vectorised functions through ``integrate`` and reports
an :class:`Integral` carrying the value, an error bound and the method used.
Integrands wrapped in :class:`Integrand` may declare a bandwidth (outside of
which they vanish to double precision) and an oscillation frequency; both
are used to choose panels, never to change the mathematical result.
"""
import abc
import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate as quadpack
from scipy import special

from . import conf
from .exceptions import ConfigError, NotAMeasure, UnreachableTolerance, Unsupported
from .expressions import Expression, parse_expression

logger = logging.getLogger(__name__)

INF = math.inf
ZETA_2 = math.pi ** 2 / 6

# Node count above which self-similar recursion gives up.
MAX_IFS_NODES = 2 ** 22
# Recursion depth used when a self-similar measure is split into bins.
BINNED_IFS_DEPTH = 18


class MeasureKind(str, enum.Enum):
    DENSITY = "density"
    ATOMIC = "atomic"
    SELF_SIMILAR_IFS = "ifs"
    MIXTURE = "mixture"
    SHIFTED = "shifted"


class CertificateMethod(str, enum.Enum):
    ANALYTIC = "certified_analytic"
    NUMERIC = "certified_numeric"


@dataclass(frozen=True)
class Integral:
    value: complex
    error: float = 0.0
    method: str = "closed_form"

    @property
    def real(self):
        return float(np.real(self.value))

    def __add__(self, other):
        method = self.method if self.method == other.method else "composite"
        return Integral(self.value + other.value, self.error + other.error, method)

    def scaled(self, factor):
        return Integral(factor * self.value, abs(factor) * self.error, self.method)

    def relative_error(self):
        if self.value == 0:
            return 0.0 if self.error == 0 else INF
        return self.error / abs(self.value)


@dataclass(frozen=True)
class Integrand:
    """A vectorised function of frequency plus optional panelling hints."""

    func: object
    bandwidth: tuple | None = None
    frequency: float = 0.0

    def __call__(self, u):
        return self.func(u)

    def shifted(self, offset):
        """The integrand v -> f(v + offset)."""
        func = self.func
        bandwidth = None
        if self.bandwidth is not None:
            bandwidth = (self.bandwidth[0] - offset, self.bandwidth[1] - offset)
        return Integrand(lambda v: func(np.asarray(v, dtype=float) + offset), bandwidth, self.frequency)

    def times(self, other):
        """Pointwise product, intersecting bandwidths."""
        left, right = self.func, other.func
        return Integrand(lambda u: left(u) * right(u), _intersect(self.bandwidth, other.bandwidth),
                         self.frequency + other.frequency)


def as_integrand(func):
    return func if isinstance(func, Integrand) else Integrand(func)


def _bin_sum(index, terms, size):
    terms = np.asarray(terms)
    values = np.bincount(index, weights=np.real(terms), minlength=size)
    if np.iscomplexobj(terms) and np.any(np.imag(terms)):
        values = values + 1j * np.bincount(index, weights=np.imag(terms), minlength=size)
    return values


def _intersect(first, second):
    if first is None:
        return second
    if second is None:
        return first
    return (max(first[0], second[0]), min(first[1], second[1]))


def moment_weight(p):
    return Integrand(lambda u: (1.0 + np.asarray(u, dtype=float) ** 2) ** (-p))


def increment_product(t, s, u):
    """xi_t(u) * conj(xi_s(u)) with the series branch near u = 0."""
    from .testfn import increment_kernel

    return increment_kernel(t, u) * np.conj(increment_kernel(s, u))


def _check_tolerance(result, rtol, atol, what):
    if not np.isfinite(result.value):
        return result
    if result.error > max(rtol * abs(result.value), atol):
        raise UnreachableTolerance(
            f"{what}: error bound {result.error:.3g} exceeds tolerance for value {result.value:.6g}",
            achieved=result.relative_error(),
        )
    return result


def _quad(func, a, b, rtol, atol, **kwargs):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", quadpack.IntegrationWarning)
        value, error = quadpack.quad(func, a, b, epsabs=atol, epsrel=rtol, limit=conf.quad_limit(), **kwargs)
    for warning in caught:
        logger.debug(f"quadrature on [{a}, {b}]: {warning.message}")
    return value, error


def _is_complex(func, a, b):
    lo = a if math.isfinite(a) else (min(b, 0.0) - 10.0 if math.isfinite(b) else -10.0)
    hi = b if math.isfinite(b) else max(lo, 0.0) + 10.0
    samples = np.linspace(lo, hi, 17)[1:-1]
    values = np.asarray(func(samples))
    return np.iscomplexobj(values) and np.any(np.imag(values) != 0)


def _quad_complex(func, a, b, rtol, atol):
    real_value, real_error = _quad(lambda u: float(np.real(func(u))), a, b, rtol, atol)
    if not _is_complex(func, a, b):
        return real_value, real_error
    imag_value, imag_error = _quad(lambda u: float(np.imag(func(u))), a, b, rtol, atol)
    return complex(real_value, imag_value), real_error + imag_error


def _panels(a, b, frequency, max_panels=2000):
    """Split a finite [a, b] into panels holding a few oscillation periods each."""
    if frequency <= 0 or not (math.isfinite(a) and math.isfinite(b)):
        return [(a, b)]
    count = min(max_panels, max(1, math.ceil((b - a) * frequency / (4 * math.pi))))
    edges = np.linspace(a, b, count + 1)
    return list(zip(edges[:-1], edges[1:]))


def _segments(lo, hi, breakpoints, frequency):
    points = sorted({lo, hi, *(x for x in breakpoints if lo < x < hi)})
    segments = []
    for a, b in zip(points[:-1], points[1:]):
        if frequency > 0 and (math.isinf(a) or math.isinf(b)):
            span = 100 * 4 * math.pi / frequency
            if math.isinf(a) and math.isinf(b):
                segments += [(-INF, -span)] + _panels(-span, span, frequency) + [(span, INF)]
            elif math.isinf(b):
                segments += _panels(a, a + span, frequency) + [(a + span, INF)]
            else:
                segments += [(-INF, b - span)] + _panels(b - span, b, frequency)
        else:
            segments += _panels(a, b, frequency)
    return segments


class SpectralMeasure(abc.ABC):
    """Common interface of every measure kind."""

    kind: MeasureKind

    # -- integration ----------------------------------------------------

    @abc.abstractmethod
    def integrate(self, func, lower=-INF, upper=INF, rtol=None, atol=None):
        """Integrate ``func`` over [lower, upper) against the measure."""

    def binned(self, func, edges, rtol=None):
        """Per-bin integrals of ``func`` over consecutive half-open bins."""
        edges = np.asarray(edges, dtype=float)
        values, errors = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            result = self.integrate(func, lo, hi, rtol=rtol)
            values.append(result.value)
            errors.append(result.error)
        return np.asarray(values), np.asarray(errors, dtype=float)

    @abc.abstractmethod
    def _moment(self, p):
        """Return an Integral of (1+u^2)^-p, with value +inf on a divergence certificate."""

    def moment(self, p):
        if int(p) != p or p < 0:
            raise ValueError(f"moment order must be a natural number, got {p!r}")
        return self._moment(int(p))

    def increment_pairing(self, t, s, rtol=None):
        """Integral of xi_t * conj(xi_s)."""
        if t == 0 or s == 0:
            return Integral(0.0, 0.0, "closed_form")
        kernel = Integrand(lambda u: increment_product(t, s, u), frequency=max(abs(t), abs(s)))
        return self.integrate(kernel, rtol=rtol)

    # -- structure ------------------------------------------------------

    @abc.abstractmethod
    def support(self):
        """Closed hull (lo, hi) of the support; may be infinite."""

    def is_compact(self):
        lo, hi = self.support()
        return math.isfinite(lo) and math.isfinite(hi)

    def canonical(self):
        return self

    def is_zero(self):
        return False

    @abc.abstractmethod
    def _order(self, p_max):
        """(p or None, method, reason) for the class certificate."""

    @cached_property
    def certificate(self):
        return certify_class_C(self)

    @property
    def growth_order_p(self):
        return self.certificate.p

    @abc.abstractmethod
    def to_config(self):
        """JSON-compatible description reloadable by the configuration layer."""


# -- density ---------------------------------------------------------------


@dataclass(frozen=True)
class DensityMeasure(SpectralMeasure):
    """
    Absolutely continuous measure m(u - shift) du on ``support``.

    ``decay_exponent`` is the exponent a with m(u) = O(|u|^a) at infinity.
    It is read off the density expression when omitted.  ``singularities``
    lists (point, exponent) pairs where m(u) ~ |u - point|^exponent with
    exponent > -1.
    """

    density: object = field(default_factory=lambda: Expression("1"))
    support_interval: tuple = (-INF, INF)
    decay_exponent: float | None = None
    singularities: tuple = ()
    label: str = ""
    shift: float = 0.0

    kind = MeasureKind.DENSITY

    def __post_init__(self):
        lo, hi = self.support_interval
        if not lo < hi:
            raise ConfigError(f"density support [{lo}, {hi}] is empty")
        for point, exponent in self.singularities:
            if exponent <= -1:
                raise ConfigError(f"singularity at {point} with exponent {exponent} is not integrable")
        a = max(lo, -50.0) if math.isinf(lo) or math.isinf(hi) else lo
        b = min(hi, 50.0) if math.isinf(lo) or math.isinf(hi) else hi
        if not a < b:
            a, b = (b - 1.0, b) if math.isfinite(b) else (a, a + 1.0)
        samples = np.linspace(a, b, 203)[1:-1]
        values = np.real(self.value(samples))
        if np.any(values[np.isfinite(values)] < 0):
            raise ConfigError(f"density {self.describe()} takes negative values")

    def describe(self):
        return self.label or getattr(self.density, "source", type(self.density).__name__)

    @property
    def growth(self):
        if self.decay_exponent is not None:
            return float(self.decay_exponent)
        if isinstance(self.density, Expression):
            return self.density.growth_exponent()
        return None

    def value(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.support_interval
        inside = (u >= lo) & (u <= hi)
        with np.errstate(invalid="ignore"):
            raw = np.real(np.asarray(self.density(u - self.shift)))
        values = np.where(inside, raw, 0.0)
        return np.nan_to_num(values, nan=0.0, posinf=np.inf)

    def support(self):
        return self.support_interval

    def is_zero(self):
        return False

    def restricted(self, lo, hi):
        """The same density on support ∩ [lo, hi], or None when that is empty."""
        a, b = max(lo, self.support_interval[0]), min(hi, self.support_interval[1])
        if not a < b:
            return None
        return replace(self, support_interval=(a, b))

    def shifted_by(self, offset):
        lo, hi = self.support_interval
        return replace(self, support_interval=(lo + offset, hi + offset), shift=self.shift + offset,
                       singularities=tuple((x + offset, e) for x, e in self.singularities))

    def _breakpoints(self):
        lo, hi = self.support_interval
        return [lo, hi, 0.0, *(x for x, _ in self.singularities)]

    def integrate(self, func, lower=-INF, upper=INF, rtol=None, atol=None):
        rtol = conf.relative_tolerance() if rtol is None else rtol
        atol = conf.absolute_tolerance() if atol is None else atol
        integrand = as_integrand(func)
        bandwidth = _intersect(integrand.bandwidth, self.support_interval)
        lo, hi = max(lower, bandwidth[0]), min(upper, bandwidth[1])
        if not lo < hi:
            return Integral(0.0, 0.0, "quadrature")

        def weighted(u):
            return integrand(u) * self.value(u)

        total, error = 0.0, 0.0
        for a, b in _segments(lo, hi, self._breakpoints(), integrand.frequency):
            value, err = _quad_complex(weighted, a, b, rtol * 1e-2, atol * 1e-2)
            total += value
            error += err
        result = Integral(total, error, "quadrature")
        return _check_tolerance(result, rtol, atol, f"density {self.describe()}")

    def _moment(self, p):
        lo, hi = self.support_interval
        if math.isinf(lo) or math.isinf(hi):
            growth = self.growth
            if growth is not None and growth - 2 * p >= -1:
                return Integral(INF, 0.0, "divergence_certificate")
            if growth is None:
                try:
                    return self.integrate(moment_weight(p))
                except UnreachableTolerance:
                    return Integral(INF, 0.0, "numeric_divergence")
        return self.integrate(moment_weight(p))

    def increment_pairing(self, t, s, rtol=None):
        """
        Inner region [-1, 1] by direct quadrature of the product kernel, the
        rest term by term with Fourier-weighted quadrature.
        """
        if t == 0 or s == 0:
            return Integral(0.0, 0.0, "closed_form")
        rtol = conf.relative_tolerance() if rtol is None else rtol
        cut = 1.0
        kernel = Integrand(lambda u: increment_product(t, s, u), frequency=max(abs(t), abs(s)))
        inner = self.integrate(kernel, -cut, cut, rtol=rtol)
        real, imag, error = float(np.real(inner.value)), float(np.imag(inner.value)), inner.error
        lo, hi = self.support_interval
        for side in (1.0, -1.0):
            a = max(cut, side * lo if side > 0 else -hi)
            b = hi if side > 0 else -lo
            if not a < b:
                continue

            def envelope(v, side=side):
                return float(self.value(side * v)) / (v * v)

            scale, scale_error = _quad(envelope, a, b, rtol * 1e-2, 0.0)
            atol = max(rtol * 1e-2 * abs(scale), 1e-300)
            for omega, sign in ((0.0, 1.0), (t - s, 1.0), (t, -1.0), (s, -1.0)):
                if omega == 0:
                    value, err = scale, scale_error
                else:
                    value, err = self._weighted_tail(envelope, a, b, "cos", abs(omega), rtol, atol)
                real += sign * value
                error += err
            for omega, sign in ((t - s, 1.0), (t, -1.0), (s, 1.0)):
                if omega == 0:
                    continue
                value, err = self._weighted_tail(envelope, a, b, "sin", abs(omega), rtol, atol)
                imag += side * sign * math.copysign(1.0, omega) * value
                error += err
        result = Integral(complex(real, imag), error, "quadrature")
        return _check_tolerance(result, rtol, conf.absolute_tolerance(), f"density {self.describe()} increments")

    @staticmethod
    def _weighted_tail(envelope, a, b, weight, omega, rtol, atol):
        if math.isinf(b):
            return _quad(envelope, a, INF, rtol * 1e-2, atol, weight=weight, wvar=omega)
        return _quad(envelope, a, b, rtol * 1e-2, atol, weight=weight, wvar=omega)

    def _order(self, p_max):
        if self.is_compact():
            return 0, CertificateMethod.ANALYTIC, "compact support"
        growth = self.growth
        if growth is None:
            for p in range(p_max + 1):
                result = self._moment(p)
                if math.isfinite(result.real):
                    return p, CertificateMethod.NUMERIC, "finite moment by quadrature"
            return None, CertificateMethod.NUMERIC, f"no finite moment up to p={p_max}"
        if math.isinf(growth) and growth > 0:
            return None, CertificateMethod.ANALYTIC, "super-polynomial growth"
        return _order_from_growth(growth), CertificateMethod.ANALYTIC, f"density growth exponent {growth:g}"

    def to_config(self):
        if hasattr(self.density, "to_config") and isinstance(self.density.to_config(), dict) \
                and "kind" in self.density.to_config():
            return self.density.to_config()
        config = {"kind": "density", "density": self.density.to_config(),
                  "support": [_json_float(x) for x in self.support_interval]}
        if self.decay_exponent is not None:
            config["decay_exponent"] = self.decay_exponent
        if self.singularities:
            config["singularities"] = [[x, e] for x, e in self.singularities]
        if self.label:
            config["label"] = self.label
        if self.shift:
            config["shift"] = self.shift
        return config


def _order_from_growth(growth):
    """Least natural p with growth - 2p < -1."""
    if math.isinf(growth) and growth < 0:
        return 0
    return max(0, math.floor((growth + 1) / 2) + 1)


def _json_float(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


# -- atomic ----------------------------------------------------------------


def _key(x):
    return round(float(x), 12)


@dataclass(frozen=True)
class AtomicMeasure(SpectralMeasure):
    """Finite sum of weighted point masses."""

    locations: tuple = ()
    weights: tuple = ()

    kind = MeasureKind.ATOMIC

    def __post_init__(self):
        if len(self.locations) != len(self.weights):
            raise ConfigError("atom locations and weights differ in length")
        if any(w < 0 for w in self.weights):
            raise ConfigError("atom weights must be nonnegative")
        object.__setattr__(self, "locations", tuple(float(x) for x in self.locations))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def from_table(cls, table):
        merged = {}
        for x, w in table:
            merged[_key(x)] = merged.get(_key(x), 0.0) + float(w)
        keys = sorted(merged)
        return cls(tuple(keys), tuple(merged[k] for k in keys))

    def as_table(self):
        merged = {}
        for x, w in zip(self.locations, self.weights):
            merged[_key(x)] = merged.get(_key(x), 0.0) + w
        return merged

    def support(self):
        if not self.locations:
            return (0.0, 0.0)
        return (min(self.locations), max(self.locations))

    def is_compact(self):
        return True

    def is_zero(self):
        return not any(w > 0 for w in self.weights)

    def canonical(self):
        table = self.as_table()
        keys = sorted(k for k, w in table.items() if w > 0)
        return AtomicMeasure(tuple(keys), tuple(table[k] for k in keys))

    def total_mass(self):
        return float(sum(self.weights))

    def integrate(self, func, lower=-INF, upper=INF, rtol=None, atol=None):
        if not self.locations:
            return Integral(0.0, 0.0, "closed_form")
        x = np.asarray(self.locations)
        w = np.asarray(self.weights)
        mask = (x >= lower) & ((x < upper) | (upper == INF))
        if not mask.any():
            return Integral(0.0, 0.0, "closed_form")
        terms = as_integrand(func)(x[mask]) * w[mask]
        value = terms.sum()
        error = 4 * np.finfo(float).eps * float(np.abs(terms).sum())
        return Integral(value.item() if hasattr(value, "item") else value, error, "closed_form")

    def binned(self, func, edges, rtol=None):
        edges = np.asarray(edges, dtype=float)
        values = np.zeros(len(edges) - 1)
        if self.locations:
            x = np.asarray(self.locations)
            index = np.searchsorted(edges, x, side="right") - 1
            keep = (index >= 0) & (index < len(edges) - 1)
            terms = as_integrand(func)(x[keep]) * np.asarray(self.weights)[keep]
            values = _bin_sum(index[keep], terms, len(edges) - 1)
        return values, 4 * np.finfo(float).eps * np.abs(values)

    def _moment(self, p):
        return self.integrate(moment_weight(p))

    def increment_pairing(self, t, s, rtol=None):
        if t == 0 or s == 0:
            return Integral(0.0, 0.0, "closed_form")
        return self.integrate(lambda u: increment_product(t, s, u))

    def _order(self, p_max):
        return 0, CertificateMethod.ANALYTIC, "finite atomic measure"

    def to_config(self):
        return {"kind": "atomic", "atoms": [[x, w] for x, w in zip(self.locations, self.weights)]}


def _cos_series(x):
    """Sum over n >= 1 of cos(n x) / n^2."""
    y = np.mod(np.asarray(x, dtype=float), 2 * math.pi)
    return ZETA_2 - math.pi * y / 2 + y * y / 4


@dataclass(frozen=True)
class LatticeMeasure(SpectralMeasure):
    """
    Atoms of weight w(n) at origin + n * spacing for every integer n not in ``excluded``.

    ``weight_growth`` is the exponent a with w(n) = O(|n|^a); it is read off
    the weight expression when omitted.
    """

    spacing: float = 1.0
    weight: Expression = field(default_factory=lambda: Expression("1", variable="n"))
    origin: float = 0.0
    weight_growth: float | None = None
    excluded: tuple = ()

    kind = MeasureKind.ATOMIC

    def __post_init__(self):
        if not self.spacing > 0:
            raise ConfigError(f"lattice spacing must be positive, got {self.spacing}")
        if self.growth is None:
            raise ConfigError(f"lattice weight {self.weight.source!r} needs an explicit weight_growth")
        object.__setattr__(self, "excluded", tuple(sorted({int(n) for n in self.excluded})))
        samples = self.weight(np.arange(-200, 201, dtype=float))
        if np.any(np.real(samples) < 0):
            raise ConfigError(f"lattice weight {self.weight.source!r} takes negative values")

    @property
    def growth(self):
        if self.weight_growth is not None:
            return float(self.weight_growth)
        return self.weight.growth_exponent()

    def weights(self, n):
        n = np.asarray(n, dtype=float)
        w = np.real(self.weight(n)).astype(float)
        if self.excluded:
            w = np.where(np.isin(n, self.excluded), 0.0, w)
        return w

    def points(self, n):
        return self.origin + np.asarray(n, dtype=float) * self.spacing

    def index_of(self, x):
        """Lattice index of ``x`` or None when x is not a (non-excluded) lattice point."""
        ratio = (float(x) - self.origin) / self.spacing
        n = round(ratio)
        if abs(ratio - n) > 1e-9 or n in self.excluded:
            return None
        return int(n)

    def same_grid(self, other):
        if not math.isclose(self.spacing, other.spacing, rel_tol=1e-12):
            return False
        ratio = (self.origin - other.origin) / self.spacing
        return abs(ratio - round(ratio)) < 1e-9

    def constant_weight(self):
        return self.weight.constant_value() if self.weight.is_constant() else None

    def support(self):
        return (-INF, INF)

    def _index_range(self, lower, upper):
        n_lo = -INF if math.isinf(lower) else math.ceil((lower - self.origin) / self.spacing - 1e-12)
        n_hi = INF if math.isinf(upper) else math.ceil((upper - self.origin) / self.spacing - 1e-12) - 1
        return n_lo, n_hi

    def _sum(self, integrand, n_lo, n_hi):
        n = np.arange(n_lo, n_hi + 1, dtype=float)
        terms = integrand(self.points(n)) * self.weights(n)
        return terms.sum(), float(np.abs(terms).sum())

    def integrate(self, func, lower=-INF, upper=INF, rtol=None, atol=None):
        rtol = conf.relative_tolerance() if rtol is None else rtol
        atol = conf.absolute_tolerance() if atol is None else atol
        integrand = as_integrand(func)
        if integrand.bandwidth is not None:
            lower = max(lower, integrand.bandwidth[0])
            upper = min(upper, np.nextafter(integrand.bandwidth[1], INF))
        if not lower < upper:
            return Integral(0.0, 0.0, "lattice_sum")
        max_terms = conf.setting("SPECTRAL_LATTICE_MAX_TERMS", 200000)
        n_lo, n_hi = self._index_range(lower, upper)
        if math.isfinite(n_lo) and math.isfinite(n_hi):
            if n_hi < n_lo:
                return Integral(0.0, 0.0, "lattice_sum")
            if n_hi - n_lo + 1 > max_terms:
                raise UnreachableTolerance(f"lattice sum over {n_hi - n_lo + 1} terms exceeds the budget")
            value, scale = self._sum(integrand, n_lo, n_hi)
            return Integral(value, 4 * np.finfo(float).eps * scale, "lattice_sum")

        span, previous = 1024, None
        while 2 * span + 1 <= max_terms:
            a = max(n_lo, -span) if math.isfinite(n_lo) else -span
            b = min(n_hi, span) if math.isfinite(n_hi) else span
            value, _ = self._sum(integrand, a, b)
            if previous is not None and abs(value - previous) <= max(rtol * abs(value), atol):
                return Integral(value, abs(value - previous), "lattice_sum")
            previous, span = value, span * 4
        raise UnreachableTolerance("unbounded lattice sum did not settle within the term budget")

    def binned(self, func, edges, rtol=None):
        edges = np.asarray(edges, dtype=float)
        n_lo, n_hi = self._index_range(edges[0], edges[-1])
        values = np.zeros(len(edges) - 1)
        if n_hi >= n_lo:
            n = np.arange(n_lo, n_hi + 1, dtype=float)
            x = self.points(n)
            index = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
            values = _bin_sum(index, as_integrand(func)(x) * self.weights(n), len(edges) - 1)
        return values, 4 * np.finfo(float).eps * np.abs(values)

    def _excluded_sum(self, func):
        if not self.excluded:
            return 0.0
        n = np.asarray(self.excluded, dtype=float)
        return np.sum(func(self.points(n)) * np.real(self.weight(n)))

    def _moment(self, p):
        if 2 * p - self.growth <= 1:
            return Integral(INF, 0.0, "divergence_certificate")
        weight = self.constant_weight()
        if p == 1 and weight is not None:
            x = math.pi / self.spacing
            if 2 * x > 700:
                ratio = 1.0
            else:
                ratio = math.tanh(2 * x) / (1 - math.cos(2 * x * self.origin) / math.cosh(2 * x))
            value = weight * x * ratio - self._excluded_sum(lambda u: 1.0 / (1.0 + u * u))
            return Integral(value, 8 * np.finfo(float).eps * abs(value), "closed_form")
        return self._series(lambda u: (1.0 + u * u) ** (-p))

    def _tail_integral(self, amplitude, start):
        """Midpoint Euler-Maclaurin estimate of the sum of amplitude(n) over n > start - 1/2."""
        part, error = _quad(lambda x: float(amplitude(x)), start, INF, 1e-10, 0.0)
        step = 1e-3 * start
        slope = (float(amplitude(start + step)) - float(amplitude(start - step))) / (2 * step)
        return part, error + abs(slope) / 24

    def _series(self, kernel):
        """Full-lattice sum of a smooth nonnegative kernel times the weight, with tail estimate."""
        target = conf.setting("SPECTRAL_LATTICE_TAIL", 1e-12)
        max_terms = conf.setting("SPECTRAL_LATTICE_MAX_TERMS", 200000)
        span = 1024
        while 2 * span + 1 <= max_terms:
            value, _ = self._sum(kernel, -span, span)
            tail, bound = 0.0, 0.0
            for side in (1.0, -1.0):
                part, error = self._tail_integral(
                    lambda x, side=side: kernel(self.points(side * x)) * np.real(self.weight(side * x)), span + 0.5)
                tail += part
                bound += error
            total = value + tail
            if bound <= target * abs(total) or bound <= conf.absolute_tolerance():
                return Integral(total, bound, "lattice_sum")
            span *= 4
        raise UnreachableTolerance("lattice tail bound not reached within the term budget")

    def _increment_series(self, t, s, rtol):
        """
        Partial sum over the full term budget plus tails.

        Non-oscillating tail terms are estimated by Euler-Maclaurin; each
        oscillating cosine or sine tail is bounded by a(N+1) / |sin(theta/2)|
        for the decreasing amplitude a(n) = w(n) / u_n^2.
        """
        span = conf.setting("SPECTRAL_LATTICE_MAX_TERMS", 200000) // 2
        value, _ = self._sum(lambda u: increment_product(t, s, u), -span, span)
        real, imag, bound = float(np.real(value)), float(np.imag(value)), 0.0
        h = self.spacing
        cosines = ((0.0, 1.0), (t - s, 1.0), (t, -1.0), (s, -1.0))
        sines = ((t - s, 1.0), (t, -1.0), (s, 1.0))
        for side in (1.0, -1.0):

            def amplitude(x, side=side):
                return np.real(self.weight(side * x)) / self.points(side * x) ** 2

            part, error = self._tail_integral(amplitude, span + 0.5)
            first = abs(float(amplitude(span + 1.0)))
            for terms, is_cosine in ((cosines, True), (sines, False)):
                for omega, sign in terms:
                    half = abs(math.sin(omega * h / 2))
                    if half > 1e-9:
                        bound += first / half
                        continue
                    # phase locked to the lattice: the factor is constant along the tail
                    phase = omega * self.origin
                    factor = math.cos(phase) if is_cosine else math.sin(phase)
                    if is_cosine:
                        real += sign * factor * part
                    else:
                        imag += sign * factor * part
                    bound += abs(factor) * error
        result = Integral(complex(real, imag), bound, "lattice_sum")
        return _check_tolerance(result, rtol, conf.absolute_tolerance(), "lattice increments")

    def increment_pairing(self, t, s, rtol=None):
        if t == 0 or s == 0:
            return Integral(0.0, 0.0, "closed_form")
        weight = self.constant_weight()
        h = self.spacing
        if weight is not None and self.origin == 0:
            bracket = ZETA_2 + _cos_series((t - s) * h) - _cos_series(t * h) - _cos_series(s * h)
            value = 2 * weight / (h * h) * float(bracket) + weight * t * s
            if self.excluded:
                value -= float(np.real(self._excluded_sum(lambda u: increment_product(t, s, u))))
            scale = abs(value) + weight * (abs(t * s) + 4 * ZETA_2 / h ** 2)
            return Integral(value, 16 * np.finfo(float).eps * scale, "closed_form")
        if self.growth >= 1:
            raise UnreachableTolerance("increment pairing diverges for lattice weights growing like |n|^1 or faster")
        rtol = conf.relative_tolerance() if rtol is None else rtol
        return self._increment_series(t, s, rtol)

    def _order(self, p_max):
        growth = self.growth
        if math.isinf(growth) and growth > 0:
            return None, CertificateMethod.ANALYTIC, "super-polynomial lattice weights"
        return _order_from_growth(growth), CertificateMethod.ANALYTIC, f"lattice weight growth {growth:g}"

    def to_config(self):
        config = {"kind": "lattice", "spacing": self.spacing, "weight": self.weight.to_config(),
                  "origin": self.origin}
        if self.weight_growth is not None:
            config["weight_growth"] = self.weight_growth
        if self.excluded:
            config["exclude"] = list(self.excluded)
        return config


# -- self-similar ----------------------------------------------------------


@lru_cache(maxsize=8)
def _ifs_nodes(ratios, offsets, probabilities, depth, start):
    x = np.array([start])
    w = np.array([1.0])
    for _ in range(depth):
        x = np.concatenate([r * x + b for r, b in zip(ratios, offsets)])
        w = np.concatenate([p * w for p in probabilities])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class SelfSimilarMeasure(SpectralMeasure):
    """
    Invariant measure of the maps S_i(x) = r_i x + b_i chosen with probabilities p_i, scaled by ``mass``.

    Integrals use the self-similarity recursion with every cylinder collapsed
    onto the image of the barycenter, refined level by level until two
    consecutive levels agree.
    """

    ratios: tuple = (1 / 3, 1 / 3)
    offsets: tuple = (0.0, 2 / 3)
    probabilities: tuple = (0.5, 0.5)
    mass: float = 1.0
    depth: int | None = None

    kind = MeasureKind.SELF_SIMILAR_IFS

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "offsets", tuple(float(b) for b in self.offsets))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if not self.ratios or not (len(self.ratios) == len(self.offsets) == len(self.probabilities)):
            raise ConfigError("IFS ratios, offsets and probabilities must be non-empty and of equal length")
        if any(not 0 < r < 1 for r in self.ratios):
            raise ConfigError("IFS contraction ratios must lie in (0, 1)")
        if any(p < 0 for p in self.probabilities) or not math.isclose(sum(self.probabilities), 1.0, abs_tol=1e-12):
            raise ConfigError("IFS probabilities must be nonnegative and sum to 1")
        if self.mass < 0:
            raise ConfigError("IFS mass must be nonnegative")

    @property
    def sum_ratios(self):
        return sum(self.ratios)

    @property
    def barycenter(self):
        numerator = sum(p * b for p, b in zip(self.probabilities, self.offsets))
        return numerator / (1 - sum(p * r for p, r in zip(self.probabilities, self.ratios)))

    def same_maps(self, other):
        return (len(self.ratios) == len(other.ratios)
                and np.allclose(self.ratios, other.ratios, rtol=1e-12, atol=0)
                and np.allclose(self.offsets, other.offsets, rtol=1e-12, atol=1e-15))

    def same_weights(self, other):
        return np.allclose(self.probabilities, other.probabilities, rtol=1e-12, atol=1e-15)

    def support(self):
        fixed = [b / (1 - r) for r, b in zip(self.ratios, self.offsets)]
        return (min(fixed), max(fixed))

    def is_compact(self):
        return True

    def is_zero(self):
        return self.mass == 0

    def nodes(self, depth):
        return _ifs_nodes(self.ratios, self.offsets, self.probabilities, depth, self.barycenter)

    def max_depth(self):
        limit = self.depth if self.depth is not None else conf.setting("SPECTRAL_IFS_DEPTH", 24)
        count = len(self.ratios)
        if count == 1:
            return limit
        return min(limit, int(math.log(MAX_IFS_NODES) / math.log(count)))

    def _level_sum(self, integrand, depth, lower, upper):
        x, w = self.nodes(depth)
        mask = (x >= lower) & ((x < upper) | (upper == INF))
        return self.mass * np.sum(integrand(x[mask]) * w[mask])

    def integrate(self, func, lower=-INF, upper=INF, rtol=None, atol=None):
        rtol = conf.relative_tolerance() if rtol is None else rtol
        atol = conf.absolute_tolerance() if atol is None else atol
        integrand = as_integrand(func)
        if integrand.bandwidth is not None:
            lower = max(lower, integrand.bandwidth[0])
            upper = min(upper, np.nextafter(integrand.bandwidth[1], INF))
        if not lower < upper or self.mass == 0:
            return Integral(0.0, 0.0, "ifs_recursion")
        top = self.max_depth()
        previous = self._level_sum(integrand, min(3, top), lower, upper)
        for depth in range(min(4, top), top + 1):
            value = self._level_sum(integrand, depth, lower, upper)
            gap = abs(value - previous)
            if gap <= max(rtol * abs(value), atol):
                logger.debug(f"IFS recursion settled at depth {depth}")
                return Integral(value, gap, "ifs_recursion")
            previous = value
        raise UnreachableTolerance(f"IFS recursion did not settle by depth {top}", achieved=gap / max(abs(value), 1e-300))

    def binned(self, func, edges, rtol=None):
        edges = np.asarray(edges, dtype=float)
        depth = min(self.max_depth(), BINNED_IFS_DEPTH)
        integrand = as_integrand(func)
        results = []
        for level in (depth - 1, depth):
            x, w = self.nodes(level)
            index = np.searchsorted(edges, x, side="right") - 1
            keep = (index >= 0) & (index < len(edges) - 1)
            results.append(_bin_sum(index[keep], self.mass * integrand(x[keep]) * w[keep], len(edges) - 1))
        return results[1], np.abs(results[1] - results[0])

    def _moment(self, p):
        return self.integrate(moment_weight(p))

    def _order(self, p_max):
        return 0, CertificateMethod.ANALYTIC, "compactly supported self-similar measure"

    def to_config(self):
        config = {"kind": "ifs", "ratios": list(self.ratios), "offsets": list(self.offsets),
                  "probabilities": list(self.probabilities)}
        if self.mass != 1.0:
            config["mass"] = self.mass
        if self.depth is not None:
            config["depth"] = self.depth
        return config


# -- mixtures and shifts ---------------------------------------------------


@dataclass(frozen=True)
class MixtureMeasure(SpectralMeasure):
    components: tuple = ()

    kind = MeasureKind.MIXTURE

    def __post_init__(self):
        components = tuple((float(c), m) for c, m in self.components)
        if any(c < 0 for c, _ in components):
            raise ConfigError("mixture coefficients must be nonnegative")
        object.__setattr__(self, "components", components)

    def _active(self):
        return [(c, m) for c, m in self.components if c > 0]

    def integrate(self, func, lower=-INF, upper=INF, rtol=None, atol=None):
        total = Integral(0.0, 0.0, "closed_form")
        for coefficient, measure in self._active():
            total = total + measure.integrate(func, lower, upper, rtol, atol).scaled(coefficient)
        return total

    def binned(self, func, edges, rtol=None):
        values = np.zeros(len(edges) - 1)
        errors = np.zeros(len(edges) - 1)
        for coefficient, measure in self._active():
            v, e = measure.binned(func, edges, rtol)
            values = values + coefficient * v
            errors = errors + coefficient * e
        return values, errors

    def _moment(self, p):
        total = Integral(0.0, 0.0, "closed_form")
        for coefficient, measure in self._active():
            part = measure.moment(p)
            if math.isinf(part.real):
                return Integral(INF, 0.0, part.method)
            total = total + part.scaled(coefficient)
        return total

    def increment_pairing(self, t, s, rtol=None):
        total = Integral(0.0, 0.0, "closed_form")
        for coefficient, measure in self._active():
            total = total + measure.increment_pairing(t, s, rtol).scaled(coefficient)
        return total

    def support(self):
        hulls = [m.support() for _, m in self._active() if not m.is_zero()]
        if not hulls:
            return (0.0, 0.0)
        return (min(h[0] for h in hulls), max(h[1] for h in hulls))

    def is_compact(self):
        return all(m.is_compact() for _, m in self._active())

    def is_zero(self):
        return all(m.is_zero() for _, m in self._active())

    def canonical(self):
        flat = []
        for coefficient, measure in self._active():
            measure = measure.canonical()
            if isinstance(measure, MixtureMeasure):
                flat.extend((coefficient * c, m) for c, m in measure.components)
            elif not measure.is_zero():
                flat.append((coefficient, measure))
        if len(flat) == 1 and flat[0][0] == 1.0:
            return flat[0][1]
        return MixtureMeasure(tuple(flat))

    def _order(self, p_max):
        orders = []
        for _, measure in self._active():
            certificate = certify_class_C(measure, p_max)
            if not certificate.in_class:
                return None, certificate.method, certificate.reason
            orders.append((certificate.p, certificate.method))
        if not orders:
            return 0, CertificateMethod.ANALYTIC, "zero measure"
        method = CertificateMethod.NUMERIC if any(m == CertificateMethod.NUMERIC for _, m in orders) \
            else CertificateMethod.ANALYTIC
        return max(p for p, _ in orders), method, "largest component order"

    def to_config(self):
        return {"kind": "mixture",
                "components": [{"coefficient": c, "measure": m.to_config()} for c, m in self.components]}


@dataclass(frozen=True)
class ShiftedMeasure(SpectralMeasure):
    """The measure A -> base(A - offset)."""

    base: SpectralMeasure = None
    offset: float = 0.0

    kind = MeasureKind.SHIFTED

    def integrate(self, func, lower=-INF, upper=INF, rtol=None, atol=None):
        return self.base.integrate(as_integrand(func).shifted(self.offset),
                                   lower - self.offset, upper - self.offset, rtol, atol)

    def binned(self, func, edges, rtol=None):
        return self.base.binned(as_integrand(func).shifted(self.offset),
                                np.asarray(edges, dtype=float) - self.offset, rtol)

    def _moment(self, p):
        return self.canonical().moment(p)

    def increment_pairing(self, t, s, rtol=None):
        return self.canonical().increment_pairing(t, s, rtol)

    def support(self):
        lo, hi = self.base.support()
        return (lo + self.offset, hi + self.offset)

    def is_compact(self):
        return self.base.is_compact()

    def is_zero(self):
        return self.base.is_zero()

    def canonical(self):
        return shift_canonical(self.base.canonical(), self.offset)

    def _order(self, p_max):
        certificate = certify_class_C(self.base, p_max)
        return certificate.p, certificate.method, f"shift of: {certificate.reason}"

    def to_config(self):
        return {"kind": "shifted", "base": self.base.to_config(), "offset": self.offset}


def shift_canonical(measure, offset):
    """Push a shift into the parameters of ``measure``."""
    if offset == 0:
        return measure
    if isinstance(measure, AtomicMeasure):
        return AtomicMeasure(tuple(x + offset for x in measure.locations), measure.weights)
    if isinstance(measure, LatticeMeasure):
        return replace(measure, origin=measure.origin + offset)
    if isinstance(measure, DensityMeasure):
        return measure.shifted_by(offset)
    if isinstance(measure, SelfSimilarMeasure):
        offsets = tuple(b + offset * (1 - r) for r, b in zip(measure.ratios, measure.offsets))
        return replace(measure, offsets=offsets)
    if isinstance(measure, MixtureMeasure):
        return MixtureMeasure(tuple((c, shift_canonical(m, offset)) for c, m in measure.components))
    if isinstance(measure, ShiftedMeasure):
        return shift_canonical(measure.base.canonical(), measure.offset + offset)
    raise Unsupported(f"cannot shift a {type(measure).__name__}")


ZERO = AtomicMeasure((), ())


# -- moments and class certificates -----------------------------------------


def moment_integral(sigma, p):
    """Integral of (1+u^2)^-p d sigma; +inf when a divergence certificate fires."""
    result = sigma.moment(p)
    logger.debug(f"moment p={p}: {result.value} ({result.method}, error {result.error:.3g})")
    return float(np.real(result.value))


@dataclass(frozen=True)
class ClassCertificate:
    in_class: bool
    p: int | None
    method: CertificateMethod
    reason: str

    def to_dict(self):
        return {"in_class": self.in_class, "p": self.p, "method": self.method.value, "reason": self.reason}


def certify_class_C(sigma, p_max=None):
    p_max = conf.setting("SPECTRAL_P_MAX", 8) if p_max is None else p_max
    p, method, reason = sigma._order(p_max)
    if p is None:
        return ClassCertificate(False, None, method, reason)
    if p > p_max:
        return ClassCertificate(False, None, method, f"least order {p} exceeds p_max={p_max}")
    return ClassCertificate(True, p, method, reason)


@dataclass(frozen=True)
class BoundedShiftCertificate:
    holds: bool
    reason: str
    p: int | None = None
    q: int | None = None
    constant: float | None = None

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {"holds": self.holds, "reason": self.reason, "p": self.p, "q": self.q, "constant": self.constant}


def certify_class_Cb(sigma, p=1):
    """
    Certificate for (1+(u+v)^2)^-q integrated in u being bounded by C (1+v^2)^-p.

    Only compactly supported measures of finite mass are certified; the
    constant follows from 1 + (u+v)^2 >= (1+v^2) / (2 (1+u^2)) with q = p.
    """
    canonical = sigma.canonical()
    if canonical.is_zero():
        return BoundedShiftCertificate(True, "zero measure", p, p, 0.0)
    if not canonical.is_compact():
        return BoundedShiftCertificate(False, "no certificate")
    lo, hi = canonical.support()
    reach = max(abs(lo), abs(hi))
    mass = float(np.real(canonical.moment(0).value))
    if not math.isfinite(mass):
        return BoundedShiftCertificate(False, "no certificate")
    constant = 2 ** p * (1 + reach ** 2) ** p * mass
    kind = "finite atomic measure" if isinstance(canonical, AtomicMeasure) else "compact support"
    return BoundedShiftCertificate(True, f"{kind} in [-{reach:g}, {reach:g}]", p, p, constant)


# -- structural parts ------------------------------------------------------


@dataclass
class MeasureParts:
    """A canonical measure split by kind, with coefficients folded in."""

    atoms: dict = field(default_factory=dict)
    lattices: list = field(default_factory=list)
    densities: list = field(default_factory=list)
    ifs: list = field(default_factory=list)

    def point_mass(self, x):
        mass = self.atoms.get(_key(x), 0.0)
        for coefficient, lattice in self.lattices:
            n = lattice.index_of(x)
            if n is not None:
                mass += coefficient * float(lattice.weights(n))
        return mass

    def density_value(self, u):
        u = np.asarray(u, dtype=float)
        total = np.zeros_like(u)
        for coefficient, density in self.densities:
            total = total + coefficient * density.value(u)
        return total

    def density_intervals(self):
        return _merge([d.support_interval for _, d in self.densities])

    def point_measure(self, lower, upper):
        """Every atom (finite or lattice) in [lower, upper) as a finite atomic measure."""
        table = [(x, w) for x, w in self.atoms.items() if lower <= x < upper]
        for coefficient, lattice in self.lattices:
            n_lo, n_hi = lattice._index_range(lower, upper)
            n = np.arange(n_lo, n_hi + 1, dtype=float)
            table += list(zip(lattice.points(n), coefficient * lattice.weights(n)))
        return AtomicMeasure.from_table([(x, w) for x, w in table if w > 0])

    def density_measure(self):
        return MixtureMeasure(tuple(self.densities))

    def ifs_measure(self):
        return MixtureMeasure(tuple(self.ifs))


def measure_parts(sigma):
    parts = MeasureParts()
    _collect(sigma.canonical(), 1.0, parts)
    return parts


def _collect(measure, coefficient, parts):
    if coefficient == 0 or measure.is_zero():
        return
    if isinstance(measure, MixtureMeasure):
        for c, m in measure.components:
            _collect(m, coefficient * c, parts)
    elif isinstance(measure, AtomicMeasure):
        for x, w in measure.as_table().items():
            parts.atoms[x] = parts.atoms.get(x, 0.0) + coefficient * w
    elif isinstance(measure, LatticeMeasure):
        parts.lattices.append((coefficient, measure))
    elif isinstance(measure, DensityMeasure):
        parts.densities.append((coefficient, measure))
    elif isinstance(measure, SelfSimilarMeasure):
        parts.ifs.append((coefficient, measure))
    elif isinstance(measure, ShiftedMeasure):
        _collect(measure.canonical(), coefficient, parts)
    else:
        raise Unsupported(f"no structural rule for {type(measure).__name__}")


def _merge(intervals):
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _complement(interval, covered):
    lo, hi = interval
    pieces, cursor = [], lo
    for a, b in covered:
        if b <= cursor or a >= hi:
            continue
        if a > cursor:
            pieces.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < hi:
        pieces.append((cursor, hi))
    return pieces


# -- Lebesgue decomposition --------------------------------------------------


@dataclass(frozen=True)
class DecompositionPiece:
    """A component of the absolutely continuous part with its Radon-Nikodym factor."""

    coefficient: float
    measure: SpectralMeasure
    derivative: object
    category: str


class RadonNikodym:
    """Derivative of the absolutely continuous part of one measure with respect to another."""

    def __init__(self, pieces=(), constant=None):
        self.pieces = tuple(pieces)
        self.constant = constant

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.constant is not None:
            return np.full_like(u, self.constant)
        result = np.full_like(u, np.nan)
        for piece in self.pieces:
            lo, hi = piece.measure.support()
            if piece.category == "point":
                on = np.isin(np.round(u, 12), [_key(x) for x in piece.measure.locations]) \
                    if isinstance(piece.measure, AtomicMeasure) else _on_lattice(piece.measure, u)
            else:
                on = (u >= lo) & (u <= hi) & np.isnan(result)
            result = np.where(on, piece.derivative(u), result)
        return result

    def at(self, x):
        return float(self(np.array([x]))[0])


def _on_lattice(lattice, u):
    return np.array([lattice.index_of(x) is not None for x in np.atleast_1d(u)])


@dataclass(frozen=True)
class Decomposition:
    ac_part: SpectralMeasure
    singular_part: SpectralMeasure
    rn_derivative: RadonNikodym
    pieces: tuple = ()


def _mixture(components):
    components = [(c, m) for c, m in components if c > 0 and m is not None and not m.is_zero()]
    if not components:
        return ZERO
    return MixtureMeasure(tuple(components)).canonical()


def lebesgue_decompose(first, second):
    """
    Split ``first`` into parts absolutely continuous and singular with respect to ``second``.

    The rules are structural: point masses are compared by location,
    densities by support overlap, self-similar measures by their maps and
    weights.  Pairs outside these rules raise :class:`Unsupported`.
    """
    a, b = first.canonical(), second.canonical()
    if a == b and not a.is_zero():
        piece = DecompositionPiece(1.0, a, lambda u: np.ones_like(np.asarray(u, dtype=float)), "identical")
        return Decomposition(first, ZERO, RadonNikodym(constant=1.0), (piece,))
    pa, pb = measure_parts(a), measure_parts(b)
    ac, singular, pieces = [], [], []

    def point_ratio(u):
        return np.array([pa.point_mass(x) / pb.point_mass(x) if pb.point_mass(x) > 0 else np.nan
                         for x in np.atleast_1d(u)])

    shared, lonely = [], []
    for x, w in pa.atoms.items():
        (shared if pb.point_mass(x) > 0 else lonely).append((x, w))
    if shared:
        atoms = AtomicMeasure.from_table(shared)
        ac.append((1.0, atoms))
        pieces.append(DecompositionPiece(1.0, atoms, point_ratio, "point"))
    if lonely:
        singular.append((1.0, AtomicMeasure.from_table(lonely)))

    for coefficient, lattice in pa.lattices:
        if pb.lattices:
            if not all(lattice.same_grid(other) for _, other in pb.lattices):
                raise Unsupported("lattices on different grids have no decomposition rule")
            ac.append((coefficient, lattice))
            pieces.append(DecompositionPiece(coefficient, lattice, point_ratio, "point"))
            continue
        hits = sorted({lattice.index_of(x) for x in pb.atoms} - {None})
        if hits:
            n = np.asarray(hits, dtype=float)
            atoms = AtomicMeasure.from_table(zip(lattice.points(n), coefficient * lattice.weights(n)))
            ac.append((1.0, atoms))
            pieces.append(DecompositionPiece(1.0, atoms, point_ratio, "point"))
        singular.append((coefficient, replace(lattice, excluded=lattice.excluded + tuple(hits))))

    covered = pb.density_intervals()
    if pa.densities and any(f.sum_ratios >= 1 for _, f in pb.ifs):
        raise Unsupported("density against a self-similar measure of positive length")

    def density_ratio(u):
        upper = pa.density_value(u)
        lower = pb.density_value(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(lower > 0, upper / lower, np.nan)

    for coefficient, density in pa.densities:
        for lo, hi in covered:
            piece = density.restricted(lo, hi)
            if piece is not None:
                ac.append((coefficient, piece))
                pieces.append(DecompositionPiece(coefficient, piece, density_ratio, "density"))
        for lo, hi in _complement(density.support_interval, covered):
            piece = density.restricted(lo, hi)
            if piece is not None:
                singular.append((coefficient, piece))

    for coefficient, fractal in pa.ifs:
        if pb.densities and fractal.sum_ratios >= 1:
            raise Unsupported("self-similar measure of positive length against a density")
        if any(not fractal.same_maps(other) for _, other in pb.ifs):
            raise Unsupported("self-similar measures with different maps have no decomposition rule")
        partners = [(c, other) for c, other in pb.ifs if fractal.same_weights(other)]
        if partners:
            ratio = sum(c * f.mass for c, f in pa.ifs if f.same_maps(fractal) and f.same_weights(fractal)) \
                / sum(c * other.mass for c, other in partners)
            ac.append((coefficient, fractal))
            pieces.append(DecompositionPiece(coefficient, fractal,
                                             lambda u, r=ratio: np.full_like(np.asarray(u, dtype=float), r),
                                             "ifs"))
        else:
            singular.append((coefficient, fractal))

    logger.debug(f"decomposition: {len(ac)} absolutely continuous and {len(singular)} singular components")
    return Decomposition(_mixture(ac), _mixture(singular), RadonNikodym(pieces), tuple(pieces))


# -- convolution -----------------------------------------------------------


class ConvolutionDensity:
    """Density of a convolution, evaluated by quadrature (or recursion) on demand."""

    def __init__(self, first, second):
        self.first = first
        self.second = second

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        values = np.empty_like(u)
        for i, point in enumerate(u.flat):
            values.flat[i] = self._at(point)
        return values

    def _at(self, point):
        kernel = self.second
        if isinstance(self.first, SelfSimilarMeasure):
            x, w = self.first.nodes(min(self.first.max_depth(), 12))
            return float(self.first.mass * np.sum(w * kernel.value(point - x)))
        lo, hi = kernel.support_interval
        # v ranges over supp(first) ∩ (point - supp(second))
        a = max(self.first.support_interval[0], point - hi)
        b = min(self.first.support_interval[1], point - lo)
        if not a < b:
            return 0.0
        breaks = [x for x, _ in self.first.singularities] + [point - x for x, _ in kernel.singularities]
        total = 0.0
        for left, right in _segments(a, b, breaks, 0.0):
            value, _ = _quad(lambda v: float(self.first.value(v) * kernel.value(point - v)), left, right, 1e-10, 1e-14)
            total += value
        return total

    def __eq__(self, other):
        return isinstance(other, ConvolutionDensity) and (self.first, self.second) == (other.first, other.second)

    def __hash__(self):
        return hash((self.first, self.second))

    def to_config(self):
        return {"kind": "convolution", "factors": [self.first.to_config(), self.second.to_config()]}


def _infinite_tails(measure):
    lo, hi = measure.support()
    if not (math.isinf(lo) and math.isinf(hi)):
        return False
    growth = getattr(measure, "growth", None)
    return growth is not None and growth >= 0


def convolve(first, second):
    """
    Convolution within the representable kinds.

    Raises :class:`NotAMeasure` when both factors have infinite mass with
    non-decaying two-sided tails, :class:`Unsupported` outside the rules.
    """
    a, b = first.canonical(), second.canonical()
    if isinstance(a, MixtureMeasure):
        return MixtureMeasure(tuple((c, convolve(m, b)) for c, m in a.components))
    if isinstance(b, MixtureMeasure):
        return MixtureMeasure(tuple((c, convolve(a, m)) for c, m in b.components))
    if a.is_zero() or b.is_zero():
        return ZERO
    if isinstance(a, AtomicMeasure) and isinstance(b, AtomicMeasure):
        return AtomicMeasure.from_table((x + y, v * w) for x, v in zip(a.locations, a.weights)
                                        for y, w in zip(b.locations, b.weights))
    if isinstance(a, AtomicMeasure):
        return MixtureMeasure(tuple((w, ShiftedMeasure(b, x)) for x, w in zip(a.locations, a.weights)))
    if isinstance(b, AtomicMeasure):
        return convolve(b, a)
    if _infinite_tails(a) and _infinite_tails(b):
        raise NotAMeasure("both factors have infinite mass with non-decaying tails; "
                          "the convolution is infinite on every interval")
    if isinstance(a, DensityMeasure) and isinstance(b, DensityMeasure):
        finite_mass = math.isfinite(moment_integral(a, 0)) and math.isfinite(moment_integral(b, 0))
        if not (a.is_compact() or b.is_compact() or finite_mass):
            raise Unsupported("density convolution needs a compact factor or two finite masses")
        return _density_convolution(a, b)
    if isinstance(a, SelfSimilarMeasure) and isinstance(b, DensityMeasure):
        return _density_convolution(a, b)
    if isinstance(b, SelfSimilarMeasure) and isinstance(a, DensityMeasure):
        return _density_convolution(b, a)
    raise Unsupported(f"no convolution rule for {type(a).__name__} and {type(b).__name__}")


def _density_convolution(first, second):
    lo = first.support()[0] + second.support_interval[0]
    hi = first.support()[1] + second.support_interval[1]
    growths = [m.growth for m in (first, second) if not m.is_compact()]
    if not growths:
        growth = -INF
    elif any(g is None for g in growths):
        growth = None
    else:
        growth = max(growths)
    return DensityMeasure(density=ConvolutionDensity(first, second), support_interval=(lo, hi),
                          decay_exponent=None if growth is None or math.isinf(growth) else growth,
                          label="convolution")


# -- bundled measures ------------------------------------------------------


def lebesgue(support=(-INF, INF)):
    return DensityMeasure(Expression("1"), support_interval=tuple(support), decay_exponent=0.0, label="lebesgue")


def dirac_comb(spacing=1.0, weight=1.0):
    return LatticeMeasure(spacing=spacing, weight=Expression(repr(float(weight)), variable="n"))


def point_mass(location=0.0, weight=1.0):
    return AtomicMeasure((float(location),), (float(weight),))


def cantor_measure():
    return SelfSimilarMeasure(ratios=(1 / 3, 1 / 3), offsets=(0.0, 2 / 3), probabilities=(0.5, 0.5))


def fbm_constant(hurst):
    if not 0 < hurst < 1:
        raise ConfigError(f"Hurst index must lie in (0, 1), got {hurst}")
    if math.isclose(hurst, 0.5):
        return 1 / math.pi
    return float(hurst * (1 - 2 * hurst) / (special.gamma(2 - 2 * hurst) * math.cos(math.pi * hurst)))


def fbm_density(hurst):
    """Spectral density c_H |u|^(1-2H) of fractional Brownian motion."""
    constant = fbm_constant(hurst)
    exponent = float(1 - 2 * hurst)
    density = Expression(f"{float(constant)!r} * abs(u) ^ {exponent!r}")
    singular = ((0.0, exponent),) if exponent < 0 else ()
    return DensityMeasure(density, decay_exponent=exponent, singularities=singular, label=f"fbm(H={hurst:g})")


def bundled_measures():
    return {
        "lebesgue": lebesgue(),
        "comb": dirac_comb(),
        "fbm_0.7": fbm_density(0.7),
        "cantor": cantor_measure(),
        "mixture": MixtureMeasure(((1.0, lebesgue((-1.0, 1.0))), (0.5, cantor_measure()), (0.25, point_mass(2.0)))),
    }


def parse_density(source):
    return parse_expression(source, variable="u")
