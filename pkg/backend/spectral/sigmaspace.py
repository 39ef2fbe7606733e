"""
The space of sigma-functions.

An element is a pair (f, sigma) standing for f sqrt(d sigma).  Two pairs are
compared in L2 of the common dominating measure sigma_1 + sigma_2, but the
inner product never forms that measure: it follows the pieces of the
structural Lebesgue decomposition of sigma_1 with respect to sigma_2, where
point masses meet point masses, densities meet densities and self-similar
measures meet self-similar measures with the same maps.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import conf
from .exceptions import UnreachableTolerance
from .measure import Integrand, MixtureMeasure, SpectralMeasure, lebesgue_decompose, measure_parts
from .rng import check_stream, path_generator
from .testfn import FourierSide

logger = logging.getLogger(__name__)

EQUIVALENCE_TOLERANCE = 1e-9
# samples drawn per generator in the Monte Carlo correlation
SAMPLE_CHUNK = 4096


def _table_key(x):
    return round(float(x), 12)


@dataclass(frozen=True, eq=False)
class SigmaFunction:
    """
    f sqrt(d sigma) with f a vectorised callable of frequency or an atom table.

    ``bandwidth`` and ``frequency`` are panelling hints passed to quadrature.
    """

    f: object
    sigma: SpectralMeasure
    bandwidth: tuple | None = None
    frequency: float = 0.0
    table: dict = field(default_factory=dict, init=False)

    def __post_init__(self):
        if isinstance(self.f, dict):
            object.__setattr__(self, "table", {_table_key(x): complex(v) for x, v in self.f.items()})

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if isinstance(self.f, dict):
            flat = [self.table.get(_table_key(x), 0.0) for x in u.ravel()]
            return np.asarray(flat, dtype=complex).reshape(u.shape)
        return np.asarray(self.f(u))

    @cached_property
    def norm_squared(self):
        return inner_product(self, self).real

    def norm(self):
        return math.sqrt(max(self.norm_squared, 0.0))


def _bandwidth(first, second):
    if first is None:
        return second
    if second is None:
        return first
    return (max(first[0], second[0]), min(first[1], second[1]))


def _piece_weight(piece):
    """sqrt(d sigma_b / d sigma_a) on the piece, zero where undefined."""
    derivative = piece.derivative

    def weight(u):
        ratio = np.asarray(derivative(u), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = 1.0 / np.sqrt(ratio)
        return np.where(np.isfinite(values), values, 0.0)

    return weight


def _magnitude(piece, a, b, weight, bandwidth):
    """Integral of |f_1| |f_2| on the piece, a bound on the piece's contribution."""
    integrand = Integrand(lambda u: np.abs(a(u)) * np.abs(b(u)) * weight(u), bandwidth=bandwidth)
    try:
        value = abs(piece.measure.integrate(integrand, rtol=1e-6).value)
    except UnreachableTolerance:
        return 0.0
    return value if math.isfinite(value) else 0.0


def inner_product(a, b):
    """<f_1 sqrt(d sigma_1), f_2 sqrt(d sigma_2)>, the integral of f_1 conj(f_2) sqrt(d sigma_1 d sigma_2)."""
    decomposition = lebesgue_decompose(a.sigma, b.sigma)
    bandwidth = _bandwidth(a.bandwidth, b.bandwidth)
    frequency = a.frequency + b.frequency
    total = 0j
    for piece in decomposition.pieces:
        weight = _piece_weight(piece)
        integrand = Integrand(lambda u, w=weight: a(u) * np.conj(b(u)) * w(u), bandwidth=bandwidth, frequency=frequency)
        atol = max(conf.absolute_tolerance(), conf.relative_tolerance() * _magnitude(piece, a, b, weight, bandwidth))
        result = piece.measure.integrate(integrand, atol=atol)
        total += piece.coefficient * complex(result.value)
        logger.debug(f"{piece.category} piece contributes {piece.coefficient * complex(result.value):.6g}")
    return total


def mutually_singular(first, second):
    """Structural test: neither measure has an absolutely continuous part with respect to the other."""
    if first.canonical().is_zero() or second.canonical().is_zero():
        return True
    forward = lebesgue_decompose(first, second).ac_part
    backward = lebesgue_decompose(second, first).ac_part
    return forward.is_zero() and backward.is_zero()


def _as_sigma_function(psi, sigma):
    return SigmaFunction(psi.fourier_transform, sigma, psi.bandwidth, psi.time_radius)


def process_correlation(first_sigma, f, second_sigma, g):
    """<f_hat sqrt(d sigma_1), g_hat sqrt(d sigma_2)>, the correlation of X_sigma_1(f) and X_sigma_2(g)."""
    return inner_product(_as_sigma_function(f, first_sigma), _as_sigma_function(g, second_sigma))


def equiv_check(a, b, rtol=EQUIVALENCE_TOLERANCE):
    """Whether a and b are the same element, by ||a - b||^2 against the two norms."""
    norm_a, norm_b = a.norm_squared, b.norm_squared
    gap = norm_a - 2 * inner_product(a, b).real + norm_b
    return gap <= rtol * (norm_a + norm_b)


def r_sigma(f, sigma, dominating):
    """The test function whose transform is f_hat sqrt(d sigma / d lambda), lambda the dominating measure."""
    derivative = lebesgue_decompose(sigma, dominating).rn_derivative
    transform = f.fourier_transform

    def spectrum(u):
        ratio = np.nan_to_num(np.asarray(derivative(u), dtype=float), nan=0.0)
        return transform(u) * np.sqrt(np.clip(ratio, 0.0, None))

    return FourierSide(spectrum=spectrum, band=f.bandwidth)


# -- Monte Carlo bridge ----------------------------------------------------


@dataclass(frozen=True)
class CommonCells:
    """Cells of a common normal field on sigma_1 + sigma_2 and their masses under each measure."""

    nodes: np.ndarray
    first_mass: np.ndarray
    second_mass: np.ndarray
    categories: tuple

    @property
    def size(self):
        return len(self.nodes)


def _point_cells(first, second, u_max):
    atoms = {}
    for parts in (first, second):
        measure = parts.point_measure(-u_max, u_max)
        for x in getattr(measure, "locations", ()):
            atoms[_table_key(x)] = x
    nodes = np.asarray(sorted(atoms.values()), dtype=float)
    return nodes, np.asarray([first.point_mass(x) for x in nodes]), np.asarray([second.point_mass(x) for x in nodes])


def _binned_mass(measure, edges):
    if not measure.components:
        return np.zeros(len(edges) - 1)
    values, _ = measure.binned(Integrand(lambda u: np.ones_like(np.asarray(u, dtype=float))), edges)
    return np.clip(np.real(values), 0.0, None)


def _ifs_families(first, second):
    """Self-similar components grouped by (maps, weights); each family gets its own cells."""
    families = []
    for side, parts in enumerate((first, second)):
        for coefficient, fractal in parts.ifs:
            for family in families:
                if family[0].same_maps(fractal) and family[0].same_weights(fractal):
                    family[1 + side].append((coefficient, fractal))
                    break
            else:
                families.append([fractal, [], []])
                families[-1][1 + side].append((coefficient, fractal))
    return families


def common_cells(first_sigma, second_sigma, u_max, bins):
    """
    Cells of the common field: every atom in [-u_max, u_max) is its own cell,
    and densities and each self-similar family are binned separately.
    """
    first, second = measure_parts(first_sigma), measure_parts(second_sigma)
    edges = np.linspace(-u_max, u_max, bins + 1)
    midpoints = (edges[:-1] + edges[1:]) / 2
    nodes, mass_1, mass_2 = _point_cells(first, second, u_max)
    blocks = [(nodes, mass_1, mass_2, "point")]
    if first.densities or second.densities:
        blocks.append((midpoints, _binned_mass(first.density_measure(), edges),
                       _binned_mass(second.density_measure(), edges), "density"))
    for _, left, right in _ifs_families(first, second):
        blocks.append((midpoints, _binned_mass(MixtureMeasure(tuple(left)), edges),
                       _binned_mass(MixtureMeasure(tuple(right)), edges), "ifs"))
    keep = [(n, m1, m2, c) for n, m1, m2, c in blocks if len(n)]
    return CommonCells(np.concatenate([k[0] for k in keep]), np.concatenate([k[1] for k in keep]),
                       np.concatenate([k[2] for k in keep]), tuple(c for k in keep for c in [k[3]] * len(k[0])))


@dataclass(frozen=True)
class CorrelationEstimate:
    estimate: complex
    standard_error: float
    grid_value: complex
    exact: complex
    z_score: float
    n_samples: int
    seed: int

    def to_dict(self):
        return {"estimate": [self.estimate.real, self.estimate.imag], "standard_error": self.standard_error,
                "grid_value": [self.grid_value.real, self.grid_value.imag],
                "exact": [self.exact.real, self.exact.imag], "z_score": self.z_score,
                "n_samples": self.n_samples, "seed": self.seed}


def correlation_monte_carlo(first_sigma, f, second_sigma, g, n_samples, seed, u_max=40.0, bins=801):
    """
    Monte Carlo correlation of X_sigma_1(f) and X_sigma_2(g) driven by one normal field.

    Cell j carries a standard complex Gaussian Z_j; the process built on
    sigma_k weighs it by sqrt(sigma_k(A_j)), so cells charged by only one of
    the measures never correlate.
    """
    check_stream(seed, 1)
    cells = common_cells(first_sigma, second_sigma, u_max, bins)
    left = f.fourier_transform(cells.nodes) * np.sqrt(cells.first_mass)
    right = g.fourier_transform(cells.nodes) * np.sqrt(cells.second_mass)
    grid_value = complex(np.sum(left * np.conj(right)))
    exact = process_correlation(first_sigma, f, second_sigma, g)

    total, total_sq, drawn, chunk = 0j, 0.0, 0, 0
    while drawn < n_samples:
        size = min(SAMPLE_CHUNK, n_samples - drawn)
        draws = path_generator(seed, chunk).standard_normal((2, size, cells.size))
        z = (draws[0] + 1j * draws[1]) / math.sqrt(2)
        products = (z @ left) * np.conj(z @ right)
        total += complex(products.sum())
        total_sq += float(np.sum(products.real ** 2))
        drawn += size
        chunk += 1
    estimate = total / n_samples
    variance = max(total_sq / n_samples - estimate.real ** 2, 0.0)
    error = math.sqrt(variance / n_samples)
    difference = estimate.real - exact.real
    z_score = difference / error if error > 0 else 0.0
    logger.info(f"common-field correlation over {cells.size} cells: {estimate:.6g} against {exact:.6g}")
    return CorrelationEstimate(estimate, error, grid_value, exact, z_score, n_samples, seed)
