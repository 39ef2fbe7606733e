"""
Stationary-increment Gaussian processes driven by a spectral measure.

The covariance of X(t) is r(t, s) = integral of xi_t conj(xi_s) d sigma.
Paths are synthesised from a discretised normal field: the frequency axis
is cut into bins, every bin carries an independent Gaussian weight of
variance integral over the bin of d sigma / (1 + u^2), and the process is
the weighted sum of sqrt(1 + u_j^2) xi_t(u_j) over the bins.
"""
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import conf
from .exceptions import InconsistentGrid, InsufficientPairs, UnreachableTolerance, Unsupported
from .measure import Integrand, certify_class_C, measure_parts, moment_weight
from .qform import FormValue, l_sigma, q_sigma
from .rng import check_stream, path_generator, path_normals
from .testfn import IncrementKernel, increment_kernel

logger = logging.getLogger(__name__)

SPECTRAL_SYNTHESIS = "spectral_synthesis"
CHOLESKY = "cholesky"
RULES = ("equal_width", "equal_mass")
# paths per work unit; fixed so results do not depend on the worker count
CHUNK = 1024
COVARIANCE_TOLERANCE = 1e-8


def fingerprint(sigma):
    payload = json.dumps(sigma.to_config(), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _ones(u):
    return np.ones_like(np.asarray(u, dtype=float))


def _identity(u):
    return np.asarray(u, dtype=float)


@dataclass(frozen=True, eq=False)
class NormalFieldGrid:
    bin_edges: np.ndarray
    nodes: np.ndarray
    bin_variance: np.ndarray
    bin_mass: np.ndarray
    p: int
    truncation_mass: float
    moment: float
    rule: str
    u_max: float
    measure_fingerprint: str
    symmetrized: bool = False

    @property
    def bins(self):
        return len(self.bin_edges) - 1

    def to_config(self):
        return {"u_max": self.u_max, "bins": self.bins, "rule": self.rule, "p": self.p,
                "truncation_mass": self.truncation_mass, "moment": self.moment, "symmetrized": self.symmetrized}


def _equal_mass_edges(sigma, u_max, bins, p):
    weight = moment_weight(p)
    fine = np.linspace(-u_max, u_max, 4 * bins + 1)
    values, _ = sigma.binned(weight, fine)
    cumulative = np.concatenate([[0.0], np.cumsum(np.real(values))])
    targets = cumulative[-1] * np.arange(1, bins) / bins
    parts = measure_parts(sigma)
    smooth = not (parts.atoms or parts.lattices or parts.ifs)
    edges = [-u_max]
    for target in targets:
        i = min(max(int(np.searchsorted(cumulative, target, side="left")), 1), len(fine) - 1)
        a, b, base = fine[i - 1], fine[i], cumulative[i - 1]
        if smooth:
            edge = optimize.brentq(lambda x: base + sigma.integrate(weight, a, x).real - target, a, b, xtol=1e-13)
        else:
            span = cumulative[i] - base
            edge = a + (b - a) * ((target - base) / span if span > 0 else 0.5)
        edges.append(max(edge, edges[-1]))
    edges.append(u_max)
    return np.asarray(edges)


def build_grid(sigma, u_max, bins, rule="equal_width", p=1):
    """
    Bin variances of the normal field on [-u_max, u_max) and the mass left outside.

    Bin nodes are the sigma-mass centroids (the atom location for a bin
    holding a single atom, the midpoint for an empty bin).
    """
    if bins < 2:
        raise ValueError(f"a grid needs at least two bins, got {bins}")
    if not u_max > 0:
        raise ValueError(f"u_max must be positive, got {u_max}")
    if rule not in RULES:
        raise ValueError(f"unknown grid rule {rule!r}; expected one of {RULES}")
    moment = sigma.moment(p)
    if not math.isfinite(moment.real):
        raise UnreachableTolerance(f"the sigma-mass outside any grid is infinite for p={p}")
    if rule == "equal_width":
        edges = np.linspace(-u_max, u_max, bins + 1)
    else:
        edges = _equal_mass_edges(sigma, u_max, bins, p)
    variance, _ = sigma.binned(moment_weight(p), edges)
    variance = np.clip(np.real(variance), 0.0, None)
    mass, _ = sigma.binned(Integrand(_ones), edges)
    mass = np.clip(np.real(mass), 0.0, None)
    midpoints = (edges[:-1] + edges[1:]) / 2
    try:
        first, _ = sigma.binned(Integrand(_identity), edges, rtol=1e-8)
        with np.errstate(divide="ignore", invalid="ignore"):
            nodes = np.where(mass > 0, np.real(first) / mass, midpoints)
        nodes = np.clip(nodes, edges[:-1], edges[1:])
    except UnreachableTolerance:
        logger.warning("bin centroids unavailable to tolerance; using bin midpoints")
        nodes = midpoints
    truncation = moment.real - float(variance.sum())
    if truncation < 0:
        truncation = 0.0 if truncation > -1e-9 * moment.real else truncation
    # equal-mass bins carry equal variances by construction, so the nodes decide
    symmetric = (np.allclose(variance, variance[::-1], rtol=1e-9, atol=1e-15)
                 and np.allclose(nodes, -nodes[::-1], rtol=0.0, atol=1e-7 * u_max))
    logger.info(f"built {rule} grid: {bins} bins on [-{u_max:g}, {u_max:g}], truncation mass {truncation:.3g}")
    return NormalFieldGrid(edges, nodes, variance, mass, p, truncation, moment.real, rule, float(u_max),
                           fingerprint(sigma), symmetrized=not symmetric)


def grid_covariance(grid, t, s):
    """The covariance the grid reproduces: sum of (1+u_j^2) v_j Re(xi_t conj xi_s)(u_j)."""
    u = grid.nodes
    product = increment_kernel(t, u) * np.conj(increment_kernel(s, u))
    return float(np.sum((1 + u * u) ** grid.p * grid.bin_variance * np.real(product)))


# -- covariance ------------------------------------------------------------


def _require_order_one(sigma):
    certificate = certify_class_C(sigma)
    if not certificate.in_class:
        raise Unsupported(f"measure is not in the class: {certificate.reason}")
    if certificate.p > 1:
        raise Unsupported(f"growth order p={certificate.p}; increments need the order-one moment to be finite")
    return certificate


def pointwise_covariance(sigma, t, s, rtol=COVARIANCE_TOLERANCE):
    """r(t, s), the real covariance of X(t) and X(s)."""
    _require_order_one(sigma)
    result = sigma.increment_pairing(t, s, rtol=rtol)
    return FormValue(float(np.real(result.value)), result.error, result.method)


def _form(cache, index, psi, sigma, rtol):
    if index not in cache:
        if isinstance(psi, IncrementKernel):
            cache[index] = float(np.real(sigma.increment_pairing(psi.t, psi.t, rtol=rtol).value))
        else:
            cache[index] = q_sigma(psi, sigma, rtol).value
    return cache[index]


def gram_matrix(sigma, inputs, rtol=None):
    """G_ij = L_sigma(input_i, input_j), with increment kernels paired directly."""
    size = len(inputs)
    gram = np.zeros((size, size), dtype=complex)
    forms = {}
    for i in range(size):
        for j in range(i, size):
            first, second = inputs[i], inputs[j]
            if isinstance(first, IncrementKernel) and isinstance(second, IncrementKernel):
                value = sigma.increment_pairing(first.t, second.t, rtol=rtol).value
            elif i == j:
                value = _form(forms, i, first, sigma, rtol)
            else:
                scale = math.sqrt(_form(forms, i, first, sigma, rtol) * _form(forms, j, second, sigma, rtol))
                value = l_sigma(first, second, sigma, rtol, scale=scale).value
            gram[i, j] = value
            gram[j, i] = np.conj(value)
    for i in range(size):
        gram[i, i] = gram[i, i].real
    if not np.any(np.abs(gram.imag) > 1e-14 * max(1.0, float(np.abs(gram).max(initial=0.0)))):
        return gram.real
    return gram


# -- sampling --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    times: np.ndarray
    values: np.ndarray
    seed: int
    grid: NormalFieldGrid | None
    method: str
    measure_config: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return self.values.shape[0]

    def metadata(self):
        payload = {"seed": self.seed, "method": self.method, "paths": self.n_paths,
                   "times": [float(t) for t in self.times], "measure": self.measure_config}
        if self.grid is not None:
            payload["grid"] = self.grid.to_config()
            payload["truncation_mass"] = self.grid.truncation_mass
            payload["symmetrized"] = self.grid.symmetrized
        return payload


def _synthesis_design(grid, times):
    keep = grid.bin_variance > 0
    u = grid.nodes[keep]
    scale = np.sqrt((1 + u * u) ** grid.p * grid.bin_variance[keep])
    kernels = np.stack([increment_kernel(t, u) for t in times], axis=1) if len(times) else np.zeros((len(u), 0))
    return scale[:, None] * kernels.real, scale[:, None] * kernels.imag


def _run_chunks(job, n_paths, workers):
    starts = list(range(0, n_paths, CHUNK))
    bounds = [(start, min(start + CHUNK, n_paths)) for start in starts]
    if workers <= 1 or len(bounds) <= 1:
        blocks = [job(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda bound: job(*bound), bounds))
    return np.concatenate(blocks, axis=0) if blocks else None


def sample_paths(sigma, grid, times, n_paths, seed, method=SPECTRAL_SYNTHESIS, workers=None):
    """
    Draw ``n_paths`` realisations of X at ``times``.

    Spectral synthesis draws, per bin, independent standard normals a_j and
    b_j and returns sum of c_j (a_j Re xi_t(u_j) - b_j Im xi_t(u_j)) with
    c_j = sqrt((1 + u_j^2) v_j); its covariance is the real part of the
    grid covariance.  Path i uses its own Philox stream, so the ensemble is
    identical for any worker count.
    """
    times = np.asarray(times, dtype=float)
    workers = conf.setting("SPECTRAL_WORKERS", 1) if workers is None else workers
    check_stream(seed, n_paths)
    if grid is not None and grid.measure_fingerprint != fingerprint(sigma):
        raise InconsistentGrid("the grid was built for a different measure")
    _require_order_one(sigma)
    logger.info(f"sampling {n_paths} paths at {len(times)} times by {method}, seed {seed}, {workers} workers")

    if method == SPECTRAL_SYNTHESIS:
        if grid is None:
            raise InconsistentGrid("spectral synthesis needs a normal-field grid")
        if grid.p != 1:
            raise InconsistentGrid(f"spectral synthesis uses p=1, the grid has p={grid.p}")
        design_re, design_im = _synthesis_design(grid, times)
        cells = design_re.shape[0]

        def job(start, stop):
            draws = path_normals(seed, start, stop, (2, cells))
            return draws[:, 0, :] @ design_re - draws[:, 1, :] @ design_im
    elif method == CHOLESKY:
        covariance = covariance_matrix(sigma, times)
        eigenvalues, eigenvectors = linalg.eigh(covariance)
        factor = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))[None, :]

        def job(start, stop):
            return path_normals(seed, start, stop, (len(times),)) @ factor.T
    else:
        raise ValueError(f"unknown sampling method {method!r}")

    values = _run_chunks(job, n_paths, workers)
    if values is None:
        values = np.zeros((0, len(times)))
    values[:, times == 0] = 0.0
    return PathEnsemble(times, values, int(seed), grid, method, sigma.to_config())


def covariance_matrix(sigma, times, rtol=COVARIANCE_TOLERANCE):
    times = np.asarray(times, dtype=float)
    size = len(times)
    matrix = np.zeros((size, size))
    for i in range(size):
        for j in range(i, size):
            matrix[i, j] = matrix[j, i] = pointwise_covariance(sigma, times[i], times[j], rtol).value
    return matrix


# -- characteristic functional ---------------------------------------------


def _cos_variance(q):
    return (1 + math.exp(-2 * q)) / 2 - math.exp(-q)


def _pairing_variance(grid, psi):
    u = grid.nodes
    return float(np.sum((1 + u * u) ** grid.p * grid.bin_variance * np.abs(psi.fourier_transform(u)) ** 2))


def _default_grid(sigma, psi, bins=None):
    default = conf.setting("SPECTRAL_DEFAULT_UMAX", 200.5)
    band = psi.bandwidth
    u_max = default if band is None else min(default, max(abs(band[0]), abs(band[1])))
    return build_grid(sigma, u_max, bins or conf.setting("SPECTRAL_DEFAULT_BINS", 401))


@dataclass(frozen=True)
class CharacteristicCheck:
    estimate: complex
    target: float
    z_score: float
    q_value: float
    grid_variance: float
    n_samples: int
    seed: int

    def to_dict(self):
        return {"estimate": [self.estimate.real, self.estimate.imag], "target": self.target,
                "z_score": self.z_score, "q_value": self.q_value, "grid_variance": self.grid_variance,
                "standard_error": math.sqrt(_cos_variance(self.q_value) / self.n_samples),
                "n_samples": self.n_samples, "seed": self.seed}


def _pairing_draws(grid, psi, n_samples, seed):
    """
    Samples of Y(psi), the grid pairing of psi with the normal field.

    Every sample draws the per-bin normals a_j, b_j of the real synthesis
    and sums c_j (a_j Re psi_hat(u_j) - b_j Im psi_hat(u_j)); its variance is
    the grid sum of (1+u_j^2) v_j |psi_hat(u_j)|^2.  Block k of CHUNK
    samples uses stream k of the seed.
    """
    keep = grid.bin_variance > 0
    u = grid.nodes[keep]
    scale = np.sqrt((1 + u * u) ** grid.p * grid.bin_variance[keep])
    transform = psi.fourier_transform(u)
    weights_re, weights_im = scale * np.real(transform), scale * np.imag(transform)
    draws = np.empty(n_samples)
    for block, start in enumerate(range(0, n_samples, CHUNK)):
        stop = min(start + CHUNK, n_samples)
        normals = path_generator(seed, block).standard_normal((2, stop - start, len(u)))
        draws[start:stop] = normals[0] @ weights_re - normals[1] @ weights_im
    return _pairing_variance(grid, psi), draws


def char_functional_check(sigma, psi, n_samples, seed, grid=None):
    """Monte Carlo estimate of E exp(iY(psi)) against exp(-q_sigma(psi)/2)."""
    if not psi.real_valued:
        raise Unsupported("the characteristic functional is defined for real-valued test functions")
    check_stream(seed, 1)
    if psi.is_zero():
        return CharacteristicCheck(1 + 0j, 1.0, 0.0, 0.0, 0.0, n_samples, seed)
    q = q_sigma(psi, sigma).value
    grid = _default_grid(sigma, psi) if grid is None else grid
    variance, draws = _pairing_draws(grid, psi, n_samples, seed)
    estimate = complex(np.mean(np.exp(1j * draws)))
    target = math.exp(-q / 2)
    error = math.sqrt(_cos_variance(q) / n_samples)
    difference = estimate.real - target
    z = difference / error if error > 0 else (0.0 if difference == 0 else math.copysign(math.inf, difference))
    return CharacteristicCheck(estimate, target, z, q, variance, n_samples, seed)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    expected: float
    relative_error: float
    epsilons: tuple
    log_estimates: tuple

    def to_dict(self):
        return {"slope": self.slope, "expected": self.expected, "relative_error": self.relative_error,
                "epsilons": list(self.epsilons), "log_estimates": list(self.log_estimates)}


def char_functional_scaling(sigma, psi, epsilons, n_samples, seed, grid=None):
    """Fit log E exp(i eps Y) against eps^2; the slope should be -q_sigma(psi)/2."""
    if not psi.real_valued:
        raise Unsupported("the characteristic functional is defined for real-valued test functions")
    q = q_sigma(psi, sigma).value
    grid = _default_grid(sigma, psi) if grid is None else grid
    _, draws = _pairing_draws(grid, psi, n_samples, seed)
    epsilons = tuple(float(e) for e in epsilons)
    logs = tuple(math.log(float(np.mean(np.cos(e * draws)))) for e in epsilons)
    slope = float(np.polyfit(np.square(epsilons), logs, 1)[0])
    expected = -q / 2
    return ScalingFit(slope, expected, abs(slope - expected) / abs(expected), epsilons, logs)


def rkhs_kernel(sigma, phi, psi):
    """exp(-q_sigma(phi - psi) / 2)."""
    if not (phi.real_valued and psi.real_valued):
        raise Unsupported("the kernel is defined for real-valued test functions")
    if phi == psi:
        return 1.0
    return math.exp(-q_sigma(phi - psi, sigma).value / 2)


# -- stationarity ----------------------------------------------------------


@dataclass(frozen=True)
class StationarityReport:
    lag: float
    pairs: tuple
    variances: tuple
    standard_errors: tuple
    spread: float
    max_standard_error: float
    consistent: bool

    def to_dict(self):
        return {"lag": self.lag, "pairs": [list(p) for p in self.pairs], "variances": list(self.variances),
                "standard_errors": list(self.standard_errors), "spread": self.spread,
                "max_standard_error": self.max_standard_error, "consistent": self.consistent}


def stationarity_check(ensemble, lag, atol=1e-9):
    """
    Empirical Var(X(t) - X(s)) for every pair of ensemble times at distance ``lag``.

    Consistent when the spread of the estimates stays within four standard
    errors of a difference.
    """
    times = ensemble.times
    tolerance = atol * max(1.0, abs(lag))
    pairs = [(i, j) for i in range(len(times)) for j in range(i if lag == 0 else i + 1, len(times))
             if abs(times[j] - times[i] - lag) <= tolerance]
    if len(pairs) < 2:
        raise InsufficientPairs(f"only {len(pairs)} time pair(s) at lag {lag:g}")
    n = ensemble.n_paths
    variances, errors = [], []
    for i, j in pairs:
        difference = ensemble.values[:, j] - ensemble.values[:, i]
        variance = float(np.mean(difference ** 2))
        variances.append(variance)
        errors.append(math.sqrt(2 / n) * variance)
    spread = max(variances) - min(variances)
    largest = max(errors)
    return StationarityReport(float(lag), tuple((float(times[i]), float(times[j])) for i, j in pairs),
                              tuple(variances), tuple(errors), spread, largest,
                              spread <= 4 * math.sqrt(2) * largest)
