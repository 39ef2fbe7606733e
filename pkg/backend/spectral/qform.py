"""
The quadratic form q_sigma(psi) = integral of |psi_hat|^2 d sigma, its
sesquilinear companion, the continuity bound and closability witnesses.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import conf
from .exceptions import UnreachableTolerance
from .measure import Integrand, certify_class_C, moment_integral
from .testfn import GaussianPacket

logger = logging.getLogger(__name__)

FORM_TOLERANCE = 1e-8


@dataclass(frozen=True)
class FormValue:
    value: complex
    error_bound: float
    method: str

    def to_dict(self):
        value = complex(self.value)
        payload = {"error_bound": self.error_bound, "method": self.method}
        payload["value"] = value.real if value.imag == 0 else [value.real, value.imag]
        return payload


def _pair_integrand(first, second):
    left, right = first.fourier_transform, second.fourier_transform
    if first is second:
        func = lambda u: np.abs(left(u)) ** 2  # noqa: E731
    else:
        func = lambda u: left(u) * np.conj(right(u))  # noqa: E731
    bandwidth = first.bandwidth
    if second.bandwidth is not None:
        bandwidth = second.bandwidth if bandwidth is None else \
            (max(bandwidth[0], second.bandwidth[0]), min(bandwidth[1], second.bandwidth[1]))
    frequency = 0.0 if first is second else first.time_radius + second.time_radius
    return Integrand(func, bandwidth=bandwidth, frequency=frequency)


def _evaluate(integrand, sigma, rtol, scale=0.0):
    """
    Integrate against sigma. ``scale`` bounds the modulus of the exact value
    and sets the absolute floor, so a pairing that vanishes is still reachable.
    """
    rtol = conf.relative_tolerance() if rtol is None else rtol
    atol = max(conf.absolute_tolerance(), rtol * scale)
    result = sigma.integrate(integrand, rtol=rtol, atol=atol)
    floor = max(FORM_TOLERANCE * abs(result.value), FORM_TOLERANCE * scale, conf.absolute_tolerance())
    if result.error > floor:
        raise UnreachableTolerance(f"form value {result.value:.6g} carries error {result.error:.3g}",
                                   achieved=result.relative_error())
    return result


def q_sigma(psi, sigma, rtol=None):
    """q_sigma(psi) with its error bound."""
    if psi.is_zero():
        return FormValue(0.0, 0.0, "closed_form")
    result = _evaluate(_pair_integrand(psi, psi), sigma, rtol)
    return FormValue(max(float(np.real(result.value)), 0.0), result.error, result.method)


def l_sigma(first, second, sigma, rtol=None, scale=None):
    """
    L_sigma(psi_1, psi_2) = integral of psi_1_hat conj(psi_2_hat) d sigma.

    ``scale`` is sqrt(q(psi_1) q(psi_2)) when the caller already has both forms.
    """
    if first is second:
        q = q_sigma(first, sigma, rtol)
        return FormValue(complex(q.value), q.error_bound, q.method)
    if first.is_zero() or second.is_zero():
        return FormValue(0j, 0.0, "closed_form")
    # Cauchy-Schwarz: |L(a, b)|^2 <= q(a) q(b)
    if scale is None:
        scale = math.sqrt(q_sigma(first, sigma, rtol).value * q_sigma(second, sigma, rtol).value)
    result = _evaluate(_pair_integrand(first, second), sigma, rtol, scale)
    return FormValue(complex(result.value), result.error, result.method)


@dataclass(frozen=True)
class FrechetBound:
    bound: float
    holds: bool
    q_value: float
    p: int
    constant: float
    maximum: float

    def to_dict(self):
        return {"bound": self.bound, "holds": self.holds, "q_value": self.q_value, "p": self.p,
                "constant": self.constant, "maximum": self.maximum}


def _weighted_maximum(psi, p):
    """max over u of |psi_hat(u)|^2 (1+u^2)^p on a grid refined around the best node."""
    band = psi.bandwidth or (-1e3, 1e3)

    def weighted(u):
        u = np.asarray(u, dtype=float)
        return np.abs(psi.fourier_transform(u)) ** 2 * (1 + u * u) ** p

    grid = np.linspace(band[0], band[1], 20001)
    values = weighted(grid)
    best = int(np.argmax(values))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    refined = optimize.minimize_scalar(lambda u: -float(weighted(u)), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
    return max(float(values[best]), -float(refined.fun))


def frechet_bound(psi, sigma, p=None):
    """C max |psi_hat|^2 (1+u^2)^p with C the p-th moment of sigma."""
    if p is None:
        certificate = certify_class_C(sigma)
        if not certificate.in_class:
            raise UnreachableTolerance(f"no growth order certified: {certificate.reason}")
        p = certificate.p
    q = q_sigma(psi, sigma)
    if psi.is_zero():
        return FrechetBound(0.0, True, 0.0, p, moment_integral(sigma, p), 0.0)
    constant = moment_integral(sigma, p)
    maximum = _weighted_maximum(psi, p)
    bound = constant * maximum
    return FrechetBound(bound, q.value <= bound * (1 + 1e-9), q.value, p, constant, maximum)


# -- closability witnesses -------------------------------------------------


def witness_function(k, center=0.0):
    """The test function whose transform is exp(-k (u - center)^2)."""
    width = math.sqrt(2 * k)
    return GaussianPacket(center=0.0, width=width, frequency=center, amplitude=1 / (width * math.sqrt(2 * math.pi)))


def witness_norm(k):
    """||s_k||^2 in L2(dx)."""
    return math.sqrt(math.pi / (2 * k)) / (2 * math.pi)


@dataclass(frozen=True)
class WitnessPoint:
    k: float
    l2_norm_sq: float
    q: FormValue
    cauchy_gap: FormValue | None = None

    def to_dict(self):
        return {"k": self.k, "l2_norm_sq": self.l2_norm_sq, "q": self.q.to_dict(),
                "cauchy_gap": None if self.cauchy_gap is None else self.cauchy_gap.to_dict()}


def closability_witness(sigma, k_values, center=0.0):
    """
    Witness data along s_k: ||s_k||^2, q_sigma(s_k) and, for consecutive k,
    q_sigma(s_k - s_next).

    An atom at ``center`` keeps q_sigma(s_k) away from zero while the L2
    norm vanishes, which exhibits a non-closable form.
    """
    ks = sorted(float(k) for k in k_values)
    if any(k <= 0 for k in ks):
        raise ValueError("witness parameters must be positive")
    points = []
    for index, k in enumerate(ks):
        s_k = witness_function(k, center)
        gap = None
        if index + 1 < len(ks):
            gap = q_sigma(s_k - witness_function(ks[index + 1], center), sigma)
        points.append(WitnessPoint(k, witness_norm(k), q_sigma(s_k, sigma), gap))
        logger.debug(f"witness k={k:g}: q={points[-1].q.value:.6g}")
    return points


@dataclass(frozen=True)
class TranslationCheck:
    q_original: float
    q_shifted: float
    relative_gap: float

    def to_dict(self):
        return {"q_original": self.q_original, "q_shifted": self.q_shifted, "relative_gap": self.relative_gap}


def translation_invariance_check(psi, sigma, t):
    original = q_sigma(psi, sigma).value
    shifted = q_sigma(psi.translate(t), sigma).value
    gap = abs(shifted - original) / original if original else abs(shifted)
    return TranslationCheck(original, shifted, gap)


@dataclass(frozen=True)
class FormAxioms:
    parallelogram_gap: float
    homogeneity_gap: float
    positive: bool


def form_axioms(phi, psi, sigma, factor=2.0):
    """Relative gaps of the parallelogram law and of homogeneity, and positivity."""
    q_phi, q_psi = q_sigma(phi, sigma).value, q_sigma(psi, sigma).value
    q_sum, q_diff = q_sigma(phi + psi, sigma).value, q_sigma(phi - psi, sigma).value
    scale = q_phi + q_psi
    parallelogram = abs((q_sum + q_diff) / 2 - scale) / scale if scale else abs(q_sum + q_diff)
    scaled = q_sigma(phi.scale(factor), sigma).value
    expected = abs(factor) ** 2 * q_phi
    homogeneity = abs(scaled - expected) / expected if expected else abs(scaled)
    positive = min(q_phi, q_psi, q_sum, q_diff, scaled) >= 0
    return FormAxioms(parallelogram, homogeneity, positive)
