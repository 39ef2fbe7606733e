"""
``python manage.py spectral <subcommand>``: simulate paths, evaluate forms and
covariances, run conformance checks and write CSV/JSON artifacts.
"""
import logging
import math
from pathlib import Path

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from spectral import conf
from spectral.exceptions import ConfigError, SpectralError
from spectral.gproc import (CHOLESKY, SPECTRAL_SYNTHESIS, build_grid, char_functional_check, char_functional_scaling,
                            pointwise_covariance, sample_paths, stationarity_check)
from spectral.measure import certify_class_C, convolve, dirac_comb
from spectral.qform import closability_witness, frechet_bound, q_sigma, translation_invariance_check
from spectral.rng import path_generator
from spectral.sigmaspace import equiv_check, inner_product, mutually_singular
from spectral.testfn import GaussianPacket, poisson_pairing

from ...cli import parse_scalar, parse_times
from ...configs import load_measure, load_sigma_function, load_test_function
from ...reports import dumps, read_ensemble, write_ensemble, write_json, write_matrix, write_table

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("simulate", "covariance", "qform", "witness", "charcheck", "stationarity", "sigmaspace",
               "comb-verify", "convolve")


class VerificationFailed(SpectralError):
    """A *-verify suite found an identity violated beyond tolerance."""


class Command(BaseCommand):
    help = ("Spectral measures and the stationary-increment Gaussian processes they drive. "
            f"Subcommands: {', '.join(SUBCOMMANDS)}.")

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True, title="subcommands")

        simulate = subparsers.add_parser("simulate", help="sample paths by spectral synthesis or Cholesky")
        self._measure_arguments(simulate)
        self._time_arguments(simulate)
        simulate.add_argument("--paths", type=int, default=1000)
        simulate.add_argument("--seed", type=int, default=0)
        simulate.add_argument("--method", choices=(SPECTRAL_SYNTHESIS, CHOLESKY), default=SPECTRAL_SYNTHESIS)
        simulate.add_argument("--rule", choices=("equal_width", "equal_mass"),
                              default=conf.setting("SPECTRAL_DEFAULT_RULE", "equal_width"))
        simulate.add_argument("--workers", type=int, default=None)
        simulate.add_argument("--name", default="paths", help="artifact file stem")
        self._grid_arguments(simulate)
        self._out_argument(simulate)

        covariance = subparsers.add_parser("covariance", help="pointwise covariance matrix r(t, s)")
        self._measure_arguments(covariance)
        self._time_arguments(covariance)
        self._tol_argument(covariance)
        self._out_argument(covariance)

        qform = subparsers.add_parser("qform", help="q_sigma of a test function with its continuity bound")
        self._measure_arguments(qform)
        qform.add_argument("--testfn", required=True, type=Path)
        qform.add_argument("--translate", default=None, help="also compare with the translate by this time")
        self._tol_argument(qform)
        self._out_argument(qform)

        witness = subparsers.add_parser("witness", help="closability witness sequence s_k")
        self._measure_arguments(witness)
        witness.add_argument("--k", type=float, nargs="+", default=[1.0, 10.0, 100.0, 1e3, 1e4])
        witness.add_argument("--center", default="0")
        self._out_argument(witness)

        charcheck = subparsers.add_parser("charcheck", help="Monte Carlo check of the characteristic functional")
        self._measure_arguments(charcheck)
        charcheck.add_argument("--testfn", required=True, type=Path)
        charcheck.add_argument("--paths", "--samples", dest="paths", type=int, default=100000)
        charcheck.add_argument("--seed", type=int, default=0)
        charcheck.add_argument("--epsilons", type=float, nargs="*", default=None,
                               help="also fit the scaling slope over these factors")
        self._grid_arguments(charcheck)
        self._out_argument(charcheck)

        stationarity = subparsers.add_parser("stationarity", help="increment variances of a simulated ensemble")
        stationarity.add_argument("--ensemble", required=True, type=Path, help="CSV written by simulate")
        stationarity.add_argument("--lag", required=True)
        self._out_argument(stationarity)

        sigmaspace = subparsers.add_parser("sigmaspace", help="sigma-function pairings")
        actions = sigmaspace.add_subparsers(dest="action", required=True)
        pair = actions.add_parser("pair", help="inner product, singularity and equivalence of two sigma-functions")
        pair.add_argument("--a", required=True, type=Path)
        pair.add_argument("--b", required=True, type=Path)
        self._out_argument(pair)

        verify = subparsers.add_parser("comb-verify", help="Poisson pairing and Dirac comb identities")
        verify.add_argument("--pairs", type=int, default=20)
        verify.add_argument("--seed", type=int, default=0)
        verify.add_argument("--tol", type=float, default=1e-8)
        self._out_argument(verify)

        convolution = subparsers.add_parser("convolve", help="convolve two measures and certify the result")
        self._measure_arguments(convolution)
        convolution.add_argument("--with", dest="other", required=True, type=Path)
        self._out_argument(convolution)

    @staticmethod
    def _measure_arguments(parser):
        parser.add_argument("--measure", required=True, type=Path, help="measure JSON config")

    @staticmethod
    def _time_arguments(parser):
        parser.add_argument("--times", required=True, help="START:END:COUNT; 'pi' is accepted, e.g. 0:2pi:64")

    @staticmethod
    def _grid_arguments(parser):
        parser.add_argument("--bins", type=int, default=conf.setting("SPECTRAL_DEFAULT_BINS", 401))
        parser.add_argument("--umax", type=float, default=conf.setting("SPECTRAL_DEFAULT_UMAX", 200.5))

    @staticmethod
    def _tol_argument(parser):
        parser.add_argument("--tol", type=float, default=None, help="relative tolerance")

    @staticmethod
    def _out_argument(parser):
        parser.add_argument("--out", type=Path, default=None, help="artifact directory")

    # -- dispatch --------------------------------------------------------

    def handle(self, *args, **options):
        if options["verbosity"] >= 3:
            logging.getLogger("spectral").setLevel(logging.DEBUG)
            logging.getLogger("spectral_app").setLevel(logging.DEBUG)
        options["out"] = Path(options.get("out") or conf.setting("SPECTRAL_OUTPUT_DIR", "artifacts"))
        handler = getattr(self, "handle_" + options["subcommand"].replace("-", "_"))
        try:
            report = handler(options)
        except VerificationFailed as exc:
            raise CommandError(str(exc), returncode=3)
        except (ConfigError, OSError, ValueError) as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=2)
        except SpectralError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=1)
        self.stdout.write(dumps(report), ending="")

    # -- subcommands -----------------------------------------------------

    def handle_simulate(self, options):
        sigma = load_measure(options["measure"])
        times = parse_times(options["times"])
        grid = None
        if options["method"] == SPECTRAL_SYNTHESIS:
            grid = build_grid(sigma, options["umax"], options["bins"], options["rule"])
        ensemble = sample_paths(sigma, grid, times, options["paths"], options["seed"], options["method"],
                                options["workers"])
        csv_path, json_path = write_ensemble(ensemble, options["out"], options["name"])
        self.stdout.write(self.style.SUCCESS(f"{ensemble.n_paths} paths written to {csv_path}"))
        return {"csv": str(csv_path), "sidecar": str(json_path), **ensemble.metadata()}

    def handle_covariance(self, options):
        sigma = load_measure(options["measure"])
        times = parse_times(options["times"])
        size = len(times)
        values, errors = np.zeros((size, size)), np.zeros((size, size))
        for i in range(size):
            for j in range(i, size):
                result = pointwise_covariance(sigma, times[i], times[j], options["tol"] or 1e-8)
                values[i, j] = values[j, i] = result.value
                errors[i, j] = errors[j, i] = result.error_bound
        write_matrix(values, times, options["out"] / "covariance.csv")
        report = {"times": times, "covariance": values, "error_bounds": errors, "measure": sigma.to_config(),
                  "certificate": certify_class_C(sigma).to_dict()}
        write_json(report, options["out"] / "covariance.json")
        return report

    def handle_qform(self, options):
        sigma = load_measure(options["measure"])
        psi = load_test_function(options["testfn"])
        report = {"q": q_sigma(psi, sigma, options["tol"]).to_dict(),
                  "certificate": certify_class_C(sigma).to_dict(),
                  "testfn": psi.to_config()}
        if report["certificate"]["in_class"]:
            report["frechet"] = frechet_bound(psi, sigma).to_dict()
        if options["translate"] is not None:
            report["translation"] = translation_invariance_check(psi, sigma, parse_scalar(options["translate"])).to_dict()
        write_json(report, options["out"] / "qform.json")
        return report

    def handle_witness(self, options):
        sigma = load_measure(options["measure"])
        points = closability_witness(sigma, options["k"], parse_scalar(options["center"]))
        rows = [{"k": p.k, "l2_norm_sq": p.l2_norm_sq, "q": p.q.value, "q_error": p.q.error_bound,
                 "cauchy_gap": math.nan if p.cauchy_gap is None else p.cauchy_gap.value} for p in points]
        write_table(rows, options["out"] / "witness.csv")
        report = {"points": [p.to_dict() for p in points], "measure": sigma.to_config()}
        write_json(report, options["out"] / "witness.json")
        return report

    def handle_charcheck(self, options):
        sigma = load_measure(options["measure"])
        psi = load_test_function(options["testfn"])
        band = psi.bandwidth
        u_max = options["umax"] if band is None else min(options["umax"], max(abs(band[0]), abs(band[1])))
        grid = build_grid(sigma, u_max, options["bins"])
        check = char_functional_check(sigma, psi, options["paths"], options["seed"], grid=grid)
        report = check.to_dict()
        if options["epsilons"]:
            report["scaling"] = char_functional_scaling(sigma, psi, options["epsilons"], options["paths"],
                                                        options["seed"], grid=grid).to_dict()
        write_json(report, options["out"] / "charcheck.json")
        return report

    def handle_stationarity(self, options):
        ensemble = read_ensemble(options["ensemble"])
        report = stationarity_check(ensemble, parse_scalar(options["lag"])).to_dict()
        report["seed"] = ensemble.seed
        write_json(report, options["out"] / "stationarity.json")
        return report

    def handle_sigmaspace(self, options):
        a = load_sigma_function(options["a"])
        b = load_sigma_function(options["b"])
        report = {"inner_product": inner_product(a, b), "mutually_singular": mutually_singular(a.sigma, b.sigma),
                  "equiv": equiv_check(a, b)}
        write_json(report, options["out"] / "sigmaspace.json")
        return report

    def handle_comb_verify(self, options):
        report = comb_identities(options["pairs"], options["seed"], options["tol"])
        write_json(report, options["out"] / "comb_verify.json")
        if not report["passed"]:
            raise VerificationFailed(f"comb identities violated beyond {options['tol']:g}; "
                                     f"see {options['out'] / 'comb_verify.json'}")
        self.stdout.write(self.style.SUCCESS("comb identities hold"))
        return report

    def handle_convolve(self, options):
        result = convolve(load_measure(options["measure"]), load_measure(options["other"]))
        report = {"measure": result.to_config(), "certificate": certify_class_C(result).to_dict()}
        write_json(report, options["out"] / "convolve.json")
        return report


def comb_identities(pairs, seed, tol):
    """Poisson pairings of random packets, the comb variance law and the comb form value."""
    generator = path_generator(seed, 0)
    pairings = []
    for _ in range(pairs):
        first, second = (GaussianPacket(center=generator.uniform(-2, 2), width=generator.uniform(0.5, 2),
                                        frequency=generator.uniform(-1, 1)) for _ in range(2))
        pairing = poisson_pairing(first, second)
        pairings.append({"psi": first.to_config(), "phi": second.to_config(), **pairing.to_dict()})

    comb = dirac_comb()
    variances = []
    for t in (math.pi / 4, math.pi / 2, math.pi, 3 * math.pi / 2):
        value = pointwise_covariance(comb, t, t, rtol=tol * 1e-2).value
        expected = 2 * math.pi * t
        variances.append({"t": t, "value": value, "expected": expected, "relative_gap": abs(value - expected) / expected})

    gaussian = GaussianPacket()
    q = q_sigma(gaussian, comb, tol * 1e-2).value
    n = np.arange(-50, 51)
    expected_q = 2 * math.pi * float(np.sum(np.exp(-(n * n))))
    form = {"value": q, "expected": expected_q, "relative_gap": abs(q - expected_q) / expected_q}

    gaps = [p["relative_gap"] for p in pairings] + [v["relative_gap"] for v in variances] + [form["relative_gap"]]
    constants = [p["constant"] for p in pairings if math.isfinite(p["constant"])]
    return {"seed": seed, "tolerance": tol, "pairings": pairings, "variances": variances, "form": form,
            "empirical_constant": float(np.mean(constants)) if constants else math.nan,
            "max_relative_gap": max(gaps), "passed": max(gaps) <= tol}
