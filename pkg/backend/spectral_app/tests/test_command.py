import json
import tempfile
from contextlib import redirect_stdout
from io import StringIO
from pathlib import Path

from django.test import SimpleTestCase

from ..cli import parse_scalar, parse_times, run
from ..configs import load_run_config


class ParsingTests(SimpleTestCase):
    def test_pi_tokens(self):
        self.assertAlmostEqual(parse_scalar("2pi"), 6.283185307179586)
        self.assertAlmostEqual(parse_scalar("-pi/2"), -1.5707963267948966)
        self.assertEqual(parse_scalar("1.5"), 1.5)

    def test_time_grid(self):
        times = parse_times("0:2pi:5")
        self.assertEqual(len(times), 5)
        self.assertAlmostEqual(times[2], 3.141592653589793)


class CommandTests(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)
        self.comb = self.write("comb.json", {"kind": "dirac_comb"})
        self.lebesgue = self.write("lebesgue.json", {"kind": "lebesgue"})

    def tearDown(self):
        self.directory.cleanup()

    def write(self, name, payload):
        path = self.root / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)

    def call(self, *argv):
        stdout, stderr = StringIO(), StringIO()
        code = run([str(a) for a in argv], stdout=stdout, stderr=stderr)
        return code, stdout.getvalue(), stderr.getvalue()

    def simulate(self, out, workers=1):
        return self.call("simulate", "--measure", self.comb, "--times", "0:2pi:9", "--paths", 300, "--seed", 4,
                         "--workers", workers, "--out", out)

    def test_help_lists_the_subcommands(self):
        printed = StringIO()
        with redirect_stdout(printed):
            code, _, _ = self.call("--help")
        self.assertEqual(code, 0)
        stdout = printed.getvalue()
        for name in ("simulate", "covariance", "qform", "charcheck", "stationarity", "comb-verify"):
            self.assertIn(name, stdout)

    def test_missing_measure_file(self):
        code, _, stderr = self.call("covariance", "--measure", self.root / "absent.json", "--times", "1:2:2",
                                    "--out", self.root)
        self.assertEqual(code, 2)
        self.assertIn("absent.json", stderr)

    def test_malformed_config(self):
        broken = self.root / "broken.json"
        broken.write_text("{\"kind\": ", encoding="utf-8")
        code, _, stderr = self.call("covariance", "--measure", broken, "--times", "1:2:2", "--out", self.root)
        self.assertEqual(code, 2)
        self.assertIn("line 1", stderr)

    def test_simulation_is_reproducible(self):
        first, second = self.root / "first", self.root / "second"
        self.assertEqual(self.simulate(first)[0], 0)
        self.assertEqual(self.simulate(second, workers=2)[0], 0)
        self.assertEqual((first / "paths.csv").read_bytes(), (second / "paths.csv").read_bytes())
        self.assertEqual((first / "paths.json").read_bytes(), (second / "paths.json").read_bytes())

    def test_sidecar_reloads_as_a_run_config(self):
        self.simulate(self.root)
        config = load_run_config(self.root / "paths.json")
        self.assertEqual(config["seed"], 4)
        self.assertEqual(config["paths"], 300)
        self.assertEqual(len(config["times"]), 9)

    def test_stationarity_on_a_simulated_ensemble(self):
        self.simulate(self.root)
        code, stdout, _ = self.call("stationarity", "--ensemble", self.root / "paths.csv", "--lag", "pi/2",
                                    "--out", self.root)
        self.assertEqual(code, 0)
        report = json.loads(stdout)
        self.assertEqual(len(report["pairs"]), 7)
        self.assertEqual(report["seed"], 4)

    def test_covariance_matrix(self):
        code, _, _ = self.call("covariance", "--measure", self.comb, "--times", "pi/2:pi:2", "--out", self.root)
        self.assertEqual(code, 0)
        report = json.loads((self.root / "covariance.json").read_text(encoding="utf-8"))
        self.assertAlmostEqual(report["covariance"][1][1], 2 * 3.141592653589793 ** 2, delta=1e-8)
        self.assertAlmostEqual(report["covariance"][0][1], 3.141592653589793 ** 2, delta=1e-8)
        self.assertTrue((self.root / "covariance.csv").exists())

    def test_qform_with_translation(self):
        testfn = self.write("packet.json", {"form": "gaussian_packet", "width": 0.8})
        code, stdout, _ = self.call("qform", "--measure", self.lebesgue, "--testfn", testfn, "--translate", "1.5",
                                    "--out", self.root)
        self.assertEqual(code, 0)
        report = json.loads(stdout)
        self.assertTrue(report["frechet"]["holds"])
        self.assertLess(report["translation"]["relative_gap"], 1e-9)

    def test_comb_verify_passes(self):
        code, _, _ = self.call("comb-verify", "--pairs", 3, "--tol", 1e-7, "--out", self.root)
        self.assertEqual(code, 0)
        report = json.loads((self.root / "comb_verify.json").read_text(encoding="utf-8"))
        self.assertTrue(report["passed"])
        self.assertAlmostEqual(report["empirical_constant"], 0.15915494309189535, delta=1e-7)

    def test_convolving_lebesgue_with_itself_fails(self):
        code, _, stderr = self.call("convolve", "--measure", self.lebesgue, "--with", self.lebesgue,
                                    "--out", self.root)
        self.assertEqual(code, 1)
        self.assertIn("NotAMeasure", stderr)

    def test_sigmaspace_pair(self):
        a = self.write("a.json", {"f": "1", "measure": {"kind": "lebesgue", "support": [0, 1]}})
        b = self.write("b.json", {"f": "1", "measure": {"kind": "density", "density": "4", "support": [0, 1]}})
        code, stdout, _ = self.call("sigmaspace", "pair", "--a", a, "--b", b, "--out", self.root)
        self.assertEqual(code, 0)
        report = json.loads(stdout)
        self.assertAlmostEqual(report["inner_product"][0], 2.0, delta=1e-9)
        self.assertFalse(report["mutually_singular"])
