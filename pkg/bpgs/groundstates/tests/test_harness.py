import io
import json
import math
import pathlib
import tempfile

from django.core.management import call_command
from django.core.management.base import OutputWrapper
from django.test import SimpleTestCase, override_settings

from bpgs.groundstates import formats
from bpgs.groundstates.asymptotics import CSV_HEADER
from bpgs.groundstates.errors import UsageError
from bpgs.groundstates.harness import error_line, parse_config, run
from bpgs.groundstates.solver import InitKind

SMALL = ["--rmax=20", "--n=512"]


def record(beta: float, **overrides) -> dict[str, float]:
    values = {
        "beta": beta,
        "m_beta": 10.0 - beta,
        "t_beta": 1.0 + beta / 10.0,
        "tbar_beta": 1.0 - beta / 10.0,
        "h1_dist": beta / 10.0,
        "i0_projected": 10.0 + beta,
        "lemma34_lhs": beta**2,
        "lemma34_rhs": 20.0 * math.pi * beta**2,
        "h1_bound_slack": 1.0,
        "upper_bound": 10.0,
    }
    values.update(overrides)
    return values


class OutputTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = pathlib.Path(self.tmp.name)
        self.stdout = io.StringIO()
        self.stderr = io.StringIO()

    def tearDown(self):
        self.tmp.cleanup()

    def run_args(self, *args: str, file: pathlib.Path | None = None) -> int:
        config = parse_config([*args, f"--out={self.out}"], file=file)
        return run(config, OutputWrapper(self.stdout), OutputWrapper(self.stderr))


class ParseConfigTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = pathlib.Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def config_file(self, text: str) -> pathlib.Path:
        path = self.dir / "run.conf"
        path.write_text(text, encoding="utf-8")
        return path

    def test_defaults(self):
        config = parse_config(["solve"])
        self.assertEqual((config.params.p, config.params.beta), (4.0, 0.0))
        self.assertEqual((config.grid.r_max, config.grid.n), (40.0, 4096))
        self.assertEqual(config.betas, (1.0, 0.5, 0.25, 0.1, 0.05, 0.025))
        self.assertEqual(config.options.tol_el, 1e-8)
        self.assertEqual(config.options.tol_np, 1e-10)
        self.assertEqual(config.options.max_iters, 20000)
        self.assertIs(config.options.init, InitKind.GAUSSIAN)
        self.assertTrue(config.warm_start)
        self.assertTrue(config.wants("solution-text"))

    @override_settings(BPGS_OUT_DIR=pathlib.Path("/tmp/bpgs-default-out"))
    def test_default_out_dir(self):
        self.assertEqual(parse_config(["solve"]).out_dir, pathlib.Path("/tmp/bpgs-default-out"))

    def test_precedence(self):
        path = self.config_file("# run\np = 5\nbeta = 0.2\nsolver.tol_el = 1e-9  # tighter\n")
        config = parse_config(["solve", "--beta=0.3"], file=path)
        self.assertEqual(config.params.p, 5.0)
        self.assertEqual(config.params.beta, 0.3)
        self.assertEqual(config.options.tol_el, 1e-9)

    def test_config_flag_wins_over_file_argument(self):
        named = self.config_file("p = 5\n")
        other = self.dir / "other.conf"
        other.write_text("p = 4.5\n", encoding="utf-8")
        self.assertEqual(parse_config(["solve", f"--config={named}"], file=other).params.p, 5.0)

    def test_flags(self):
        config = parse_config(
            [
                "sweep",
                "--p=4.5",
                "--betas=0.5,0.1",
                "--rmax=30",
                "--n=1024",
                "--format=csv,json",
                "--seed=3",
                "--warm-start=false",
                "--workers=2",
                "--step0=1e-2",
                "--max-iters=50",
                "--phase-a-iters=20",
            ]
        )
        self.assertEqual(config.betas, (0.5, 0.1))
        self.assertEqual((config.grid.r_max, config.grid.n), (30.0, 1024))
        self.assertEqual(config.formats, frozenset({"csv", "json"}))
        self.assertFalse(config.wants("plot-data"))
        self.assertEqual(config.options.seed, 3)
        self.assertFalse(config.warm_start)
        self.assertEqual(config.workers, 2)
        self.assertEqual(config.options.step0, 1e-2)
        self.assertEqual(config.options.max_iters, 50)
        self.assertEqual(config.options.phase_a_iters, 20)

    def test_bare_warm_start(self):
        path = self.config_file("warm_start = no\n")
        self.assertFalse(parse_config(["sweep"], file=path).warm_start)
        self.assertTrue(parse_config(["sweep", "--warm-start"], file=path).warm_start)

    def test_init_file(self):
        config = parse_config(["solve", "--init-file=/data/v0.txt"])
        self.assertIs(config.options.init, InitKind.FILE)
        self.assertEqual(config.options.path, pathlib.Path("/data/v0.txt"))

    def test_usage_errors_name_the_key(self):
        cases = [
            (["solve", "--p=7"], "p:"),
            (["solve", "--p=four"], "p:"),
            (["solve", "--beta=-1"], "beta:"),
            (["solve", "--n=2"], "grid:"),
            (["solve", "--rmax=0"], "grid:"),
            (["sweep", "--betas=0.1,0.5"], "betas:"),
            (["sweep", "--betas=0.5,zero"], "betas:"),
            (["solve", "--tol-el=0"], "solver:"),
            (["solve", "--format=csv,xml"], "format:"),
            (["solve", "--warm-start=maybe"], "warm_start:"),
            (["solve", "--workers=0"], "workers"),
        ]
        for args, needle in cases:
            with self.subTest(args=args):
                with self.assertRaises(UsageError) as ctx:
                    parse_config(args)
                self.assertIn(needle, str(ctx.exception))
                self.assertEqual(ctx.exception.returncode, 2)

    def test_bad_command_line(self):
        for args in (["solve", "--bogus=1"], ["fly"], []):
            with self.subTest(args=args), self.assertRaises(UsageError):
                parse_config(args)

    def test_bad_config_file(self):
        with self.assertRaisesMessage(UsageError, "unknown key 'grid.m'"):
            parse_config(["solve"], file=self.config_file("grid.m = 3\n"))
        with self.assertRaisesMessage(UsageError, "line 2"):
            parse_config(["solve"], file=self.config_file("p = 4\nbeta 0.1\n"))
        with self.assertRaisesMessage(UsageError, "cannot read"):
            parse_config(["solve"], file=self.dir / "missing.conf")

    def test_error_line(self):
        self.assertEqual(error_line("usage", "p: bad\n value"), "ERROR usage p: bad value")


class SolveRunTestCase(OutputTestCase):
    def test_solve(self):
        code = self.run_args("solve", "--beta=0.5", *SMALL)
        self.assertEqual(code, 0, self.stderr.getvalue())
        self.assertEqual(self.stderr.getvalue(), "")
        v, params = formats.read_solution(self.out / formats.SOLUTION_FILE)
        self.assertEqual((params.p, params.beta), (4.0, 0.5))
        self.assertEqual(v.grid.n, 512)
        phi, _ = formats.read_solution(self.out / formats.PHI_FILE)
        self.assertGreater(phi.values[0], 0.0)
        report = formats.read_json(self.out / formats.REPORT_FILE)
        self.assertLessEqual(report["el_l2"], 1e-8)
        self.assertTrue(report["converged"])
        self.assertIn(f"m={report['m']!r}", self.stdout.getvalue())
        self.assertFalse((self.out / "concentration.txt").exists())

    def test_deterministic(self):
        self.assertEqual(self.run_args("solve", *SMALL), 0)
        first = (self.out / formats.SOLUTION_FILE).read_bytes()
        self.assertTrue((self.out / "concentration.txt").exists())
        self.assertEqual(self.run_args("solve", *SMALL), 0)
        self.assertEqual((self.out / formats.SOLUTION_FILE).read_bytes(), first)

    def test_format_subset(self):
        self.assertEqual(self.run_args("solve", "--format=json", *SMALL), 0)
        self.assertEqual(sorted(p.name for p in self.out.iterdir()), [formats.REPORT_FILE])

    def test_no_convergence(self):
        code = self.run_args("solve", "--beta=0.5", "--max-iters=3", *SMALL)
        self.assertEqual(code, 1)
        self.assertTrue(self.stderr.getvalue().startswith("ERROR no-convergence "))
        self.assertEqual(self.stderr.getvalue().count("\n"), 1)
        report = formats.read_json(self.out / formats.REPORT_FILE)
        self.assertFalse(report["converged"])
        self.assertTrue((self.out / formats.SOLUTION_FILE).exists())

    def test_unwritable_output(self):
        blocker = self.out / "blocker"
        blocker.write_text("")
        config = parse_config(["solve", *SMALL, f"--out={blocker / 'run'}"])
        code = run(config, OutputWrapper(self.stdout), OutputWrapper(self.stderr))
        self.assertEqual(code, 1)
        self.assertTrue(self.stderr.getvalue().startswith("ERROR io-error "))
        self.assertEqual(self.stderr.getvalue().count("\n"), 1)

    def test_missing_init_file(self):
        code = self.run_args("solve", f"--init-file={self.out / 'missing.txt'}", *SMALL)
        self.assertEqual(code, 2)
        self.assertTrue(self.stderr.getvalue().startswith("ERROR invalid-argument "))


class SweepRunTestCase(OutputTestCase):
    def test_failure_keeps_partial_csv(self):
        code = self.run_args("sweep", "--betas=0.5,0.25", "--max-iters=3", *SMALL)
        self.assertEqual(code, 1)
        self.assertIn("ERROR no-convergence", self.stderr.getvalue())
        self.assertEqual(formats.read_csv(self.out / formats.SWEEP_CSV, CSV_HEADER), [])
        self.assertEqual(formats.read_json(self.out / formats.SWEEP_JSON)["records"], [])


    def test_deterministic(self):
        args = ("sweep", "--betas=0.5,0.25", *SMALL)
        names = (formats.SWEEP_CSV, formats.SWEEP_JSON, formats.CONVERGENCE_JSON)
        code = self.run_args(*args)
        first = {name: (self.out / name).read_bytes() for name in names}
        self.assertEqual(self.run_args(*args), code)
        for name in names:
            with self.subTest(name):
                self.assertEqual((self.out / name).read_bytes(), first[name])


class ReportRunTestCase(OutputTestCase):
    def write_sweep(self, records: list[dict[str, float]]) -> None:
        payload = {"reference": {"p": 4.0, "m_0": 10.0, "h1": 5.0}, "records": records}
        formats.write_json(self.out / formats.SWEEP_JSON, payload)

    def test_empty_directory(self):
        self.assertEqual(self.run_args("report"), 1)
        self.assertTrue(self.stderr.getvalue().startswith("ERROR check-failed no records"))

    def test_passing_records(self):
        self.write_sweep([record(beta) for beta in (0.1, 0.05, 0.01)])
        self.assertEqual(self.run_args("report"), 0, self.stderr.getvalue())
        summary = formats.read_json(self.out / formats.CONVERGENCE_JSON)
        self.assertTrue(summary["passed"])
        self.assertEqual(summary["trends"]["tbar_beta"], "increasing")
        self.assertIn("PASS", self.stdout.getvalue())

    def test_corrupt_record(self):
        records = [record(beta) for beta in (0.1, 0.05, 0.01)]
        records[1]["t_beta"] = 0.98
        self.write_sweep(records)
        self.assertEqual(self.run_args("report"), 1)
        self.assertIn("pointwise beta=0.05", self.stderr.getvalue())
        self.assertFalse(formats.read_json(self.out / formats.CONVERGENCE_JSON)["passed"])

    def test_malformed_summary(self):
        (self.out / formats.SWEEP_JSON).write_text("{not json", encoding="utf-8")
        self.assertEqual(self.run_args("report"), 2)
        self.write_sweep([{"beta": 0.1}])
        self.assertEqual(self.run_args("report"), 2)


class ManagementCommandTestCase(SimpleTestCase):
    def test_usage_exit_status(self):
        stderr = io.StringIO()
        with self.assertRaises(SystemExit) as ctx:
            call_command("solve", "--p=7", stdout=io.StringIO(), stderr=stderr)
        self.assertEqual(ctx.exception.code, 2)
        self.assertTrue(stderr.getvalue().startswith("ERROR usage p:"))

    def test_failure_exit_status(self):
        with tempfile.TemporaryDirectory() as tmp:
            stderr = io.StringIO()
            with self.assertRaises(SystemExit) as ctx:
                call_command("report", out=tmp, stdout=io.StringIO(), stderr=stderr)
        self.assertEqual(ctx.exception.code, 1)
        self.assertIn("ERROR check-failed", stderr.getvalue())

    def test_success(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = pathlib.Path(tmp)
            payload = {
                "reference": {"p": 4.0, "m_0": 10.0, "h1": 5.0},
                "records": [record(0.1), record(0.05)],
            }
            (out / formats.SWEEP_JSON).write_text(json.dumps(payload), encoding="utf-8")
            stdout = io.StringIO()
            call_command("report", out=tmp, stdout=stdout, stderr=io.StringIO())
        self.assertIn("final energy gap", stdout.getvalue())
