import json
import math

import pytest
from hypothesis import given, strategies as st

from dpeig.cli import SCAN_COLUMNS, main
from dpeig.config import KNOWN_KEYS, RunConfig, load_config, parse_config
from dpeig.errors import ConfigError

DEGENERATE = """\
# degenerate mode
domain = interval
bounds = [0, 3.141592653589793]
resolution = 200
p1 = 2
p2 = 2
q = 2
degenerate = true
restarts = 3
lambda_grid = [0.5, 1.0, 1.5, 2.5, 3.0, 4.0]
"""

DEFAULT = """\
domain = interval
bounds = [0, 1]
resolution = 60
p1 = 3.2 + 0.2*sin(3*x)
p2 = 1.5
q = 2.1
restarts = 3
modular_trials = 300
chain_trials = 40
gradient_trials = 3
lambda_grid = [5, 60]
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, command, text, *extra):
    out = tmp_path / "out"
    out.mkdir(exist_ok=True)
    code = main([command, "--config", write(tmp_path, text), "--out", str(out), *extra])
    return code, out


# -- config ---------------------------------------------------------------

def test_parse_defaults():
    cfg = parse_config("p1 = 3\np2 = 1.5\nq = 2\n")
    assert cfg.domain == "interval" and cfg.resolution == (100,) and cfg.bounds == (0.0, 1.0)
    assert cfg.solver_options().eps == 1e-10


def test_parse_rectangle_and_expressions():
    cfg = parse_config("domain = rectangle\nresolution = [5, 4]\n"
                       "p1 = 3 + 0.1*sin(x)*cos(y)  # comment\np2 = 1.5\nq = 2\n")
    mesh = cfg.build_mesh()
    assert mesh.dimension == 2 and mesh.n_elements == 40
    p1, _, _ = cfg.exponents(mesh)
    assert 3.0 <= p1.plus <= 3.1


def test_unknown_key_names_line():
    with pytest.raises(ConfigError, match=r":3: unknown key 'tolerance'"):
        parse_config("p1 = 3\np2 = 1.5\ntolerance = 1\nq = 2\n", "f.cfg")


@pytest.mark.parametrize("text, msg", [
    ("p1 = 3\np2 = 1.5\n", "missing required key 'q'"),
    ("p1 = 3\np2 = 1.5\nq = 2\np1 = 4\n", "already set on line 1"),
    ("p1 = 3\np2 = 1.5\nq = 2\nresolution = 1\n", "resolution must be >= 2"),
    ("p1 = 3\np2 = 1.5\nq = 2\nepsilon = 0\n", "epsilon must be > 0"),
    ("p1 = 3\np2 = 1.5\nq = 2\nbounds = [1, 0]\n", "increasing"),
    ("p1 = 3\np2 = 1.5\nq = 2\ndomain = disk\n", "domain must be"),
    ("p1 = 3\np2 = 1.5\nq = 2\nrestarts = 0\n", "invalid solver option"),
    ("p1 = 3\njust words\n", "expected 'key = value'"),
    ("p1 =\n", "has no value"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_hash_ignores_output_and_threads():
    a = parse_config(DEFAULT)
    assert a.hash() == a.with_overrides(threads=4, output_dir="/elsewhere").hash()
    assert a.hash() != a.with_overrides(seed=9).hash()


def test_load_config_relative_array(tmp_path):
    import numpy as np
    cfg_text = "resolution = 4\np1 = @p1.txt\np2 = 1.5\nq = 2\n"
    path = write(tmp_path, cfg_text)
    np.savetxt(tmp_path / "p1.txt", np.full(8, 2.75))
    cfg = load_config(path)
    assert cfg.exponents(cfg.build_mesh())[0].minus == 2.75


@given(st.sampled_from(sorted(KNOWN_KEYS - {"p1", "p2", "q"})),
       st.text(alphabet="abcxyz_", min_size=1, max_size=6))
def test_strict_keys_property(known, junk):
    key = known + "_" + junk
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(f"p1 = 3\np2 = 1.5\nq = 2\n{key} = 1\n")


# -- commands -------------------------------------------------------------

def test_solve_degenerate(tmp_path, capsys):
    code, out = run(tmp_path, "solve", DEGENERATE)
    assert code == 0
    est = json.loads((out / "estimates.json").read_text())
    assert est["lambda1"]["lambda_hat"] == pytest.approx(2.0, rel=0.02)
    assert est["lambda0"]["lambda_hat"] == pytest.approx(2.0, rel=0.02)
    assert est["ordering_ok"] is True
    cfg_hash = parse_config(DEGENERATE).hash()
    assert est["config_hash"] == cfg_hash
    csv_lines = (out / "minimizer.csv").read_text().splitlines()
    assert csv_lines[0] == f"# config_hash: {cfg_hash}"
    assert csv_lines[1] == "x,u_lambda1,u_lambda0" and len(csv_lines) == 203
    assert "lambda0_hat <= lambda1_hat: yes" in (out / "summary.txt").read_text()
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config_hash"] == cfg_hash and "started_unix" in meta
    assert "lambda1_hat" in capsys.readouterr().out


def test_solve_deterministic(tmp_path):
    _, out = run(tmp_path, "solve", DEFAULT, "--seed", "3")
    first = (out / "estimates.json").read_bytes()
    _, out = run(tmp_path, "solve", DEFAULT, "--seed", "3", "--threads", "2")
    assert (out / "estimates.json").read_bytes() == first


def test_solve_broken_chain(tmp_path, capsys):
    code, _ = run(tmp_path, "solve", DEFAULT.replace("q = 2.1", "q = 3.5"))
    assert code == 1
    assert "chain condition" in capsys.readouterr().err


def test_solve_missing_output_dir(tmp_path, capsys):
    code = main(["solve", "--config", write(tmp_path, DEFAULT), "--out",
                 str(tmp_path / "nope")])
    assert code == 1
    assert "does not exist" in capsys.readouterr().err


def test_solve_missing_config(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert "missing.cfg" in capsys.readouterr().err


def test_solve_not_converged_exit_code(tmp_path):
    code, _ = run(tmp_path, "solve", DEFAULT + "max_iterations = 5\ngradient_tolerance = 1e-300\n")
    assert code == 2


def test_scan_degenerate(tmp_path):
    code, out = run(tmp_path, "scan", DEGENERATE)
    assert code == 0
    lines = (out / "scan.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash: ")
    assert lines[1] == ",".join(SCAN_COLUMNS)
    assert len(lines) == 2 + 6
    s = json.loads((out / "scan.json").read_text())["summary"]
    assert s["largest_trivial_only"] < 2.0
    lo, hi = s["bracket"]
    assert lo == pytest.approx(2.0, rel=0.02) and hi == pytest.approx(2.0, rel=0.02)
    assert s["largest_trivial_only"] < lo


def test_scan_nondegenerate_summary(tmp_path):
    code, out = run(tmp_path, "scan", DEFAULT)
    assert code == 0
    s = json.loads((out / "scan.json").read_text())["summary"]
    assert s["largest_trivial_only"] == 5.0
    assert s["smallest_eigenvalue_certified"] == 60.0
    assert s["largest_trivial_only"] < s["lambda0_hat"] <= s["lambda1_hat"] < 60.0


@pytest.mark.parametrize("grid", ["[3, 2, 1]", "[]"])
def test_scan_bad_grid(tmp_path, grid):
    code, _ = run(tmp_path, "scan", DEFAULT.replace("lambda_grid = [5, 60]", f"lambda_grid = {grid}"))
    assert code == 1


def test_validate_default(tmp_path):
    code, out = run(tmp_path, "validate", DEFAULT)
    assert code == 0
    d = json.loads((out / "diagnostics.json").read_text())
    assert d["all_passed"] is True
    assert all(c["failures"] == 0 for c in d["checks"])


def test_validate_seed_changes_details_not_verdict(tmp_path):
    verdicts, blobs = set(), set()
    for seed in ("1", "2"):
        code, out = run(tmp_path, "validate", DEFAULT, "--seed", seed)
        d = json.loads((out / "diagnostics.json").read_text())
        verdicts.add((code, d["all_passed"]))
        blobs.add(json.dumps(d["checks"]))
    assert verdicts == {(0, True)}
    assert len(blobs) == 2


def test_validate_epsilon_zero(tmp_path):
    code, _ = run(tmp_path, "validate", DEFAULT + "epsilon = 0\n")
    assert code == 1


def test_json_has_no_bare_infinities(tmp_path):
    _, out = run(tmp_path, "scan", DEGENERATE)
    text = (out / "scan.json").read_text()
    assert "Infinity" not in text and "NaN" not in text
    json.loads(text)


def test_runconfig_direct_validation():
    with pytest.raises(ConfigError):
        RunConfig(p1=3, p2=1.5, q=2, threads=0)
    assert math.isclose(RunConfig(p1=3, p2=1.5, q=2, epsilon=1e-6).solver_options().eps, 1e-6)
