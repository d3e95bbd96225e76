import json

import pytest

from conftest import SMALL
from seqsubsidy import cli
from seqsubsidy.report import SCHEMAS, read_csv
from seqsubsidy.subsidy import ConvexityError


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL.to_dict()))
    return path


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _header(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    manifest = json.loads(lines[0][len("# manifest: "):])
    return lines[1].split(","), manifest


GOLDEN_HEADERS = {
    "vertices": "epsilon,social_utility,agent_value,policy_id",
    "curve": "epsilon,interval,policy_id,social_utility,agent_value,p_approve,p_optout",
    "simulate": "statistic,mean,ci_low,ci_high",
    "sweep": "param,value,metric,estimate,ci_low,ci_high",
    "policy": "l,total_n,total_x,action,v_zero,a_cost,p_approve,p_optout,absorbing",
    "region": "alpha,beta,exponential,uniform_mixture",
}


def test_schemas_pinned():
    assert {k: ",".join(v) for k, v in SCHEMAS.items()} == GOLDEN_HEADERS


def test_every_command_writes_headers_and_manifest(tmp_path, small_config):
    cases = [
        (["solve", small_config, "--epsilon", "0.2", "--dump-policy"], "policy.csv", "policy"),
        (["optimize", small_config], "vertices.csv", "vertices"),
        (["simulate", small_config, "--use-optimal", "--rollouts", "2000", "--resamples", "50"],
         "summary.csv", "simulate"),
        (["sweep", small_config, "--param", "rho_social", "--values", "1000", "5000"], "sweep.csv", "sweep"),
        (["region", small_config, "--alpha-span", "20", "--beta-span", "20"], "region.csv", "region"),
    ]
    for i, (argv, name, schema) in enumerate(cases):
        out = tmp_path / f"run{i}"
        assert _run(*argv, "--out", out) == 0
        header, manifest = _header(out / name)
        assert header == list(SCHEMAS[schema])
        assert manifest["command"] == argv[0]
        assert manifest["config_hash"] == SMALL.config_hash()
        full = json.loads((out / "manifest.json").read_text())
        assert full["wall_clock_s"] >= 0 and full["schema_version"] == 1


def test_outputs_byte_identical_across_runs(tmp_path, small_config):
    for cmd, files in (
        (["optimize", small_config], ("vertices.csv", "solution.json")),
        (["simulate", small_config, "--epsilon", "0.3", "--rollouts", "3000", "--resamples", "100",
          "--seed", "9"], ("summary.csv", "simulate.json")),
        (["sweep", small_config, "--param", "cost_fixed", "--values", "40", "60"], ("sweep.csv",)),
    ):
        a, b = tmp_path / "a", tmp_path / "b"
        assert _run(*cmd, "--out", a) == 0
        assert _run(*cmd, "--out", b) == 0
        for name in files:
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_single_value_sweep_matches_optimize(tmp_path, small_config):
    assert _run("optimize", small_config, "--out", tmp_path / "o") == 0
    assert _run("sweep", small_config, "--param", "rho_social", "--values", str(SMALL.rho_social),
                "--out", tmp_path / "s") == 0
    solution = json.loads((tmp_path / "o" / "solution.json").read_text())
    rows = {r["metric"]: r for r in read_csv(tmp_path / "s" / "sweep.csv")}
    assert float(rows["eps_star"]["estimate"]) == solution["eps_star"]
    assert int(float(rows["n_intervals"]["estimate"])) == solution["n_intervals"]


def test_overrides_reach_the_config(tmp_path, small_config):
    assert _run("solve", small_config, "--epsilon", "0.1", "--set", "cost_fixed=30.0",
                "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["overrides"] == ["cost_fixed=30.0"]
    assert manifest["config_hash"] == SMALL.replace(cost_fixed=30.0).config_hash()
    assert summary["epsilon"] == 0.1


def test_mixture_outputs_carry_conjecture_note(tmp_path, small_config):
    assert _run("solve", small_config, "--epsilon", "0.1", "--set", "test_process_kind=uniform-mixture",
                "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert any("conjectured" in note for note in summary["notes"])


@pytest.mark.parametrize("argv", [
    ["solve", "{cfg}", "--epsilon", "1.5"],
    ["solve", "{cfg}", "--epsilon", "0.1", "--set", "no_such_key=1"],
    ["solve", "{cfg}", "--epsilon", "0.1", "--set", "kappa=2"],
    ["solve", "{missing}", "--epsilon", "0.1"],
    ["sweep", "{cfg}", "--param", "no_such_param", "--values", "1"],
    ["simulate", "{cfg}", "--epsilon", "0.1", "--rollouts", "0"],
])
def test_config_errors_exit_2(tmp_path, small_config, argv):
    argv = [a.format(cfg=small_config, missing=tmp_path / "nope.json") for a in argv]
    assert _run(*argv, "--out", tmp_path / "o") == 2


def test_state_cap_exits_3(tmp_path, small_config):
    assert _run("solve", small_config, "--epsilon", "0.1", "--state-cap", "100", "--out", tmp_path) == 3


def test_quadrature_failure_exits_4(tmp_path, small_config, monkeypatch):
    import seqsubsidy.mixture as mixture

    monkeypatch.setattr(mixture, "MAX_NODES", 16)
    code = _run("region", small_config, "--set", "mixture_nodes=16", "--alpha-span", "150",
                "--beta-span", "150", "--out", tmp_path)
    assert code == 4


def test_convexity_failure_exits_4(tmp_path, small_config, monkeypatch):
    def broken(*args, **kwargs):
        raise ConvexityError("intersection outside bracket")

    monkeypatch.setattr(cli, "optimize", broken)
    assert _run("optimize", small_config, "--out", tmp_path) == 4
