import logging

import pytest

from ssumkit.cli import runner as runner_module
from ssumkit.cli.runner import build_parser, load_environment, main
from ssumkit.errors import NonFinite

SG_CONFIG = """
[experiment]
name = "cli"
problem = "sg"
methods = ["sg_diminishing", "ssum_sg"]
r_max = 20
seed = 2
n_mc = 20
eval_every = 10
output_dir = "out"

[sg]
dim = 3
"""

CHECK_CONFIG = """
[experiment]
name = "cli-check"
problem = "wmmse"
methods = ["stochastic_wmmse"]
r_max = 10
seed = 4
output_dir = "out"

[network]
n_cells = 2

[dictionary]
n = 5
k = 6
sparsity = 2

[properties]
n_trials = 10
n_convexity_checks = 3
sg_iterations = 50
inject_negative_rho = true
"""


@pytest.fixture(autouse=True)
def quiet_logging(monkeypatch):
    monkeypatch.setattr(runner_module, "setup_logging", lambda: None)


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestMain:
    def test_run_writes_outputs(self, tmp_path, capsys):
        path = write_config(tmp_path, SG_CONFIG)
        assert main(["run", str(path)]) == 0
        out = tmp_path / "out"
        assert (out / "results.csv").exists()
        assert (out / "manifest.txt").exists()
        assert (out / "ssum_sg.csv").exists()
        assert "Experiment 'cli' wrote 4 files" in capsys.readouterr().out

    def test_overrides(self, tmp_path):
        path = write_config(tmp_path, SG_CONFIG)
        elsewhere = tmp_path / "elsewhere"
        code = main(["run", str(path), "--out", str(elsewhere), "--seed", "9"])
        assert code == 0
        assert (elsewhere / "results.csv").exists()
        assert not (tmp_path / "out").exists()

    def test_missing_config(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "absent.toml")]) == 1
        assert "config file not found" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        text = SG_CONFIG.replace('name = "cli"', 'name = "cli"\nspeed = 3')
        assert main(["run", str(write_config(tmp_path, text))]) == 1

    def test_failed_check(self, tmp_path, capsys):
        path = write_config(tmp_path, CHECK_CONFIG)
        assert main(["check", str(path), "--skip-runs"]) == 2
        assert (tmp_path / "out" / "properties.csv").exists()
        assert "FAIL wmmse_tightness" in capsys.readouterr().out

    def test_runtime_error(self, tmp_path, monkeypatch):
        def explode(config):
            raise NonFinite("iterate became NaN")

        monkeypatch.setattr(runner_module, "run_and_emit", explode)
        path = write_config(tmp_path, SG_CONFIG)
        assert main(["run", str(path)]) == 3


ENV_CONFIG = SG_CONFIG.replace('output_dir = "out"\n', "")


@pytest.fixture
def clean_environment(monkeypatch):
    # set first so teardown removes whatever load_dotenv writes
    for name in ("SSUM_OUTPUT_DIR", "SSUM_THREADS"):
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)


class TestEnvironment:
    def test_dotenv_values_reach_the_config(self, tmp_path, clean_environment):
        env_file = tmp_path / ".env"
        env_file.write_text(
            f"SSUM_OUTPUT_DIR={tmp_path / 'from-env'}\nSSUM_THREADS=2\n"
        )
        assert load_environment(env_file) == env_file
        config = runner_module.load_config(write_config(tmp_path, ENV_CONFIG))
        assert config.output_dir == tmp_path / "from-env"
        assert config.threads == 2

    def test_missing_dotenv(self, tmp_path):
        assert load_environment(tmp_path / ".env") is None

    def test_run_uses_the_project_dotenv(
        self, tmp_path, monkeypatch, caplog, clean_environment
    ):
        project = tmp_path / "project"
        project.mkdir()
        (project / ".env").write_text(f"SSUM_OUTPUT_DIR={tmp_path / 'env-out'}\n")
        monkeypatch.setattr(runner_module, "PROJECT_ROOT", project)
        caplog.set_level(logging.INFO, logger=runner_module.__name__)
        assert main(["run", str(write_config(tmp_path, ENV_CONFIG))]) == 0
        assert (tmp_path / "env-out" / "results.csv").exists()
        assert "Loaded environment from" in caplog.text


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["--version"])
        assert exc.value.code == 0
        assert "ssumkit 0.1.0" in capsys.readouterr().out

    def test_rejects_bad_seeds(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "x.toml", "--seed", "-1"])
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "x.toml", "--threads", "0"])
