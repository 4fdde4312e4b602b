import json
from pathlib import Path

import numpy as np
import pytest

from config.run_config import RunConfig, load_run_config
from models.constants import hierarchy_constants
from models.errors import ConfigurationError
from main import main

REPO_CONFIG = Path(__file__).resolve().parents[1] / "config" / "run_config.ini"


def test_repository_config():
    run_config = RunConfig.from_config(REPO_CONFIG)
    assert run_config.boardgame.mu == [2, 1]
    assert run_config.verify.qs == [3.5, 4.0, 6.0]
    assert run_config.with_overrides(sequential=True).run.workers == 1
    assert run_config.with_overrides(workers=3, seed=5).run.seed == 5
    assert hierarchy_constants(run_config.hierarchy_weights()).regime


def test_missing_explicit_config_is_an_error(tmp_path):
    with pytest.raises(ConfigurationError):
        load_run_config(str(tmp_path / "absent.ini"))


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"weights": {"q": 6.0}, "boardgame": {"k": 1, "n": 3}}))
    run_config = RunConfig.from_config(path)
    assert run_config.weights.q == 6.0
    assert run_config.boardgame.n == 3


def test_unknown_lemma_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["verify", "no_such_lemma"])
    assert excinfo.value.code == 2


def test_boardgame_count(tmp_path, capsys):
    status = main(["--sequential", "--out", str(tmp_path), "boardgame", "count", "--k", "2", "--n", "2"])
    assert status == 0
    assert "7 64" in capsys.readouterr().out
    report = json.loads((tmp_path / "boardgame.json").read_text(encoding="utf-8"))
    assert report["result"]["echelon"] == 7
    assert (tmp_path / "count_k2_n2.csv").exists()


def test_invalid_weights_exit_with_configuration_status(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[weights]\np = 0.5\n")
    assert main(["--config", str(path), "--out", str(tmp_path), "boardgame", "count"]) == 2


def test_invalid_mixture_exit_with_configuration_status(tmp_path):
    mixture = tmp_path / "mix.json"
    mixture.write_text(json.dumps({"weights": [0.5, 0.6], "components": [{}, {}]}))
    status = main(["--sequential", "--out", str(tmp_path), "hierarchy", "admissibility", "--mixture", str(mixture)])
    assert status == 2


def test_grid_half_widths_follow_tail_tolerance():
    run_config = RunConfig.from_config(REPO_CONFIG)
    assert run_config.grid.v_max == pytest.approx(np.sqrt(1e6**0.5 - 1.0))
    assert run_config.grid.tail_bound(run_config.weights) <= 1e-6 * (1.0 + 1e-9)
    assert run_config.tail_bounds()["grid"] == run_config.grid.tail_bound(run_config.weights)
    defaults = RunConfig()
    assert defaults.quadrature.box_n == 12
    assert defaults.quadrature.time_panels == 8
    assert defaults.solver.norm_samples == 10_000
    assert defaults.grid.tail_bound(defaults.weights) <= defaults.run.tail_tolerance * (1.0 + 1e-9)


def test_truncated_grid_is_a_configuration_error(tmp_path):
    path = tmp_path / "short.ini"
    path.write_text("[grid]\nx_max = 4.0\nv_max = 4.0\nn_x = 1\nn_v = 8\n")
    with pytest.raises(ConfigurationError, match="Хвост сетки"):
        RunConfig.from_config(path)
    assert main(["--config", str(path), "--out", str(tmp_path), "boardgame", "count"]) == 2
    path.write_text("[run]\ntail_tolerance = 0.01\n\n[grid]\nx_max = 4.0\nv_max = 4.0\nn_x = 1\nn_v = 8\n")
    assert RunConfig.from_config(path).grid.v_max == 4.0
