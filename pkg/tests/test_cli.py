import json

import pytest
from click.testing import CliRunner

from instructpaint.cli import main
from instructpaint.data import load_dataset


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def test_gen_data_cli(runner, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_ds")
    result = runner.invoke(main, [
        "gen-data", "--seed", "1", "--episodes", "4", "--steps", "3",
        "--out", str(out), "--size", "64"])
    assert result.exit_code == 0, result.output
    episodes, cfg, manifest = load_dataset(out)
    assert len(episodes) == 4
    assert cfg.steps == 3
    assert manifest["seed"] == 1


def test_gen_data_custom_catalog(runner, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_ds2")
    result = runner.invoke(main, [
        "gen-data", "--episodes", "2", "--steps", "2", "--out", str(out),
        "--shapes", "square,circle", "--colors", "red,green,blue"])
    assert result.exit_code == 0, result.output
    _, cfg, _ = load_dataset(out)
    assert cfg.shapes == ("square", "circle")
    assert cfg.colors == ("red", "green", "blue")


def test_cli_help_lists_commands(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for cmd in ("gen-data", "train", "eval", "serve", "session"):
        assert cmd in result.output
