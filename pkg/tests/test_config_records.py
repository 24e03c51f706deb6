import logging
from pathlib import Path

import numpy as np
import pytest

from core.config import get_settings, load_config, profile_config
from core.errors import ConfigError
from core.logging_utils import configure_logging, get_logger
from core.records import RecordWriter, dumps, read_records

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_profile_defaults():
    chem = profile_config("chemical-full-fork", "full")
    assert chem.chemical_size() == (10, 5)
    assert chem.init_steps() == 1000 and chem.total_steps() == 150_000 and chem.horizon() == 3
    assert chem.local_graph == "fork"
    mag = profile_config("magnetic2d")
    assert mag.init_steps() == 2000 and mag.horizon() == 1
    assert not mag.is_chemical
    assert profile_config("chemical-full-chain", "mini").chemical_size() == (5, 3)


def test_effective_codebook_size():
    cfg = profile_config("chemical-full-fork")
    assert cfg.effective_codebook_size() == 16
    assert cfg.with_updates(method="dense").effective_codebook_size() == 1


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as info:
        profile_config("chemical-full-fork", model={"codebook_sizes": 4})
    assert info.value.keys == ["model.codebook_sizes"]


def test_missing_env_is_named():
    from core.config import build_config

    with pytest.raises(ConfigError) as info:
        build_config({"method": "fcdl"})
    assert "env" in info.value.keys


def test_out_of_range_values_are_named():
    with pytest.raises(ConfigError) as info:
        profile_config("chemical-full-fork", model={"codebook_size": 0}, training={"lr": -1.0})
    assert info.value.keys == ["model.codebook_size", "training.lr"]
    with pytest.raises(ConfigError) as info:
        profile_config("chemical-full-fork", planner={"candidates": 4, "elites": 8})
    assert info.value.keys == ["planner"]
    with pytest.raises(ConfigError):
        profile_config("chemical-full-fork", method="gnn")


def test_config_hash_ignores_seeds_and_output():
    cfg = profile_config("chemical-full-fork")
    assert cfg.config_hash() == cfg.with_updates(seeds=[7, 8], output_dir="elsewhere").config_hash()
    assert cfg.config_hash() != cfg.with_updates(**{"training.lr": 3e-4}).config_hash()
    assert len(cfg.config_hash()) == 64


def test_with_updates_validates():
    cfg = profile_config("chemical-full-fork")
    assert cfg.with_updates(**{"model.codebook_size": 2}).model.codebook_size == 2
    with pytest.raises(ConfigError):
        cfg.with_updates(**{"model.codebook_size": -3})


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.seeds


def test_bad_config_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    broken = tmp_path / "broken.yaml"
    broken.write_text("env: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(broken)
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(listing)


def test_runtime_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("FCDL_WORKERS", "3")
    monkeypatch.setenv("FCDL_LOG_LEVEL", "debug")
    settings = get_settings()
    assert settings.workers == 3
    assert settings.log_level == "debug"


def test_dumps_is_canonical():
    a = dumps({"b": np.float64(0.5), "a": np.int64(3), "c": (1, 2)})
    b = dumps({"c": [1, 2], "a": 3, "b": 0.5})
    assert a == b == b'{"a":3,"b":0.5,"c":[1,2]}\n'
    assert dumps({"x": np.arange(3)}) == b'{"x":[0,1,2]}\n'


def test_record_writer_truncates_then_appends(tmp_path):
    path = tmp_path / "out" / "metrics.jsonl"
    w = RecordWriter(path)
    w.write({"kind": "run", "seed": 0})
    w.write_many([{"kind": "eval", "step": 1}, {"kind": "eval", "step": 2}])
    assert [r["kind"] for r in read_records(path)] == ["run", "eval", "eval"]
    RecordWriter(path, truncate=False).write({"kind": "extra"})
    assert len(read_records(path)) == 4
    RecordWriter(path)
    assert read_records(path) == []


def test_logging_installs_one_handler():
    configure_logging("INFO")
    configure_logging("DEBUG")
    root = logging.getLogger("fcdl")
    assert len(root.handlers) == 1
    assert root.level == logging.DEBUG
    assert get_logger("core.x").name == "fcdl.core.x"
    configure_logging("INFO")
