import math

import pytest

from modqkd.config import ExperimentConfig, config_from_dict, config_to_dict, dump_config, load_config
from modqkd.errors import ConfigError
from modqkd.transmitter import ModulatorMode


def test_defaults_are_valid():
    cfg = ExperimentConfig()
    assert cfg.problems() == []
    assert cfg.transmitter.rep_rate == 50e6 and cfg.receiver.det_efficiency == 0.68
    assert cfg.security.eps_sec == 1e-10 and cfg.security.block_bits == 6_590_000


def test_yaml_round_trip(tmp_path):
    cfg = ExperimentConfig().with_updates(transmitter={"theta": 0.3, "modulator_mode": "quadrature"})
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    back = load_config(path)
    assert back == cfg
    assert back.transmitter.modulator_mode is ModulatorMode.QUADRATURE


def test_partial_yaml_keeps_defaults(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("channel:\n  loss_db: 20\nreceiver:\n  dark_rate: 10\n")
    cfg = load_config(path)
    assert cfg.channel.loss_db == 20.0 and isinstance(cfg.channel.loss_db, float)
    assert cfg.receiver.dark_rate == 10.0 and cfg.transmitter.mu == 0.6


def test_every_problem_is_reported_with_its_path():
    with pytest.raises(ConfigError) as info:
        config_from_dict(
            {
                "transmitter": {"mu": -1, "p_z": 2, "modulator_mode": "sideways", "colour": 1},
                "receiver": {"split_z": 0.9},
                "security": {"eps_sec": 0},
                "seed": -5,
            }
        )
    paths = {p for p, _ in info.value.problems}
    assert {"transmitter.modulator_mode", "transmitter.colour"} <= paths
    with pytest.raises(ConfigError) as info:
        config_from_dict({"transmitter": {"mu": -1, "p_z": 2}, "receiver": {"split_z": 0.9}, "security": {"eps_sec": 0}, "seed": -5})
    paths = {p for p, _ in info.value.problems}
    assert {"transmitter.mu", "transmitter.p_z", "receiver.split_x", "security.eps_sec", "seed"} <= paths


def test_type_errors_are_reported():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"channel": {"loss_db": "lots"}, "n_pulses": 1.5, "receiver": 3})
    paths = {p for p, _ in info.value.problems}
    assert paths == {"channel.loss_db", "n_pulses", "receiver"}


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    broken = tmp_path / "broken.yaml"
    broken.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_infinite_loss_survives_dict_round_trip():
    cfg = ExperimentConfig().with_updates(channel={"loss_db": math.inf})
    assert config_from_dict(config_to_dict(cfg)).channel.loss_db == math.inf
