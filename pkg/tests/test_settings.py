import pytest

from errors import ConfigError
from settings import DEFAULT_CONFIG, read_config_file, runtime_defaults, synth_defaults, train_defaults

SAMPLE = """🚀  comment line

synth.n_nodes 120
synth.feature_shift 0.75
🚀 another comment
train.model dgcnn
train.sortpool_k auto
train.neighbor_cap 4
runtime.threads 3
runtime.out results
server_settings.tickrate 60
"""


@pytest.fixture
def sample(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text(SAMPLE, encoding="utf-8")
    return path


def test_sections_and_types(sample):
    raw = read_config_file(sample)
    synth = synth_defaults(raw)
    assert synth.n_nodes == 120 and synth.feature_shift == 0.75
    assert synth.seed == 0
    tr = train_defaults(raw)
    assert tr.model == "dgcnn"
    assert tr.sortpool_k is None
    assert tr.neighbor_cap == 4
    rt = runtime_defaults(raw)
    assert rt.threads == 3 and rt.out == "results"


def test_unknown_keys_warn(tmp_path, capsys):
    path = tmp_path / "c.txt"
    path.write_text("server_settings.tickrate 60\ntrain.learning_rate 0.1\n", encoding="utf-8")
    train_defaults(read_config_file(path))
    err = capsys.readouterr().err
    assert "server_settings.tickrate" in err
    assert "train.learning_rate" in err


def test_env_overrides_threads(sample, monkeypatch):
    monkeypatch.setenv("SPREADER_GNN_THREADS", "5")
    assert runtime_defaults(read_config_file(sample)).threads == 5


def test_missing_file_uses_builtin_defaults(tmp_path):
    raw = read_config_file(tmp_path / "nope.txt")
    assert synth_defaults(raw).n_nodes == 400
    assert train_defaults(raw).epochs == 200


def test_bad_value(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("train.epochs many\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="train.epochs"):
        train_defaults(read_config_file(path))


def test_shipped_config_parses():
    raw = read_config_file(DEFAULT_CONFIG)
    assert train_defaults(raw).validate().lr == 0.001
    synth_defaults(raw).validate()
