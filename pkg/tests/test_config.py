import pytest

from memtask.harness.config import ExperimentConfig, example_config_path, load_config, parse_config
from memtask.policy import PolicyConfig
from memtask.pomdp import ContractError


def test_example_config_parses():
    cfg = load_config(example_config_path())
    assert cfg.task == "put_back_block"
    assert cfg.build_task().name == "put_back_block"
    assert cfg.policy.delta <= cfg.policy.H


def test_text_roundtrip():
    cfg = ExperimentConfig(task="swap_t", task_params={"orientations": 2}, iters=7, seed=3,
                           policy=PolicyConfig(H=4, delta=2, K=5, no_anchor=True))
    assert parse_config(cfg.to_text()) == cfg


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\nseed = 12   # trailing\npolicy.K = 2\nlr.encoder = 0.01\n")
    assert cfg.seed == 12 and cfg.policy.K == 2 and cfg.lr_encoder == 0.01


@pytest.mark.parametrize("text,match", [
    ("bogus = 1", "unknown key"),
    ("policy.wings = 2", "unknown policy setting"),
    ("seed 3", "key = value"),
    ("episodes = 0", "episodes"),
    ("iters = many", "iters expects int"),
    ("policy.markovian = 1", "expects bool"),
    ("policy.delta = 9", "delta"),
    ("version = 2", "version"),
    ("lr.heads = -1", "lr_heads"),
])
def test_invalid_configs(text, match):
    with pytest.raises(ContractError, match=match):
        parse_config(text, source="x.cfg")


def test_error_names_the_line():
    with pytest.raises(ContractError, match=r"x.cfg:3"):
        parse_config("seed = 1\n\nnope = 2", source="x.cfg")


def test_task_change_drops_base_params():
    base = parse_config("task = put_back_block\ntask.pads = 2")
    assert parse_config("seed = 4", base).task_params == {"pads": 2}
    assert parse_config("task = swap_t", base).task_params == {}


def test_variants_and_learning_rates():
    cfg = ExperimentConfig().with_variant("no_sliding")
    assert cfg.policy.no_sliding and cfg.policy.variant == "no_sliding"
    assert cfg.with_variant("vanilla").policy.variant == "vanilla"
    with pytest.raises(ContractError):
        cfg.with_variant("no_brain")
    lrs = ExperimentConfig(lr_heads=1.0, lr_encoder=2.0, lr_planner=3.0).learning_rates()
    assert lrs == {"": 1.0, "enc.": 2.0, "attn.": 2.0, "plan.": 3.0}


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "absent.cfg")
