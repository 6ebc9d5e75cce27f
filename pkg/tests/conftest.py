import pytest
import torch

from pfxdiff import DenoiserConfig, EmbeddingTable, TrainConfig, Vocabulary

from _oracles import CRITERION_LINES

# Keep runs reproducible across machines regardless of core count.
torch.set_num_threads(1)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one verdict line per acceptance criterion after the test summary."""
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_vocab() -> Vocabulary:
    return Vocabulary.from_words(["a", "red", "circle", "blue", "square", "in", "the", "top", "left"])


@pytest.fixture
def tiny_table() -> EmbeddingTable:
    return EmbeddingTable.init_gaussian(vocab_size=12, dim=8, seed=123)


@pytest.fixture
def tiny_model_cfg() -> DenoiserConfig:
    return DenoiserConfig(
        embed_dim=8, model_dim=16, prefix_len=2, seq_len=6, layers=1, heads=2, feat_dim=10
    )


@pytest.fixture
def tiny_train_cfg() -> TrainConfig:
    return TrainConfig(steps=5, batch_size=4, timesteps=20, schedule="linear", seed=7)
