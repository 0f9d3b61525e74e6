import numpy as np
import pytest
import torch

from instructpaint.config import GenConfig, ModelConfig
from instructpaint.data import sample_episode, export_dataset, split_episode_ids
from instructpaint.text import Vocabulary


@pytest.fixture(scope="session")
def gen_config():
    return GenConfig()


@pytest.fixture(scope="session")
def vocab(gen_config):
    return Vocabulary.from_config(gen_config)


@pytest.fixture(scope="session")
def tiny_model_config(vocab):
    # 8x8 images, 2x2 feature maps: cheap enough for gradient checks
    return ModelConfig(
        vocab_size=len(vocab),
        embed_dim=8,
        word_hidden=16,
        history_hidden=16,
        cond_dim=16,
        feat_channels=4,
        feat_size=2,
        resolution=8,
        intent_hidden=(16,),
        fusion_hidden=16,
    )


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory, gen_config):
    """A 24-episode dataset on disk, shared across tests."""
    root = tmp_path_factory.mktemp("dataset")
    episodes = {f"ep{i:05d}": sample_episode(1000 + i, gen_config) for i in range(24)}
    export_dataset(episodes, root, gen_config, seed=1000,
                   splits=split_episode_ids(24))
    return root


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)
    np.random.seed(0)
