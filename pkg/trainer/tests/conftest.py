import pytest

from subjscan_trainer.config import load_config
from subjscan_trainer.train import train
from trainer_fixtures import CONFIGS, write_bilingual_tsv


@pytest.fixture(scope="session")
def smoke_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    train_tsv = write_bilingual_tsv(root / "train.tsv", n_subj=20, n_obj=30)  # 50 sentences
    dev_tsv = write_bilingual_tsv(root / "dev.tsv", n_subj=6, n_obj=10, start=1000)
    return train_tsv, dev_tsv


@pytest.fixture(scope="session")
def smoke_run(smoke_corpus, tmp_path_factory):
    """One shared smoke training run; several tests inspect its outputs."""
    train_tsv, dev_tsv = smoke_corpus
    out_dir = tmp_path_factory.mktemp("run")
    config = load_config(CONFIGS / "smoke.yaml")
    summary = train(config, train_tsv, dev_tsv, out_dir)
    return summary, train_tsv, dev_tsv
