"""Shared fixtures, most notably the session-scoped pretrained artifact."""

import pytest

from loadcast.corpus import build_corpus
from loadcast.transformer import TransformerConfig, TransformerForecaster

# One frozen recipe so every test that needs a pretrained transformer agrees
# on the exact same weights. The trend_seasonal family stays out of the
# corpus so transfer onto it can be measured on genuinely unseen structure.
PRETRAIN_RECIPE = {
    "series_count": 200,
    "series_length": 512,
    "corpus_seed": 0,
    "exclude_families": ("trend_seasonal",),
    "epochs": 4,
    "learning_rate": 1e-3,
    "batch_size": 256,
    "train_seed": 0,
}


@pytest.fixture(scope="session")
def pretrained_factory(tmp_path_factory):
    """Zero-argument memoized builder returning the artifact path.

    Pretraining takes minutes, so nothing runs until the first caller; the
    cost lands inside that test's own clock and later callers just reload
    the saved weights.
    """
    state: dict = {}

    def factory() -> str:
        if "path" not in state:
            corpus = build_corpus(
                PRETRAIN_RECIPE["series_count"],
                master_seed=PRETRAIN_RECIPE["corpus_seed"],
                series_length=PRETRAIN_RECIPE["series_length"],
                exclude_families=PRETRAIN_RECIPE["exclude_families"],
            )
            model = TransformerForecaster(
                TransformerConfig(), init_seed=PRETRAIN_RECIPE["train_seed"]
            )
            model.pretrain(
                corpus,
                epochs=PRETRAIN_RECIPE["epochs"],
                learning_rate=PRETRAIN_RECIPE["learning_rate"],
                seed=PRETRAIN_RECIPE["train_seed"],
                batch_size=PRETRAIN_RECIPE["batch_size"],
            )
            path = str(tmp_path_factory.mktemp("artifact") / "pretrained.bin")
            model.save(path)
            state["path"] = path
        return state["path"]

    return factory
