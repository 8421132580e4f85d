import numpy as np
import pytest

from scd.store import EmbeddingMatrix
from scd.synthgen import PlantedSpec, gen_planted, gen_taxonomy_fixture
from scd.taxonomy import parse_wordnet_noun


def unit_rows(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@pytest.fixture(scope="session")
def planted_clean():
    # pinned recovery configuration (see acceptance suite)
    return gen_planted(PlantedSpec(n_classes=10, vocab_size=200, dim=64,
                                   per_class=30, noise=0.05, seed=7))


@pytest.fixture(scope="session")
def binary_tree_graph(tmp_path_factory):
    text, lemma_map = gen_taxonomy_fixture(3, 2)
    path = tmp_path_factory.mktemp("tax") / "data.noun"
    path.write_text(text)
    return parse_wordnet_noun(path), lemma_map


@pytest.fixture()
def small_matrix():
    return EmbeddingMatrix.from_array(np.array([[3.0, 4.0], [0.0, 2.0]], dtype=np.float32))
