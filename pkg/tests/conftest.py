import hashlib
import json
from pathlib import Path

import pytest

from convoplan.crf import TrainHyper, load_model, save_model
from convoplan.dialogue import DialogueEngine, load_question_templates
from convoplan.harness import load_corpus, split_corpus, stats_from_corpus, train_all
from convoplan.planning import (
    load_functional_positions,
    load_templates,
    load_world,
    parse_pddl,
)
from convoplan.tasks import load_catalog

DATA = Path(__file__).resolve().parents[1] / "src" / "convoplan" / "data"
_EMPTY_PROBLEM = "(define (problem p) (:domain domestic) (:objects) (:init) (:goal (and)))"

MODEL_NAMES = ("task", "argument", "argtype")


def _cached_models(corpus, tag, cache_root):
    """Training is deterministic, so models are cached keyed by corpus bytes."""
    digest = hashlib.sha256(
        (DATA / "corpus.jsonl").read_bytes() + tag.encode()
    ).hexdigest()[:16]
    cache = cache_root / digest
    if all((cache / f"{n}.crf").exists() for n in MODEL_NAMES):
        return {n: load_model(cache / f"{n}.crf") for n in MODEL_NAMES}
    models = train_all(corpus, TrainHyper())
    cache.mkdir(parents=True, exist_ok=True)
    for n, m in models.items():
        save_model(m, cache / f"{n}.crf")
    return models


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(DATA / "corpus.jsonl")


@pytest.fixture(scope="session")
def corpus_split(corpus):
    return split_corpus(corpus)


@pytest.fixture(scope="session")
def model_cache_dir():
    return Path(__file__).parent / ".model_cache"


@pytest.fixture(scope="session")
def split_models(corpus_split, model_cache_dir):
    train_set, _ = corpus_split
    return _cached_models(train_set, "split", model_cache_dir)


@pytest.fixture(scope="session")
def full_models(corpus, model_cache_dir):
    return _cached_models(corpus, "full", model_cache_dir)


@pytest.fixture(scope="session")
def catalog():
    return load_catalog(DATA / "catalog.txt")


@pytest.fixture(scope="session")
def engine(full_models, corpus, catalog):
    return DialogueEngine(
        full_models["task"],
        full_models["argument"],
        full_models["argtype"],
        catalog,
        stats_from_corpus(corpus),
        load_question_templates(DATA / "questions.txt", catalog),
    )


@pytest.fixture(scope="session")
def state_templates():
    return load_templates(DATA / "state_templates.txt")


@pytest.fixture(scope="session")
def functional():
    return load_functional_positions(DATA / "functional.tsv")


@pytest.fixture(scope="session")
def world(functional):
    return load_world(DATA / "world.json", functional)


@pytest.fixture(scope="session")
def domain():
    parsed, _ = parse_pddl((DATA / "domain.pddl").read_text(), _EMPTY_PROBLEM)
    return parsed


@pytest.fixture(scope="session")
def full_model_dir(full_models, model_cache_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    for n, m in full_models.items():
        save_model(m, out / f"{n}.crf")
    return out
