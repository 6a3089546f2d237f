import pytest

from fashiontag.gateway import default_expansion_rules
from fashiontag.labeling import default_ruleset, map_annotations
from fashiontag.schema import default_vocabulary
from fashiontag.synthetic import generate_annotations


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def rules(vocab):
    return default_ruleset(vocab)


@pytest.fixture(scope="session")
def expansion_rules(vocab):
    return default_expansion_rules(vocab)


@pytest.fixture(scope="session")
def reference_annotations():
    """The 4,610-row synthetic corpus with the reference category counts."""
    return generate_annotations()


@pytest.fixture(scope="session")
def reference_mapped(reference_annotations, rules, vocab):
    return map_annotations(reference_annotations, rules, vocab)
