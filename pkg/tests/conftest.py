import pytest

from pipeline_fixtures import blanco_mock_rules


@pytest.fixture
def blanco_rules():
    return blanco_mock_rules()
