import pytest

def pytest_configure(config: pytest.Config):
    config.addinivalue_line(
        "markers", "slow: end-to-end runs of the whole pipeline"
    )

def pytest_itemcollected(item: pytest.Item):
    """
    Add the slow keyword to all tests marked with pytest.mark.slow, so that
    "-k 'not slow'" skips the end-to-end runs.
    """
    for m in item.own_markers:
        if m.name == 'slow' and 'slow' not in item.extra_keyword_matches:
            item.extra_keyword_matches.add('slow')
