import copy

import pytest

from nary_kernel.cli import new_session

_PROTO = None


def prelude_session():
    """A fresh session with the prelude already checked (copied, not re-run)."""
    global _PROTO
    if _PROTO is None:
        _PROTO = new_session()
    return copy.deepcopy(_PROTO)


@pytest.fixture
def psession():
    return prelude_session()
