"""File-format version strings and the shared major-version check.

Every structured file biasforge writes carries a ``format`` field of the form
``biasforge/<kind>/v<major>``. Readers accept any file whose kind matches and
whose major version they implement, and reject everything else.
"""

from __future__ import annotations

import re

from .errors import SchemaError, UnsupportedFormat

FACTORSPACE_FORMAT = "biasforge/factorspace/v1"
MANIFEST_FORMAT = "biasforge/manifest/v1"
TRIALS_FORMAT = "biasforge/trials/v1"
MODEL_FORMAT = "biasforge/plantedmodel/v1"
REPORT_FORMAT = "biasforge/report/v1"
BATCH_FORMAT = "biasforge/batchstate/v1"

_FORMAT_RE = re.compile(r"^biasforge/(?P<kind>[a-z]+)/v(?P<major>\d+)$")


def check_format(found: object, expected: str) -> None:
    """Validate a file's ``format`` field against the expected kind and major."""
    if not isinstance(found, str):
        raise SchemaError(f"missing or non-string 'format' field (expected {expected!r})")
    got = _FORMAT_RE.match(found)
    want = _FORMAT_RE.match(expected)
    assert want is not None
    if got is None or got.group("kind") != want.group("kind"):
        raise SchemaError(f"wrong file format {found!r}, expected {expected!r}")
    if got.group("major") != want.group("major"):
        raise UnsupportedFormat(f"unsupported major version in {found!r}, expected {expected!r}")
