# Copyright 2026 The dlspec Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Manifests and runtime for reproducible deep learning tasks."""

import json as _json

from . import _core
from ._core import (
    Error,
    ManifestError,
    canonicalize,
    compare_versions,
    lint,
    manifest_id,
    peek_kind,
    probe_host,
    required_fields,
    resolve,
    run_cli,
    satisfies,
    version,
    violation_codes,
)

protocol = _core.protocol

__version__ = version()


def plan(hardware, software, dataset, model):
    """Execution plan for four manifest texts, as a dict."""
    return _json.loads(_core.plan(hardware, software, dataset, model))


def is_valid(text):
    return not any(v["severity"] == "error" for v in lint(text))


__all__ = [
    "Error",
    "ManifestError",
    "canonicalize",
    "compare_versions",
    "is_valid",
    "lint",
    "manifest_id",
    "peek_kind",
    "plan",
    "probe_host",
    "protocol",
    "required_fields",
    "resolve",
    "run_cli",
    "satisfies",
    "version",
    "violation_codes",
]
