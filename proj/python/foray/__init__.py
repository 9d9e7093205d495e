"""Loop-nest and affine index expression extraction from memory traces."""

import json

from ._foray import (
    Model,
    SpecError,
    TraceError,
    analyze_file,
    analyze_text,
    check,
    pointer_walk_spec,
    random_spec,
    shared_callee_spec,
    synth,
)

__all__ = [
    "Model",
    "SpecError",
    "TraceError",
    "analyze_file",
    "analyze_text",
    "check",
    "pointer_walk_spec",
    "random_spec",
    "report",
    "shared_callee_spec",
    "synth",
]


def report(model):
    """Parsed JSON report of a model."""
    return json.loads(model.report_json())
