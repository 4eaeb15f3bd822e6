"""ATM network simulator: cell codec, AAL5, traffic contracts, discrete-event engine."""

import json as _json

from ._core import (
    OrderingError,
    RangeError,
    ValidationError,
    burst_tolerance,
    compute_clr,
    compute_hec,
    decode_header,
    delay_stats,
    encode_header,
    gcra_update,
    reassemble,
    segment,
    validate_contract,
    validate_scenario,
)
from ._core import run_scenario as _run_scenario

__all__ = [
    "OrderingError",
    "RangeError",
    "ValidationError",
    "burst_tolerance",
    "compute_clr",
    "compute_hec",
    "decode_header",
    "delay_stats",
    "encode_header",
    "gcra_update",
    "reassemble",
    "run",
    "segment",
    "validate_contract",
    "validate_scenario",
]


def run(scenario):
    """Run a scenario given as a dict or JSON string; returns the report dict."""
    text = scenario if isinstance(scenario, str) else _json.dumps(scenario)
    return _json.loads(_run_scenario(text))
