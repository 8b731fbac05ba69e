"""Serialization of traces and reports; all output is byte-stable for fixed inputs."""

from typing import Any
import json

import numpy as np

from .lindblad import EvolutionTrace


def to_jsonable(value:Any) -> Any:
    """Convert numpy scalars and arrays (complex entries become [re, im]) to plain Python."""

    if isinstance(value, dict):
        return {str(key): to_jsonable(val) for key, val in value.items()}

    if isinstance(value, (list, tuple)):
        return [to_jsonable(val) for val in value]

    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())

    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]

    if isinstance(value, np.generic):
        return value.item()

    return value


def trace_to_csv(trace:EvolutionTrace, metadata:dict=None) -> str:
    """
    `# key: value` metadata lines, then a `time,p0,...,p{n-1}` header and one
    row per time with 17 significant digits.
    """

    lines = []

    for key, value in sorted(dict(metadata or {}, **trace.metadata).items()):
        lines.append(f"# {key}: {json.dumps(to_jsonable(value), sort_keys=True)}")

    lines.append(",".join(["time"] + [f"p{ix}" for ix in range(trace.n)]))

    for t, probs in zip(trace.times, trace.node_probs):
        lines.append(",".join("%.17g" % x for x in [t, *probs]))

    return "\n".join(lines) + "\n"


def trace_to_json(trace:EvolutionTrace, metadata:dict=None) -> str:
    """{"metadata": {...}, "trace": [{"time": t, "probs": [...]}, ...]}"""

    return json.dumps(
        dict(
            metadata=to_jsonable(dict(metadata or {}, **trace.metadata)),
            trace=[
                dict(time=float(t), probs=[float(x) for x in probs])
                for t, probs in zip(trace.times, trace.node_probs)
            ]
        ),
        indent=2,
        sort_keys=True
    ) + "\n"


def format_trace(trace:EvolutionTrace, fmt:str, metadata:dict=None) -> str:

    assert fmt in ["csv", "json"], f"Unknown trace format {fmt}"

    if fmt == "csv":
        return trace_to_csv(trace, metadata)
    else:
        return trace_to_json(trace, metadata)


def report_to_json(report:dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"
