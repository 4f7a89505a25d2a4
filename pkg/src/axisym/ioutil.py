"""Deterministic JSON rendering with 17-significant-digit floats.

Artifacts are compared byte for byte across reruns and thread counts, so
serialization must be fully deterministic: keys sorted, floats rendered
with %.17g (which round-trips IEEE doubles exactly), LF line endings.
"""

from __future__ import annotations

import hashlib
import json


def float17(x):
    return "%.17g" % float(x)


def dumps(obj, indent=0):
    """Serialize dict/list/str/int/float/bool/None deterministically."""
    out = []
    _render(obj, out, indent, 0)
    return "".join(out) + "\n"


def _render(obj, out, indent, level):
    pad = " " * (indent * (level + 1)) if indent else ""
    closepad = " " * (indent * level) if indent else ""
    nl = "\n" if indent else ""
    sep = "," + nl
    if isinstance(obj, dict):
        out.append("{" + nl)
        items = sorted(obj.items())
        for n, (k, v) in enumerate(items):
            out.append(pad + json.dumps(str(k)) + ": ")
            _render(v, out, indent, level + 1)
            if n < len(items) - 1:
                out.append(sep)
            else:
                out.append(nl)
        out.append(closepad + "}")
    elif isinstance(obj, (list, tuple)):
        out.append("[" + nl)
        seq = list(obj)
        for n, v in enumerate(seq):
            out.append(pad)
            _render(v, out, indent, level + 1)
            out.append(sep if n < len(seq) - 1 else nl)
        out.append(closepad + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int,)):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(float17(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        # numpy scalars and the like
        try:
            out.append(float17(float(obj)))
        except (TypeError, ValueError):
            out.append(json.dumps(str(obj)))


def loads(text):
    return json.loads(text)


def sha256_of(obj):
    """Hash of the canonical rendering; dicts may drop volatile keys first."""
    return hashlib.sha256(dumps(obj).encode("utf-8")).hexdigest()
