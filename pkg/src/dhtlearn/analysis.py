"""Post-hoc trace analytics and trace import/export."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .engine import Trace
from .exceptions import DomainError, InputError
from .model import ObservationModel, kl_divergence, source_set

DEFAULT_EPSILON = 0.01
TRACE_FORMAT = "dhtlearn-trace/1"


@dataclass(frozen=True)
class ConvergenceSummary:
    epsilon: float
    agent_times: Dict[int, Optional[int]]

    @property
    def network_time(self) -> Optional[int]:
        times = list(self.agent_times.values())
        if not times or any(t is None for t in times):
            return None
        return max(times)

    @property
    def converged(self) -> bool:
        return self.network_time is not None


def convergence_time(trace: Trace, epsilon: float = DEFAULT_EPSILON) -> ConvergenceSummary:
    """First recorded time from which ``mu(theta*) >= 1 - epsilon`` holds through the end."""
    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon}")
    threshold = np.log1p(-epsilon)
    out: Dict[int, Optional[int]] = {}
    for i in trace.regular:
        ok = trace.actual_log[:, i, trace.true_index] >= threshold
        if not ok[-1]:
            out[i] = None
            continue
        failing = np.flatnonzero(~ok)
        first = 0 if failing.size == 0 else failing[-1] + 1
        out[i] = int(trace.times[first])
    return ConvergenceSummary(epsilon, out)


@dataclass(frozen=True)
class DecayEstimate:
    """Least-squares slope of ``ln belief(theta)`` against ``t`` (nats/step)."""

    agent: int
    hypothesis: int
    window: Tuple[int, int]
    local_slope: float
    actual_slope: float
    reference_bound: Optional[float]


def _ols_slope(t: np.ndarray, y: np.ndarray) -> float:
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def default_window(trace: Trace) -> Tuple[int, int]:
    T = trace.horizon
    return T // 4, T


def reference_bound(model: ObservationModel, regular: Iterable[int], theta: int) -> Optional[float]:
    """Smallest ``D(l_i(.|theta*) || l_i(.|theta))`` over regular source agents.

    ``None`` when no regular agent distinguishes ``theta`` from the truth.
    """
    star = model.true_index
    regs = set(regular)
    srcs = [i for i in source_set(model, star, theta) if i in regs]
    if not srcs:
        return None
    return min(kl_divergence(model.structures[i].row(star), model.structures[i].row(theta)) for i in srcs)


def decay_rate(trace: Trace, agent: int, theta: int,
               window: Optional[Tuple[int, int]] = None,
               model: Optional[ObservationModel] = None) -> DecayEstimate:
    """Decay slope of an agent's local and actual belief on a false hypothesis.

    The reference bound is only reported for comparison; nothing asserts it.
    """
    if theta == trace.true_index:
        raise InputError("decay rate is defined for false hypotheses only")
    if not 0 <= theta < trace.m:
        raise InputError(f"hypothesis index {theta} out of range")
    if agent not in trace.regular:
        raise InputError(f"agent {agent} is not a regular agent of this trace")
    t0, t1 = window if window is not None else default_window(trace)
    if not (0 <= t0 < t1 <= trace.horizon):
        raise InputError(f"window [{t0}, {t1}] must satisfy 0 <= t0 < t1 <= {trace.horizon}")
    sel = (trace.times >= t0) & (trace.times <= t1)
    if sel.sum() < 2:
        raise InputError(f"window [{t0}, {t1}] holds fewer than two recorded steps")
    t = trace.times[sel].astype(float)
    slopes = []
    for block in (trace.local_log, trace.actual_log):
        y = block[sel, agent, theta]
        if not np.all(np.isfinite(y)):
            raise DomainError(f"agent {agent} has a zero belief on hypothesis {theta} inside the window")
        slopes.append(_ols_slope(t, y))
    if model is None and trace.config is not None:
        model = trace.config.model
    bound = reference_bound(model, trace.regular, theta) if model is not None else None
    return DecayEstimate(agent, theta, (int(t0), int(t1)), slopes[0], slopes[1], bound)


# -- export / import -----------------------------------------------------------

def _atomic_write(destination, text: str) -> None:
    path = Path(destination)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc.strerror or exc}") from exc


def _csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "agent", "hypothesis_label", "pi", "mu"])
    pi = np.exp(trace.local_log)
    mu = np.exp(trace.actual_log)
    for k, t in enumerate(trace.times):
        for i in trace.regular:
            for h, label in enumerate(trace.labels):
                w.writerow([int(t), i, label, f"{pi[k, i, h]:.17g}", f"{mu[k, i, h]:.17g}"])
    return buf.getvalue()


def _jsonl_text(trace: Trace) -> str:
    dump = lambda obj: json.dumps(obj, separators=(",", ":"))
    header = {
        "record": "header",
        "format": TRACE_FORMAT,
        "fingerprint": trace.fingerprint,
        "labels": list(trace.labels),
        "true_index": trace.true_index,
        "regular": list(trace.regular),
        "times": trace.times.tolist(),
        "message_edges": [list(e) for e in trace.message_edges],
        "config": trace.config_doc,
    }
    lines = [dump(header)]
    for k, t in enumerate(trace.times):
        for i in trace.regular:
            lines.append(dump({
                "record": "belief", "t": int(t), "agent": i,
                "log_pi": trace.local_log[k, i].tolist(),
                "log_mu": trace.actual_log[k, i].tolist(),
            }))
    if trace.messages is not None:
        for k, t in enumerate(trace.message_times):
            for e, (a, tgt) in enumerate(trace.message_edges):
                vals = trace.messages[k, e]
                lines.append(dump({
                    "record": "message", "t": int(t), "sender": a, "target": tgt,
                    "values": None if np.isnan(vals[0]) else vals.tolist(),
                }))
    return "\n".join(lines) + "\n"


def export_trace(trace: Trace, destination, format: str = "jsonl") -> None:
    """Write a trace as ``csv`` (linear beliefs, 17 significant digits) or ``jsonl``.

    The jsonl form stores log-beliefs and round-trips bit-exactly.
    """
    if format == "csv":
        text = _csv_text(trace)
    elif format == "jsonl":
        text = _jsonl_text(trace)
    else:
        raise InputError(f"unknown trace format {format!r}; use 'csv' or 'jsonl'")
    _atomic_write(destination, text)


def _load_jsonl(fh) -> Trace:
    header = None
    beliefs = []
    messages = []
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        kind = rec.get("record")
        if kind == "header":
            header = rec
        elif kind == "belief":
            beliefs.append(rec)
        elif kind == "message":
            messages.append(rec)
        else:
            raise InputError(f"line {lineno}: unknown record type {kind!r}")
    if header is None:
        raise InputError("trace file has no header record")
    times = np.array(header["times"], dtype=np.int64)
    labels = tuple(header["labels"])
    regular = tuple(header["regular"])
    n = max(regular) + 1 if regular else 0
    if header.get("config"):
        n = header["config"]["graph"]["n"]
    m = len(labels)
    local = np.full((times.size, n, m), np.nan)
    actual = np.full((times.size, n, m), np.nan)
    pos = {int(t): k for k, t in enumerate(times)}
    for rec in beliefs:
        k = pos[rec["t"]]
        local[k, rec["agent"]] = rec["log_pi"]
        actual[k, rec["agent"]] = rec["log_mu"]
    edges = tuple(tuple(e) for e in header.get("message_edges", []))
    msg_times = np.array(sorted({r["t"] for r in messages}), dtype=np.int64)
    msgs = np.full((msg_times.size, len(edges), m), np.nan)
    mpos = {int(t): k for k, t in enumerate(msg_times)}
    epos = {e: k for k, e in enumerate(edges)}
    for rec in messages:
        if rec["values"] is not None:
            msgs[mpos[rec["t"]], epos[(rec["sender"], rec["target"])]] = rec["values"]
    return Trace(
        times=times, local_log=local, actual_log=actual, regular=regular, labels=labels,
        true_index=int(header["true_index"]), fingerprint=header["fingerprint"],
        message_edges=edges, message_times=msg_times, messages=msgs,
        config_doc=header.get("config"),
    )


def _load_csv(fh, truth) -> Trace:
    reader = csv.DictReader(fh)
    if reader.fieldnames != ["t", "agent", "hypothesis_label", "pi", "mu"]:
        raise InputError(f"unexpected CSV columns {reader.fieldnames}")
    rows = list(reader)
    labels: List[str] = []
    for r in rows:
        if r["hypothesis_label"] not in labels:
            labels.append(r["hypothesis_label"])
    if truth is None:
        raise InputError("CSV traces do not record the true hypothesis; pass it explicitly")
    true_index = labels.index(truth) if isinstance(truth, str) else int(truth)
    times = np.array(sorted({int(r["t"]) for r in rows}), dtype=np.int64)
    regular = tuple(sorted({int(r["agent"]) for r in rows}))
    n, m = max(regular) + 1, len(labels)
    local = np.full((times.size, n, m), np.nan)
    actual = np.full((times.size, n, m), np.nan)
    pos = {int(t): k for k, t in enumerate(times)}
    lab = {label: h for h, label in enumerate(labels)}
    with np.errstate(divide="ignore"):
        for r in rows:
            k, i, h = pos[int(r["t"])], int(r["agent"]), lab[r["hypothesis_label"]]
            local[k, i, h] = np.log(float(r["pi"]))
            actual[k, i, h] = np.log(float(r["mu"]))
    return Trace(times=times, local_log=local, actual_log=actual, regular=regular,
                 labels=tuple(labels), true_index=true_index, fingerprint="")


def load_trace(source, truth=None) -> Trace:
    """Read a trace written by ``export_trace``.  CSV traces need ``truth`` (label or index)."""
    path = Path(source)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            first = fh.read(1)
            fh.seek(0)
            if first == "{":
                return _load_jsonl(fh)
            return _load_csv(fh, truth)
    except OSError as exc:
        raise OSError(f"cannot read trace {path}: {exc.strerror or exc}") from exc
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed trace {path}: {exc}") from None
