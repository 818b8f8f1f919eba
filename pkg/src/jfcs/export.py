"""CSV export of run traces and their round-trip reader."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SLOT_HEADER = ("frame", "slot", "ue", "a_bps", "r_bps", "qhat_bits", "sum_q_bits", "L", "dL", "dL_ub")
FRAME_HEADER = ("frame", "ue", "ru", "beta", "uhat", "thetahat")
SLOT_FILE = "slots.csv"
FRAME_FILE = "frames.csv"
SUMMARY_FILE = "summary.json"


class ExportError(OSError):
    pass


def _f(x) -> str:
    # shortest repr that round-trips exactly
    return repr(float(x))


def _open(path: Path):
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def export_csv(trace, path) -> dict:
    """Write slot, frame and summary files into directory ``path``.

    Slot rows are one per (slot, UE), frame rows one per (frame, UE, RU).
    Returns the written file paths keyed by kind.
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out}: {exc}") from exc
    frames = trace.slot_frame
    slots = trace.slot_index
    files = {"slots": out / SLOT_FILE, "frames": out / FRAME_FILE, "summary": out / SUMMARY_FILE}
    with _open(files["slots"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SLOT_HEADER)
        for n in range(trace.n_slots):
            L, dL, ub = _f(trace.L[n]), _f(trace.dL[n]), _f(trace.dL_ub[n])
            for k in range(trace.a.shape[1]):
                w.writerow([int(frames[n]), int(slots[n]), k + 1, _f(trace.a[n, k]), _f(trace.r[n, k]),
                            _f(trace.qhat[n, k]), _f(trace.sum_q[n, k]), L, dL, ub])
    with _open(files["frames"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_HEADER)
        for t in range(trace.n_frames):
            for k, j in zip(*np.nonzero(trace.mask[t])):
                w.writerow([t + 1, k + 1, j + 1, _f(trace.beta[t, k, j]), _f(trace.uhat[t, k, j]),
                            _f(trace.thetahat[t, k, j])])
    with _open(files["summary"]) as fh:
        json.dump(trace.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files


def read_csv(path) -> dict:
    """Parse the files written by :func:`export_csv` back into arrays.

    Slot columns come back as (n_slots, K) arrays (L, dL, dL_ub as
    (n_slots,)); frame columns as (T, K, J) arrays with zeros off-path.
    """
    p = Path(path)
    try:
        with open(p / SLOT_FILE, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        with open(p / FRAME_FILE, encoding="utf-8", newline="") as fh:
            frows = list(csv.reader(fh))
        summary = json.loads((p / SUMMARY_FILE).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ExportError(f"cannot read trace from {p}: {exc}") from exc
    if tuple(rows[0]) != SLOT_HEADER or tuple(frows[0]) != FRAME_HEADER:
        raise ValueError(f"unexpected headers in {p}")
    out = {"summary": summary}
    body = rows[1:]
    k_n = max((int(r[2]) for r in body), default=0)
    n = len(body) // k_n if k_n else 0
    for i, name in enumerate(SLOT_HEADER[3:7], start=3):
        out[name] = np.array([float(r[i]) for r in body]).reshape(n, k_n)
    for i, name in enumerate(SLOT_HEADER[7:], start=7):
        out[name] = np.array([float(r[i]) for r in body[::k_n]]) if k_n else np.zeros(0)
    out["frame"] = np.array([int(r[0]) for r in body[::k_n]], int) if k_n else np.zeros(0, int)
    out["slot"] = np.array([int(r[1]) for r in body[::k_n]], int) if k_n else np.zeros(0, int)
    fbody = frows[1:]
    if fbody:
        t_n = max(int(r[0]) for r in fbody)
        kk = max(int(r[1]) for r in fbody)
        jj = max(int(r[2]) for r in fbody)
        for i, name in enumerate(FRAME_HEADER[3:], start=3):
            arr = np.zeros((t_n, kk, jj))
            for r in fbody:
                arr[int(r[0]) - 1, int(r[1]) - 1, int(r[2]) - 1] = float(r[i])
            out[name] = arr
    else:
        for name in FRAME_HEADER[3:]:
            out[name] = np.zeros((0, 0, 0))
    return out
