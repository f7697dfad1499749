"""Series ingestion and generation, and the on-disk formats for weights and traces."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, SeriesRangeError, ShapeError
from .net import Shape, Weights

WEIGHTS_MAGIC = "piranha-weights"
WEIGHTS_VERSION = "v1"
TRACE_HEADER = ["iter", "objective", "grad_norm", "alpha", "f_norm_inf", "ms"]
PAD_MODES = ("none", "hold")


@dataclass(frozen=True)
class Series:
    """Normalized samples plus the per-channel affine map back to raw units.

    ``raw = values * scale + offset``.
    """

    values: np.ndarray
    scale: np.ndarray
    offset: np.ndarray
    pad_mode: str = "none"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ShapeError(f"series values must be (L, m), got {v.shape}")
        if self.pad_mode not in PAD_MODES:
            raise ValueError(f"pad_mode must be one of {PAD_MODES}")
        scale = np.array(self.scale, dtype=np.float64).reshape(v.shape[1])
        offset = np.array(self.offset, dtype=np.float64).reshape(v.shape[1])
        for a in (v, scale, offset):
            a.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def from_raw(cls, raw, pad_mode="none") -> "Series":
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim == 1:
            raw = raw[:, None]
        lo, hi = raw.min(axis=0), raw.max(axis=0)
        offset = (hi + lo) / 2.0
        scale = (hi - lo) / 2.0
        # constant channel: map to 0 with unit scale
        scale = np.where(scale > 0, scale, 1.0)
        vals = np.clip((raw - offset) / scale, -1.0, 1.0)
        return cls(vals, scale, offset, pad_mode)

    @classmethod
    def identity(cls, values, pad_mode="none") -> "Series":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        m = values.shape[1]
        return cls(values, np.ones(m), np.zeros(m), pad_mode)

    def __len__(self):
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def denormalize(self, values=None) -> np.ndarray:
        v = self.values if values is None else np.asarray(values, dtype=np.float64)
        return v * self.scale + self.offset

    def normalize(self, raw) -> np.ndarray:
        return (np.asarray(raw, dtype=np.float64) - self.offset) / self.scale

    def require(self, length) -> np.ndarray:
        """Values with at least ``length`` rows, padded by holding the last row if allowed."""
        L = len(self)
        if length is None or length <= L:
            return self.values
        if self.pad_mode == "hold":
            pad = np.repeat(self.values[-1:], length - L, axis=0)
            return np.concatenate([self.values, pad])
        raise SeriesRangeError(
            f"series has {L} samples, need {length} (load with pad mode 'hold' to extend)"
        )

    def shift(self, k: int) -> "Series":
        return Series(self.values[k:], self.scale, self.offset, self.pad_mode)


def load_series(path, m=None, pad_mode="none") -> Series:
    """Read comma-separated samples, one time step per line, and normalize each channel to [-1, 1].

    ``#`` starts a comment.  When ``m`` is None the channel count comes from
    the first data line.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if m is None:
                m = len(fields)
            if len(fields) != m:
                raise DataError(f"{path}:{lineno}: expected {m} fields, got {len(fields)}")
            try:
                row = [float(f) for f in fields]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            if not all(math.isfinite(v) for v in row):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append(row)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 samples, found {len(rows)}")
    return Series.from_raw(np.array(rows), pad_mode)


def save_series(series_or_raw, path):
    """Write raw-unit samples as comma-separated text."""
    raw = series_or_raw.denormalize() if isinstance(series_or_raw, Series) else np.asarray(series_or_raw)
    if raw.ndim == 1:
        raw = raw[:, None]
    with open(path, "w") as fh:
        for row in raw:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def parse_kind(text: str):
    """Parse ``"sine:freq=0.02,phase=0"``-style generator strings into ``(kind, params)``.

    ``sum_of_sines`` takes ``components=f1/p1/a1;f2/p2/a2``.
    """
    kind, _, rest = text.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if key == "components":
                params[key] = [tuple(float(p) for p in c.split("/")) for c in val.split(";") if c]
            else:
                params[key] = float(val)
    return kind.strip(), params


_DEFAULT_COMPONENTS = [(1 / 50, 0.0, 0.5), (1 / 20, 0.0, 0.3)]


def _component(c):
    c = tuple(float(v) for v in c)
    if len(c) == 2:
        return c + (0.8,)
    if len(c) != 3:
        raise ValueError(f"sine component must be (freq, phase[, amp]), got {c}")
    return c


def _sine(t, freq, phase, amp):
    return amp * np.sin(2.0 * np.pi * freq * t + phase)


def gen_series(kind, L: int, m: int = 1, seed: int = 0, **params) -> Series:
    """Deterministic synthetic series with values inside [-1, 1].

    Channel 0 uses the given phase; further channels get phase offsets drawn
    from ``seed``.  Normalization metadata is the identity.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    shifts = np.concatenate([[0.0], rng.uniform(0.0, 2.0 * np.pi, size=m - 1)])
    t = np.arange(L, dtype=np.float64)
    cols = []
    for c in range(m):
        if kind == "sine":
            col = _sine(t, params.get("freq", 1 / 50), params.get("phase", 0.0) + shifts[c],
                        params.get("amp", 0.8))
        elif kind == "sum_of_sines":
            comps = [_component(c_) for c_ in params.get("components") or _DEFAULT_COMPONENTS]
            col = sum(_sine(t, f, p + shifts[c], a) for f, p, a in comps)
            total = sum(abs(a) for _, _, a in comps)
            if total > 1.0:
                col = col / total
        elif kind == "square":
            s = _sine(t, params.get("freq", 1 / 50), params.get("phase", 0.0) + shifts[c], 1.0)
            col = params.get("amp", 0.8) * np.where(s >= 0, 1.0, -1.0)
        else:
            raise ValueError(f"unknown series kind {kind!r}")
        cols.append(col)
    return Series.identity(np.stack(cols, axis=1))


def _fmt(v: float) -> str:
    return float(v).hex()


def _parse_float(tok: str) -> float:
    return float.fromhex(tok) if "x" in tok.lower() else float(tok)


def save_weights(w: Weights, path):
    lines = [f"{WEIGHTS_MAGIC} {WEIGHTS_VERSION} {w.n} {w.m}"]
    lines += [" ".join(_fmt(v) for v in row) for row in w.F]
    lines += [" ".join(_fmt(v) for v in row) for row in w.G]
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path) -> Weights:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty weights file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: not a weights file")
    if head[1] != WEIGHTS_VERSION:
        raise FormatError(f"{path}: unsupported version {head[1]}")
    try:
        n, m = int(head[2]), int(head[3])
    except ValueError:
        raise FormatError(f"{path}: bad dimensions in header") from None
    Shape(m, n)
    body = lines[1:]
    if len(body) != 2 * n:
        raise FormatError(f"{path}: expected {2 * n} matrix rows, found {len(body)}")
    try:
        rows = [[_parse_float(t) for t in ln.split()] for ln in body]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    F, G = rows[:n], rows[n:]
    if any(len(r) != n for r in F) or any(len(r) != m + 1 for r in G):
        raise FormatError(f"{path}: row lengths do not match n={n}, m={m}")
    return Weights(np.array(F), np.array(G))


def write_trace(trace, path, timing=False):
    """CSV with one row per trace record.  ``ms`` is written as 0 unless ``timing`` is set."""
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TRACE_HEADER)
            for r in trace.rows:
                wr.writerow([r.iter, repr(r.objective), repr(r.grad_norm), repr(r.alpha),
                             repr(r.f_norm_inf), repr(r.ms if timing else 0.0)])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace(path):
    """Rows of a trace file as dicts of floats (``iter`` as int)."""
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != TRACE_HEADER:
            raise FormatError(f"{path}: unexpected trace header {rd.fieldnames}")
        return [{k: (int(v) if k == "iter" else float(v)) for k, v in row.items()} for row in rd]


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
