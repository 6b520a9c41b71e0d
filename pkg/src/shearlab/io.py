"""Plain-text persistence: checkpoints, norm CSVs, key=value configs, SVG plots.

Every float is written with 17 significant digits, which round-trips any
IEEE double exactly.
"""
from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .confined import Grid1D, Profile1D
from .diagnostics import COLUMNS, NormRow, NormSeries
from .mixer import MixerState
from .profiles import ShearProfile, ShearSegment
from .pulsed import PulsedState
from .spectral import SpectralField2D, YSpectrum

CKPT_MAGIC = "SHEARLAB-CKPT"
CKPT_VERSION = 1

PathLike = Union[str, Path]


class SchemaMismatch(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def fmt(x: float) -> str:
    return "%.17g" % x


def _parse_float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", lineno) from None


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", lineno) from None


# ---------------------------------------------------------------------------
# key=value configs
# ---------------------------------------------------------------------------


def parse_kv(text: str) -> dict[str, str]:
    """One ``key=value`` per line; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        out[key] = value
    return out


def format_kv(values: dict[str, Any]) -> str:
    return "".join(f"{k}={_kv_value(v)}\n" for k, v in values.items())


def _kv_value(v: Any) -> str:
    if isinstance(v, float):
        return fmt(v)
    return str(v)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


State = Union[SpectralField2D, MixerState, PulsedState, Profile1D]


@dataclass
class Checkpoint:
    experiment: str
    t: float
    state: State
    config: dict[str, str] = field(default_factory=dict)
    series: Optional[NormSeries] = None


def _yspec_lines(name: str, s: YSpectrum) -> list[str]:
    lines = [f"{name} {len(s)}"]
    lines += [f"{int(l)} {fmt(c.real)} {fmt(c.imag)}" for l, c in zip(s.l, s.c)]
    return lines


def _state_lines(state: State) -> list[str]:
    if isinstance(state, SpectralField2D):
        lines = ["kind field2d", f"band {state.band}", f"err_budget {fmt(state.err_budget)}",
                 f"modes {len(state)}"]
        lines += [f"{int(a)} {int(b)} {fmt(c.real)} {fmt(c.imag)}"
                  for a, b, c in zip(state.kx, state.ky, state.amp)]
        return lines
    if isinstance(state, MixerState):
        lines = ["kind mixer", f"step {state.step_index}", f"h1 {fmt(state.h1)}",
                 f"hneg1 {fmt(state.hneg1)}"]
        return lines + _yspec_lines("f", state.f) + _yspec_lines("g", state.g)
    if isinstance(state, PulsedState):
        lines = ["kind pulsed", f"step {state.step}", f"modes {len(state.modes)}"]
        lines += [f"{k.kx} {k.ky} {fmt(lm)} {fmt(ph)} {fmt(state.shift[k])}"
                  for k, (lm, ph) in state.modes.items()]
        return lines
    if isinstance(state, Profile1D):
        lines = ["kind profile1d", f"half_width {fmt(state.grid.half_width)}",
                 f"values {state.grid.n_points}"]
        return lines + [fmt(v) for v in state.values]
    raise TypeError(f"cannot checkpoint {type(state).__name__}")


def _series_lines(series: Optional[NormSeries]) -> list[str]:
    if series is None:
        return ["series 0"]
    lines = [f"series {len(series)}", f"log_l2_offset {fmt(series.log_l2_offset)}"]
    for r in series.rows:
        lines.append(" ".join("-" if v is None else fmt(v) for v in r))
    return lines


def dumps_checkpoint(ckpt: Checkpoint) -> str:
    lines = [f"{CKPT_MAGIC} v{CKPT_VERSION}", f"experiment {ckpt.experiment}", f"t {fmt(ckpt.t)}",
             f"config {len(ckpt.config)}"]
    lines += [f"{k}={v}" for k, v in ckpt.config.items()]
    lines += _state_lines(ckpt.state)
    lines += _series_lines(ckpt.series)
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_checkpoint(ckpt: Checkpoint, path: PathLike) -> None:
    Path(path).write_text(dumps_checkpoint(ckpt))


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> tuple[int, str]:
        if self.pos >= len(self.lines):
            raise ParseError("unexpected end of file", self.pos + 1)
        self.pos += 1
        return self.pos, self.lines[self.pos - 1]

    def keyed(self, key: str) -> tuple[int, str]:
        lineno, line = self.next()
        parts = line.split(" ", 1)
        if parts[0] != key or len(parts) != 2:
            raise ParseError(f"expected '{key} <value>', got {line!r}", lineno)
        return lineno, parts[1]

    def count(self, key: str) -> int:
        lineno, v = self.keyed(key)
        n = _parse_int(v, lineno)
        if n < 0:
            raise ParseError("negative count", lineno)
        return n

    def fields(self, n: int) -> tuple[int, list[str]]:
        lineno, line = self.next()
        toks = line.split()
        if len(toks) != n:
            raise ParseError(f"expected {n} fields, got {len(toks)}", lineno)
        return lineno, toks


def _read_yspec(rd: _Reader, name: str) -> YSpectrum:
    return _read_pairs(rd, rd.count(name))


def _read_pairs(rd: _Reader, n: int) -> YSpectrum:
    ls, cs = [], []
    for _ in range(n):
        lineno, (l, re, im) = rd.fields(3)
        ls.append(_parse_int(l, lineno))
        cs.append(complex(_parse_float(re, lineno), _parse_float(im, lineno)))
    return YSpectrum(np.array(ls, dtype=np.int64), np.array(cs, dtype=np.complex128))


def _read_state(rd: _Reader) -> State:
    lineno, kind = rd.keyed("kind")
    try:
        if kind == "field2d":
            lb, band = rd.keyed("band")
            le, err = rd.keyed("err_budget")
            n = rd.count("modes")
            kx, ky, amp = [], [], []
            for _ in range(n):
                ln, (a, b, re, im) = rd.fields(4)
                kx.append(_parse_int(a, ln))
                ky.append(_parse_int(b, ln))
                amp.append(complex(_parse_float(re, ln), _parse_float(im, ln)))
            return SpectralField2D(np.array(kx, dtype=np.int64), np.array(ky, dtype=np.int64),
                                   np.array(amp, dtype=np.complex128), _parse_int(band, lb),
                                   _parse_float(err, le))
        if kind == "mixer":
            ls, step = rd.keyed("step")
            l1, h1 = rd.keyed("h1")
            l2, hm1 = rd.keyed("hneg1")
            f = _read_yspec(rd, "f")
            g = _read_yspec(rd, "g")
            return MixerState(f, g, _parse_float(h1, l1), _parse_float(hm1, l2), _parse_int(step, ls))
        if kind == "pulsed":
            ls, step = rd.keyed("step")
            n = rd.count("modes")
            modes, shift = {}, {}
            for _ in range(n):
                ln, (a, b, lm, ph, sh) = rd.fields(5)
                k = (_parse_int(a, ln), _parse_int(b, ln))
                modes[k] = (_parse_float(lm, ln), _parse_float(ph, ln))
                shift[k] = _parse_float(sh, ln)
            return PulsedState(modes, shift, _parse_int(step, ls))
        if kind == "profile1d":
            lw, hw = rd.keyed("half_width")
            n = rd.count("values")
            vals = []
            for _ in range(n):
                ln, (v,) = rd.fields(1)
                vals.append(_parse_float(v, ln))
            return Profile1D(Grid1D(_parse_float(hw, lw), n), np.array(vals))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"invalid {kind} state: {exc}", rd.pos) from exc
    raise ParseError(f"unknown state kind {kind!r}", lineno)


def _read_series(rd: _Reader) -> Optional[NormSeries]:
    n = rd.count("series")
    if n == 0:
        return None
    lo, off = rd.keyed("log_l2_offset")
    series = NormSeries(log_l2_offset=_parse_float(off, lo))
    for _ in range(n):
        ln, toks = rd.fields(len(COLUMNS))
        vals = [None if tok == "-" else _parse_float(tok, ln) for tok in toks]
        try:
            series.append(NormRow(*vals))
        except (ValueError, TypeError) as exc:
            raise ParseError(str(exc), ln) from exc
    return series


def loads_checkpoint(text: str) -> Checkpoint:
    rd = _Reader(text)
    lineno, header = rd.next()
    parts = header.split()
    if len(parts) != 2 or parts[0] != CKPT_MAGIC or not parts[1].startswith("v"):
        raise ParseError(f"not a checkpoint header: {header!r}", lineno)
    version = _parse_int(parts[1][1:], lineno)
    if version != CKPT_VERSION:
        raise SchemaMismatch(f"checkpoint schema v{version}, this reader expects v{CKPT_VERSION}")
    _, experiment = rd.keyed("experiment")
    lt, t = rd.keyed("t")
    n_cfg = rd.count("config")
    config = {}
    for _ in range(n_cfg):
        ln, line = rd.next()
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", ln)
        k, v = line.split("=", 1)
        config[k] = v
    state = _read_state(rd)
    series = _read_series(rd)
    ln, tail = rd.next()
    if tail != "end":
        raise ParseError(f"expected 'end', got {tail!r}", ln)
    return Checkpoint(experiment, _parse_float(t, lt), state, config, series)


def load_checkpoint(path: PathLike) -> Checkpoint:
    return loads_checkpoint(Path(path).read_text())


# ---------------------------------------------------------------------------
# Norm CSV
# ---------------------------------------------------------------------------


def dumps_csv(series: NormSeries) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in series.rows:
        w.writerow(["" if v is None else fmt(v) for v in r])
    return buf.getvalue()


def write_csv(series: NormSeries, path: PathLike) -> None:
    Path(path).write_text(dumps_csv(series))


def read_csv(path: PathLike) -> NormSeries:
    series = NormSeries()
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or tuple(header) != COLUMNS:
            raise ParseError(f"expected header {','.join(COLUMNS)}", 1)
        for lineno, row in enumerate(rd, 2):
            if len(row) != len(COLUMNS):
                raise ParseError(f"expected {len(COLUMNS)} cells, got {len(row)}", lineno)
            vals = [None if c == "" else _parse_float(c, lineno) for c in row]
            if vals[0] is None or vals[1] is None:
                raise ParseError("t and log_l2 are required", lineno)
            try:
                series.append(NormRow(*vals))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
    return series


# ---------------------------------------------------------------------------
# Shear profile files
# ---------------------------------------------------------------------------


def dumps_profile(profile: ShearProfile) -> str:
    """One ``segment <duration> <n>`` header per segment, then ``l re im`` lines."""
    lines = [f"segments {len(profile.segments)}"]
    for seg in profile.segments:
        lines.append(f"segment {fmt(seg.duration)} {len(seg.u)}")
        lines += [f"{int(l)} {fmt(c.real)} {fmt(c.imag)}" for l, c in zip(seg.u.l, seg.u.c)]
    return "\n".join(lines) + "\n"


def loads_profile(text: str) -> ShearProfile:
    rd = _Reader(text)
    n = rd.count("segments")
    segs = []
    for _ in range(n):
        ln, toks = rd.fields(3)
        if toks[0] != "segment":
            raise ParseError(f"expected 'segment', got {toks[0]!r}", ln)
        dur = _parse_float(toks[1], ln)
        u = _read_pairs(rd, _parse_int(toks[2], ln))
        try:
            segs.append(ShearSegment(u, dur))
        except ValueError as exc:
            raise ParseError(str(exc), ln) from exc
    return ShearProfile(tuple(segs))


# ---------------------------------------------------------------------------
# Eigenpair dump
# ---------------------------------------------------------------------------


def dumps_eigenpairs(pairs: list[tuple[float, Profile1D]], parity: str) -> str:
    grid = pairs[0][1].grid
    lines = [f"L={fmt(grid.half_width)} N={grid.n_points} parity={parity}"]
    lines += [f"{i} {fmt(lam)}" for i, (lam, _) in enumerate(pairs)]
    z = grid.z
    for j in range(grid.n_points):
        lines.append(" ".join([fmt(z[j])] + [fmt(v.values[j]) for _, v in pairs]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


def svg_plot(panels: list[tuple[str, np.ndarray, np.ndarray]], width: int = 640,
             panel_height: int = 220) -> str:
    """Stacked line plots; each panel is ``(title, x, y)`` drawn on linear axes."""
    margin_l, margin_r, margin_t, margin_b = 70, 20, 28, 30
    height = panel_height * len(panels)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for p, (title, x, y) in enumerate(panels):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        x, y = x[ok], y[ok]
        top = p * panel_height + margin_t
        h = panel_height - margin_t - margin_b
        w = width - margin_l - margin_r
        out.append(f'<text x="{margin_l}" y="{top - 8}" font-family="sans-serif" '
                   f'font-size="13">{_escape(title)}</text>')
        out.append(f'<rect x="{margin_l}" y="{top}" width="{w}" height="{h}" '
                   f'fill="none" stroke="#444" stroke-width="1"/>')
        if x.size == 0:
            continue
        x0, x1 = float(x.min()), float(x.max())
        y0, y1 = float(y.min()), float(y.max())
        if x1 == x0:
            x1 = x0 + 1.0
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        px = margin_l + (x - x0) / (x1 - x0) * w
        py = top + h - (y - y0) / (y1 - y0) * h
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        out.append(f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{pts}"/>')
        for val, yy in ((y1, top), (y0, top + h)):
            out.append(f'<text x="{margin_l - 6}" y="{yy + 4:.1f}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="10">{val:.4g}</text>')
        for val, xx in ((x0, margin_l), (x1, margin_l + w)):
            out.append(f'<text x="{xx:.1f}" y="{top + h + 14}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="10">{val:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def series_svg(series: NormSeries) -> str:
    t = series.t
    panels = [("log ||rho||_L2 (relative to start)", t, series.log_ratio())]
    if series.has("mix_scale"):
        panels.append(("mixing scale ||rho||_H-1 / ||rho||_L2", t, series.column("mix_scale")))
    return svg_plot(panels)
