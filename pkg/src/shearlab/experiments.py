"""Preset pipelines behind ``shearlab run`` and ``shearlab resume``.

Each preset turns a flat ``key=value`` configuration into a norm ledger, a
list of verdicts and a checkpoint.  Pipelines are deterministic functions of
their configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import confined as c1d
from .diagnostics import (CURV_TOL, STAG_FLOOR, NormSeries, Verdict, extract_rate,
                          fit_log_norm, ratio_growth_check, ratio_growth_coefficients,
                          stagnation_check)
from .io import Checkpoint, dumps_csv, dumps_eigenpairs
from .mixer import (BISECT_TOL, MixerSchedule, MixerState, a_of_t, build_schedule,
                    extend_schedule)
from .profiles import ShearProfile
from .pulsed import LatticeMap, PulsedState, closed_form_check, iterate
from .spectral import SpectralField2D, YSpectrum, random_field
from .viscous import SolverConfig, couette_series, evolve

RATE_TOL = 0.05
MIXER_RATIO_TOL = 1e-8


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    kind: type
    default: object
    check: Optional[Callable[[object], bool]] = None
    hint: str = ""
    choices: tuple = ()


def _pos(x) -> bool:
    return x > 0


TORUS = {
    "mu": Param(float, 1.0, _pos, "> 0"),
    "dt": Param(float, 1e-3, lambda x: 0 < x <= 0.5, "in (0, 0.5]"),
    "T": Param(float, 4.0, _pos, "> 0"),
    "band": Param(int, 64, lambda x: 8 <= x <= 512, "in [8, 512]"),
    "oversample": Param(int, 2, lambda x: 2 <= x <= 8, "in [2, 8]"),
    "tail_tol": Param(float, 1e-6, lambda x: 0 < x < 1, "in (0, 1)"),
    "sample_every": Param(int, 10, _pos, ">= 1"),
    "profile": Param(str, "sin", choices=("sin", "alternating", "mixer")),
    "half_period": Param(float, 0.5, _pos, "> 0"),
    "mixer_steps": Param(int, 3, lambda x: 1 <= x <= 4, "in [1, 4]"),
    "datum": Param(str, "sinx_cosy", choices=("sinx_cosy", "cosx", "sinx", "random")),
    "seed": Param(int, 0),
    "stag_floor": Param(float, STAG_FLOOR, _pos, "> 0"),
    "curv_tol": Param(float, CURV_TOL, _pos, "> 0"),
}

PRESETS: dict[str, dict[str, Param]] = {
    "main-theorem": dict(TORUS),
    "appendix-ratio": {**TORUS, "couette_T": Param(float, 10.0, _pos, "> 0")},
    "couette-contrast": dict(TORUS),
    "mixer": {
        "n_steps": Param(int, 3, lambda x: 1 <= x <= 4, "in [1, 4]"),
        "tolerance": Param(float, BISECT_TOL, lambda x: 0 < x < 1e-3, "in (0, 1e-3)"),
    },
    "pulsed": {
        "n": Param(int, 20, lambda x: 0 <= x <= 1000, "in [0, 1000]"),
        "tau": Param(float, 1.0, lambda x: x >= 0, ">= 0"),
        "map": Param(str, "shear", choices=("shear", "cat")),
        "stag_floor": Param(float, STAG_FLOOR, _pos, "> 0"),
        "curv_tol": Param(float, CURV_TOL, _pos, "> 0"),
    },
    "model-1d": {
        "L": Param(float, 12.0, lambda x: 2 <= x <= 40, "in [2, 40]"),
        "N": Param(int, 2401, lambda x: x >= 101 and x % 2 == 1, "odd, >= 101"),
        "dt": Param(float, 1e-3, lambda x: 0 < x <= 0.1, "in (0, 0.1]"),
        "T": Param(float, 4.0, _pos, "> 0"),
        "count": Param(int, 4, lambda x: 1 <= x <= 50, "in [1, 50]"),
    },
}


def resolve_config(preset: str, overrides: dict[str, str]) -> dict[str, object]:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    schema = PRESETS[preset]
    cfg = {k: p.default for k, p in schema.items()}
    for key, raw in overrides.items():
        if key not in schema:
            raise ConfigError(f"preset {preset} has no setting {key!r}")
        p = schema[key]
        try:
            val = p.kind(raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot read {raw!r} as {p.kind.__name__}") from None
        if p.choices and val not in p.choices:
            raise ConfigError(f"{key}: {val!r} not in {', '.join(p.choices)}")
        if p.check is not None and not p.check(val):
            raise ConfigError(f"{key}={raw} out of range ({p.hint})")
        cfg[key] = val
    return cfg


def config_strings(cfg: dict[str, object]) -> dict[str, str]:
    return {k: ("%.17g" % v if isinstance(v, float) else str(v)) for k, v in cfg.items()}


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    preset: str
    series: NormSeries
    verdicts: list[Verdict]
    checkpoint: Checkpoint
    extra_files: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)


# ---------------------------------------------------------------------------
# Torus runs
# ---------------------------------------------------------------------------


def initial_datum(name: str, band: int, seed: int = 0) -> SpectralField2D:
    if name == "sinx_cosy":
        modes = {(1, 1): -0.25j, (1, -1): -0.25j, (-1, -1): 0.25j, (-1, 1): 0.25j}
    elif name == "cosx":
        modes = {(1, 0): 0.5, (-1, 0): 0.5}
    elif name == "sinx":
        modes = {(1, 0): -0.5j, (-1, 0): 0.5j}
    elif name == "random":
        return random_field(np.random.default_rng(seed), min(6, band), 12, decay=2.0).with_band(band)
    else:
        raise ConfigError(f"unknown datum {name!r}")
    return SpectralField2D.from_modes(modes, band=band)


_MIXER_CACHE: dict[int, MixerSchedule] = {}


def mixer_schedule(n_steps: int = 3) -> MixerSchedule:
    if n_steps not in _MIXER_CACHE:
        _MIXER_CACHE[n_steps] = build_schedule(YSpectrum.constant(1.0), YSpectrum.zero(), n_steps)[0]
    return _MIXER_CACHE[n_steps]


def shear_profile(cfg: dict, duration: float) -> ShearProfile:
    kind = cfg["profile"]
    if kind == "sin":
        return ShearProfile.steady(YSpectrum.sin(1), duration)
    if kind == "alternating":
        return ShearProfile.alternating(YSpectrum.sin(1), cfg["half_period"], duration)
    if kind == "mixer":
        return mixer_schedule(cfg["mixer_steps"]).profile().cycled(duration)
    raise ConfigError(f"unknown profile {kind!r}")


def solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(mu=cfg["mu"], dt=cfg["dt"], band=cfg["band"],
                        oversample=cfg["oversample"], tail_tol=cfg["tail_tol"])


def torus_run(cfg: dict, t_end: float, start: Optional[Checkpoint] = None):
    """Evolve the configured datum to ``t_end``, optionally from a checkpoint."""
    solver = solver_config(cfg)
    full = shear_profile(cfg, t_end)
    if start is None:
        field0 = initial_datum(cfg["datum"], cfg["band"], cfg["seed"])
        return evolve(field0, full, solver, cfg["sample_every"])
    if not start.t < t_end:
        return start.state, start.series
    return evolve(start.state.with_band(cfg["band"]), full.after(start.t), solver,
                  cfg["sample_every"], t0=start.t, series=start.series)


def prefix(series: NormSeries, t_max: float) -> NormSeries:
    out = NormSeries(meta=dict(series.meta), log_l2_offset=series.log_l2_offset)
    out.extend(r for r in series.rows if r.t <= t_max * (1 + 1e-12))
    return out


def _class_verdict(name: str, series: NormSeries, cfg: dict, expected: str) -> Verdict:
    fit = fit_log_norm(series, curv_tol=cfg["curv_tol"])
    return Verdict(name, fit.classification == expected,
                   f"{fit.classification} slope={fit.slope:.6g} curvature={fit.curvature:.3g}")


def _stagnation_verdict(name: str, series: NormSeries, cfg: dict, t_end: float,
                        expect_fail: bool = False) -> Verdict:
    inf, ok = stagnation_check(series, (0.5 * t_end, t_end), stag_floor=cfg["stag_floor"])
    return Verdict(name, ok, f"inf={inf:.6g}", expect_fail=expect_fail)


def _ratio_verdict(name: str, series: NormSeries, mu: float, u_inf: float,
                   window=None) -> Verdict:
    ok, growth = ratio_growth_check(series, mu, u_inf, window)
    lin, sq = ratio_growth_coefficients(mu, u_inf)
    return Verdict(name, ok, f"growth={growth:.6g} bound_u={lin:.6g} bound_u2={sq:.6g}")


def _ordering_verdict(series: NormSeries) -> Verdict:
    lo = series.column("log_hneg1")
    mid = series.column("log_l2")
    hi = series.column("log_h1")
    ok = bool(np.all(lo <= mid + 1e-14) and np.all(mid <= hi + 1e-14))
    return Verdict("norm-ordering", ok, "hneg1<=l2<=h1")


def torus_verdicts(cfg: dict, series: NormSeries, t_end: float) -> list[Verdict]:
    """Checks on a run over ``[0, 2T]`` against its ``[0, T]`` prefix."""
    big_t = 0.5 * t_end
    short = prefix(series, big_t)
    c_t, c_2t = extract_rate(short), extract_rate(series)
    rel = abs(c_2t - c_t) / c_t
    u_inf = shear_profile(cfg, t_end).sup_norm_bound()
    l2 = series.column("log_l2")
    return [
        Verdict("extracted-rate-stable", rel < RATE_TOL,
                f"c2(T)={c_t:.6g} c2(2T)={c_2t:.6g} rel={rel:.3g}"),
        _stagnation_verdict("stagnation", short, cfg, big_t),
        _stagnation_verdict("stagnation-2T", series, cfg, t_end),
        _class_verdict("decay-class", short, cfg, "exponential"),
        _class_verdict("decay-class-2T", series, cfg, "exponential"),
        _ratio_verdict("ratio-growth", short, cfg["mu"], u_inf, (0.5 * big_t, big_t)),
        _ordering_verdict(series),
        Verdict("l2-monotone", bool(np.all(np.diff(l2) < 0)), "strict L2 decrease"),
    ]


def _torus_checkpoint(preset, cfg, fld, series) -> Checkpoint:
    return Checkpoint(preset, series.rows[-1].t, fld, config_strings(cfg), series)


def run_main_theorem(cfg: dict, start: Optional[Checkpoint] = None) -> RunResult:
    t_end = 2.0 * cfg["T"]
    fld, series = torus_run(cfg, t_end, start)
    return RunResult("main-theorem", series, torus_verdicts(cfg, series, t_end),
                     _torus_checkpoint("main-theorem", cfg, fld, series))


def run_appendix_ratio(cfg: dict, start: Optional[Checkpoint] = None) -> RunResult:
    t_end = cfg["T"]
    fld, series = torus_run(cfg, t_end, start)
    u_inf = shear_profile(cfg, t_end).sup_norm_bound()
    couette = couette_series([(1, 0.0)], cfg["mu"], cfg["couette_T"])
    verdicts = [_ratio_verdict("ratio-growth-torus", series, cfg["mu"], u_inf),
                _ratio_verdict("ratio-growth-couette", couette, cfg["mu"], 1.0)]
    res = RunResult("appendix-ratio", series, verdicts,
                    _torus_checkpoint("appendix-ratio", cfg, fld, series))
    res.extra_files["couette_norms.csv"] = dumps_csv(couette)
    return res


def couette_modes(fld: SpectralField2D) -> list[tuple[int, float, float]]:
    """Kelvin modes matching the ``kx > 0`` half of a torus datum."""
    return [(int(a), float(b), abs(complex(c)))
            for a, b, c in zip(fld.kx, fld.ky, fld.amp) if a > 0]


def run_couette_contrast(cfg: dict, start: Optional[Checkpoint] = None) -> RunResult:
    t_end = cfg["T"]
    datum = initial_datum(cfg["datum"], cfg["band"], cfg["seed"])
    couette = couette_series(couette_modes(datum), cfg["mu"], t_end)
    fld, torus = torus_run(cfg, t_end, start)
    verdicts = [_class_verdict("couette-class", couette, cfg, "super_exponential"),
                _class_verdict("torus-class", torus, cfg, "exponential")]
    res = RunResult("couette-contrast", couette, verdicts,
                    _torus_checkpoint("couette-contrast", cfg, fld, torus))
    res.extra_files["torus_norms.csv"] = dumps_csv(torus)
    return res


# ---------------------------------------------------------------------------
# Mixer
# ---------------------------------------------------------------------------


def mixer_verdicts(sched: MixerSchedule, l2: float) -> list[Verdict]:
    target = sched.target_ratio
    ratios = [s.ratio for s in sched.steps]
    worst = max(abs(r - target) for r in ratios)
    mean = float(np.mean(ratios))
    max_ratio = max(s.max_ratio for s in sched.steps)
    h1_ok, prev = True, None
    for s in sched.steps:
        if prev is not None:
            bound = 2 * prev**2 + 10 * math.pi * s.k**2 * s.t**2 * l2**2
            h1_ok &= s.h1_after**2 <= bound * (1 + 1e-12)
        prev = s.h1_after
    return [
        Verdict("hneg1-geometric", worst <= MIXER_RATIO_TOL, f"ratio={mean:.4f} maxdev={worst:.3g}"),
        Verdict("intermediate-bound", max_ratio <= 2.0, f"max={max_ratio:.6g}"),
        Verdict("h1-growth-bound", h1_ok, f"k={[s.k for s in sched.steps]}"),
    ]


def run_mixer(cfg: dict, start: Optional[Checkpoint] = None) -> RunResult:
    if start is None:
        sched, series = build_schedule(YSpectrum.constant(1.0), YSpectrum.zero(), cfg["n_steps"],
                                       tol=cfg["tolerance"])
    else:
        state: MixerState = start.state
        sched = MixerSchedule(a_of_t(1.0), final_state=state)
        n_more = cfg["n_steps"] - state.step_index
        series = start.series
        if n_more > 0:
            sched, series = extend_schedule(sched, series, n_more, tol=cfg["tolerance"])
    l2 = sched.final_state.l2
    verdicts = mixer_verdicts(sched, l2) if sched.steps else []
    ckpt = Checkpoint("mixer", float(sched.final_state.step_index), sched.final_state,
                      config_strings(cfg), series)
    return RunResult("mixer", series, verdicts, ckpt)


# ---------------------------------------------------------------------------
# Pulsed cascade
# ---------------------------------------------------------------------------


def run_pulsed(cfg: dict, start: Optional[Checkpoint] = None) -> RunResult:
    lmap = LatticeMap.shear() if cfg["map"] == "shear" else LatticeMap.cat()
    ref = PulsedState.canonical()
    if start is None:
        state, series = iterate(ref, lmap, cfg["n"], cfg["tau"])
    else:
        state = start.state
        state, series = iterate(state, lmap, max(0, cfg["n"] - state.step), cfg["tau"],
                                reference=ref, series=start.series)
    verdicts = []
    if cfg["map"] == "shear" and cfg["tau"] == 1.0:
        errs = [(abs(r.log_l2 - closed_form_check(int(r.t))[0]),
                 abs(r.mix_scale - closed_form_check(int(r.t))[1])) for r in series.rows]
        e_log = max(e[0] for e in errs)
        e_mix = max(e[1] for e in errs)
        verdicts.append(Verdict("pulsed-closed-form", e_log <= 1e-12 and e_mix <= 1e-15,
                                f"log_err={e_log:.3g} mix_err={e_mix:.3g}"))
    mix = series.column("mix_scale")
    verdicts.append(Verdict("mix-monotone", bool(np.all(np.diff(mix) < 0)), "strictly decreasing"))
    if len(series) >= 16:
        verdicts.append(_class_verdict("decay-class", series, cfg, "super_exponential"))
    t = series.t
    inf, ok = stagnation_check(series, (0.5 * t[-1], t[-1]), stag_floor=cfg["stag_floor"])
    verdicts.append(Verdict("stagnation", ok, f"inf={inf:.6g}", expect_fail=True))
    ckpt = Checkpoint("pulsed", float(state.step), state, config_strings(cfg), series)
    return RunResult("pulsed", series, verdicts, ckpt)


# ---------------------------------------------------------------------------
# 1D confined model
# ---------------------------------------------------------------------------


def run_model_1d(cfg: dict, start: Optional[Checkpoint] = None) -> RunResult:
    grid = c1d.Grid1D(cfg["L"], cfg["N"])
    op = c1d.Operator1D(grid)
    op2 = c1d.Operator1D(grid.refined())
    verdicts, extra = [], {}
    lams = {}
    for parity in ("even", "odd"):
        pairs = c1d.lowest_eigenpairs(op, parity, cfg["count"])
        lams[parity] = [p[0] for p in pairs]
        lam2 = c1d.lowest_eigenpairs(op2, parity, 1)[0][0]
        rel = abs(lam2 - pairs[0][0]) / pairs[0][0]
        verdicts.append(Verdict(f"two-grid-{parity}", rel < 1e-3,
                                f"lambda={pairs[0][0]:.8g} refined={lam2:.8g} rel={rel:.3g}"))
        extra[f"eigenpairs_{parity}.txt"] = dumps_eigenpairs(pairs, parity)
    merged = sorted(lams["even"] + lams["odd"])
    verdicts.append(Verdict("spectrum-floor", merged[0] > 1.25, f"min={merged[0]:.8g}"))
    verdicts.append(Verdict("simple-spectrum", bool(np.all(np.diff(merged) > 1e-6)),
                            f"min_gap={float(np.min(np.diff(merged))) if len(merged) > 1 else math.inf:.6g}"))
    lam0, phi0 = c1d.lowest_eigenpairs(op, "even", 1)[0]
    read = c1d.half_line_readout(grid)
    if start is None:
        l0 = c1d.unsubstitute(phi0)
        m0 = c1d.substitute(l0)
        m, series = c1d.evolve_m(m0, op, cfg["T"], cfg["dt"], readout=read)
    else:
        m, series = start.state, start.series
        if start.t < cfg["T"]:
            m, series = c1d.evolve_m(m, op, cfg["T"] - start.t, cfg["dt"], readout=read,
                                     t0=start.t, series=series)
    fit = c1d.linear_fit(series)
    rel = abs(fit.rate - lam0) / lam0
    verdicts.append(Verdict("ground-decay", rel < 0.01, f"rate={fit.rate:.8g} lambda0={lam0:.8g}"))
    verdicts.append(Verdict("witness-linear", fit.linear,
                            f"curvature={fit.curvature:.3g} slope={fit.slope:.6g}"))
    ckpt = Checkpoint("model-1d", series.rows[-1].t, m, config_strings(cfg), series)
    return RunResult("model-1d", series, verdicts, ckpt, extra)


RUNNERS = {
    "main-theorem": run_main_theorem,
    "mixer": run_mixer,
    "pulsed": run_pulsed,
    "model-1d": run_model_1d,
    "couette-contrast": run_couette_contrast,
    "appendix-ratio": run_appendix_ratio,
}


def run_preset(preset: str, overrides: dict[str, str],
               start: Optional[Checkpoint] = None) -> RunResult:
    cfg = resolve_config(preset, overrides)
    return RUNNERS[preset](cfg, start)
