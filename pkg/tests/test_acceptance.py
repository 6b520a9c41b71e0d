"""End-to-end acceptance gate: one test per criterion, each at its stated tolerance."""
import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from shearlab import io
from shearlab.cli import main
from shearlab.confined import (Grid1D, Operator1D, evolve_m, linear_fit, lower_bound_witness,
                               lowest_eigenpairs, sturm_count, unsubstitute)
from shearlab.diagnostics import extract_rate, fit_log_norm, ratio_growth_check, stagnation_check
from shearlab.experiments import (couette_modes, initial_datum, prefix, resolve_config,
                                  shear_profile, torus_run)
from shearlab.mixer import MixerState, a_of_t, build_schedule, h1_closed_form, transport_steady
from shearlab.profiles import ShearProfile
from shearlab.pulsed import PulsedState, closed_form_check, iterate
from shearlab.spectral import SpectralField2D, YSpectrum, norm_l2
from shearlab.viscous import SolverConfig, couette_series, diffusion_step, evolve

from test_mixer import j0_series, random_state

T_MAIN = 4.0
PROFILES = ("sin", "alternating", "mixer")


def test_criterion_1_pulsed_exactness(record_criterion):
    start = time.perf_counter()
    _, series = iterate(PulsedState.canonical(), n=50)
    elapsed = time.perf_counter() - start
    log_err = mix_err = 0.0
    for row in series.rows[1:]:
        log_ref, mix_ref = closed_form_check(int(row.t))
        log_err = max(log_err, abs(row.log_l2 - log_ref))
        mix_err = max(mix_err, abs(row.mix_scale - mix_ref))
    ok = len(series) == 51 and log_err <= 1e-12 and mix_err <= 1e-15 and elapsed < 1.0
    record_criterion(1, ok, f"log_err={log_err:.2g} mix_err={mix_err:.2g} time={elapsed:.3f}s")
    assert ok


def test_criterion_2_bessel_constant(record_criterion):
    start = time.perf_counter()
    a = a_of_t(1.0)
    elapsed = time.perf_counter() - start
    err = abs(a - j0_series(1.0))
    ok = round(a, 4) == 0.7652 and err <= 1e-12 and elapsed < 1.0
    record_criterion(2, ok, f"A={a:.16f} series_err={err:.2g} time={elapsed:.3f}s")
    assert ok


def test_criterion_3_mixer_contraction(record_criterion):
    start = time.perf_counter()
    sched, _ = build_schedule(YSpectrum.constant(1.0), YSpectrum.zero(), 3)
    elapsed = time.perf_counter() - start
    target = (abs(a_of_t(1.0)) + 2.0) / 3.0
    worst = max(abs(s.ratio - target) for s in sched.steps)
    peak = max(s.max_ratio for s in sched.steps)
    ok = len(sched.steps) == 3 and worst <= 1e-8 and peak <= 2.0 and elapsed < 30.0
    record_criterion(3, ok, f"target={target:.9f} worst_dev={worst:.2g} "
                            f"max_intermediate_ratio={peak:.6f} time={elapsed:.2f}s")
    assert ok


def test_criterion_4_h1_machinery(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    worst, bound_ok = 0.0, True
    for _ in range(100):
        state = random_state(rng)
        k0 = int(rng.integers(1, 8))
        t = float(rng.uniform(0.0, 1.0))
        direct = transport_steady(state, k0, t).h1
        closed = h1_closed_form(state, k0, t)
        worst = max(worst, abs(closed - direct) / direct)
        bound = 2 * state.h1**2 + 10 * math.pi * k0**2 * t**2 * state.l2**2
        bound_ok &= closed**2 <= bound and direct**2 <= bound
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and bound_ok and elapsed < 10.0
    record_criterion(4, ok, f"max_rel_err={worst:.2g} bound_ok={bound_ok} time={elapsed:.2f}s")
    assert ok


def test_criterion_5_viscous_solver(record_criterion):
    start = time.perf_counter()
    mu, t = 1.0, 0.8
    heat_err = 0.0
    for k in [(1, 0), (2, 3), (5, -4)]:
        rho = SpectralField2D.from_modes({k: 0.5, (-k[0], -k[1]): 0.5}, band=16)
        out = diffusion_step(rho, mu, t)
        heat_err = max(heat_err, abs(out.amplitude(*k) / 0.5 - math.exp(-mu * (k[0]**2 + k[1]**2) * t)))

    band = 32
    datum = SpectralField2D.from_modes({(1, 1): -0.25j, (1, -1): -0.25j, (-1, -1): 0.25j,
                                        (-1, 1): 0.25j, (2, 0): 0.1, (-2, 0): 0.1}, band=band)
    prof = ShearProfile.steady(YSpectrum.sin(1), 1.0)

    def solve(dt):
        return evolve(datum, prof, SolverConfig(mu=1.0, dt=dt, band=band),
                      sample_every=10**9)[0].to_half_dense(band)

    ref = solve(1.25e-4)
    errs = [float(np.max(np.abs(solve(dt) - ref))) for dt in (0.02, 0.01, 0.005)]
    order = min(math.log2(errs[i] / errs[i + 1]) for i in range(2))

    iso_field = initial_datum("sinx_cosy", 64)
    moved, _ = evolve(iso_field, prof, SolverConfig(mu=0.0, dt=1e-3, band=64), sample_every=10**9)
    iso = abs(norm_l2(moved) / norm_l2(iso_field) - 1.0)
    elapsed = time.perf_counter() - start
    ok = heat_err <= 1e-10 and order >= 1.9 and iso <= 1e-10 and elapsed < 30.0
    record_criterion(5, ok, f"heat_err={heat_err:.2g} strang_order={order:.3f} "
                            f"isometry_err={iso:.2g} time={elapsed:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def torus_runs():
    """One run to 2T per profile; the [0, T] run is its prefix (same steps, same samples)."""
    out = {}
    start = time.perf_counter()
    for name in PROFILES:
        cfg = resolve_config("main-theorem", {"profile": name, "T": str(T_MAIN)})
        assert cfg["mu"] == 1.0 and cfg["dt"] == 1e-3 and cfg["band"] == 64
        _, series = torus_run(cfg, 2 * T_MAIN)
        out[name] = (cfg, prefix(series, T_MAIN), series)
    out["_elapsed"] = time.perf_counter() - start
    return out


def test_criterion_6_main_theorem_properties(torus_runs, record_criterion):
    parts, ok = [], torus_runs["_elapsed"] < 300.0
    for name in PROFILES:
        _, short, long = torus_runs[name]
        c_t, c_2t = extract_rate(short), extract_rate(long)
        rel = abs(c_2t - c_t) / c_t
        inf, stag = stagnation_check(short, (T_MAIN / 2, T_MAIN))
        ok &= rel < 0.05 and stag and inf > 0
        parts.append(f"{name}: c2={c_t:.5f}->{c_2t:.5f} rel={rel:.2g} inf_mix={inf:.4g}")
    record_criterion(6, ok, "; ".join(parts) + f" time={torus_runs['_elapsed']:.1f}s")
    assert ok


def test_criterion_7_contrast_curve(torus_runs, record_criterion):
    start = time.perf_counter()
    cfg = torus_runs["sin"][0]
    datum = initial_datum(cfg["datum"], cfg["band"], cfg["seed"])
    couette = couette_series(couette_modes(datum), cfg["mu"], T_MAIN)
    c_class = fit_log_norm(couette).classification
    classes = {f"{name}@{tag}": fit_log_norm(series).classification
               for name in PROFILES
               for tag, series in (("T", torus_runs[name][1]), ("2T", torus_runs[name][2]))}
    elapsed = time.perf_counter() - start
    ok = c_class == "super_exponential" and all(c == "exponential" for c in classes.values()) \
        and elapsed < 10.0
    record_criterion(7, ok, f"couette={c_class} torus={classes} time={elapsed:.2f}s")
    assert ok


def test_criterion_8_confined_model(record_criterion):
    start = time.perf_counter()
    op = Operator1D(Grid1D())
    fine = Operator1D(op.grid.refined())
    rels = {}
    for parity in ("even", "odd"):
        a = lowest_eigenpairs(op, parity)[0][0]
        b = lowest_eigenpairs(fine, parity)[0][0]
        rels[parity] = abs(a - b) / b
    floor_ok = all(sturm_count(o, p, 1.25) == 0 for o in (op, fine) for p in ("even", "odd"))
    lam0, phi0 = lowest_eigenpairs(op, "even")[0]
    _, series = evolve_m(phi0, op, 4.0, 1e-3)
    decay = linear_fit(series)
    rate, wseries = lower_bound_witness(unsubstitute(phi0), op, 4.0, 1e-3)
    elapsed = time.perf_counter() - start
    decay_rel = abs(decay.rate - lam0) / lam0
    witness_rel = abs(rate - lam0) / lam0
    ok = (max(rels.values()) < 1e-3 and floor_ok and decay_rel < 0.01 and witness_rel < 0.01
          and wseries.meta["linear"] and elapsed < 60.0)
    record_criterion(8, ok, f"two_grid_rel={max(rels.values()):.2g} all_above_5/4={floor_ok} "
                            f"lambda0={lam0:.6f} decay_rel={decay_rel:.2g} witness_rel={witness_rel:.2g} "
                            f"witness_linear={wseries.meta['linear']} time={elapsed:.2f}s")
    assert ok


def test_criterion_9_ratio_growth(torus_runs, record_criterion):
    parts, ok = [], True
    for name in PROFILES:
        cfg = torus_runs[name][0]
        u_inf = shear_profile(cfg, 2 * T_MAIN).sup_norm_bound()
        for tag, series in (("T", torus_runs[name][1]), ("2T", torus_runs[name][2])):
            passed, growth = ratio_growth_check(series, cfg["mu"], u_inf)
            ok &= passed
            parts.append(f"{name}@{tag}: growth={growth:.3g}")
    record_criterion(9, ok, "; ".join(parts))
    assert ok


def test_criterion_10_determinism_and_persistence(tmp_path, record_criterion):
    start = time.perf_counter()
    args = ["run", "--preset", "main-theorem", "--set", "T=1", "--set", "profile=alternating"]
    texts = []
    for threads in ("1", "4"):
        out = tmp_path / f"threads{threads}"
        res = CliRunner().invoke(main, args + ["--out", str(out)], env={"SHEARLAB_THREADS": threads})
        assert res.exit_code in (0, 1), res.output
        texts.append((out / "norms.csv").read_bytes())
    identical = texts[0] == texts[1]
    path = tmp_path / "threads1" / "checkpoint.txt"
    raw = path.read_text()
    ck = io.load_checkpoint(path)
    again = io.dumps_checkpoint(ck)
    fresh = resolve_config("main-theorem", {"T": "1", "profile": "alternating"})
    state_ok = isinstance(ck.state, SpectralField2D) and ck.state.band == fresh["band"]
    elapsed = time.perf_counter() - start
    ok = identical and again == raw and state_ok and elapsed < 60.0
    record_criterion(10, ok, f"norms_identical={identical} checkpoint_bit_exact={again == raw} "
                             f"time={elapsed:.2f}s")
    assert ok
