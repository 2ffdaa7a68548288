"""
Acceptance criteria, one test each. Every test prints a single
``criterion N PASS|FAIL`` line and fails on FAIL.
"""

import time

import numpy as np

from conftest import crandn, random_hermitian_psd, sign_test_pvalue, theorem1_instance
from pilotfree.grid import GridDims, PatternKind, re_index, re_position, select_pattern_kind
from pilotfree.harness import SimConfig, per_seed_ser, sweep
from pilotfree.harness.cli import main as cli_main
from pilotfree.harness.results import to_csv_text
from pilotfree.la_core import hermitian_dominant_eig, svd
from pilotfree.rx_cca import ViewPair, cca_two_view, maxvar_projector_solution, resolve_phase
from pilotfree.txchain import qpsk_demap, qpsk_map, random_qpsk

INF = float("inf")
KMH = 1 / 3.6
ALPHA = 0.05


def test_theorem1_exact_recovery(criterion):
    t0 = time.perf_counter()
    nbar = 16
    worst = 0.0
    count = 0
    rng = np.random.default_rng(1)
    for n_layers in (1, 2):
        for n_r in (2, 4):
            for _ in range(25):
                views, x_c = theorem1_instance(rng, n_layers, n_r, nbar)
                sol = resolve_phase(cca_two_view(views), x_c[0])
                err = np.max(np.abs(sol.g * np.sqrt(nbar) - x_c))
                worst = max(worst, err)
                count += 1
    elapsed = time.perf_counter() - t0
    criterion(1, "noiseless exact recovery", count == 100 and worst < 1e-6 and elapsed < 10,
              f"{count} instances, max error {worst:.2e}, {elapsed:.2f} s")


def test_solver_equivalence(criterion):
    rng = np.random.default_rng(2)
    worst = 1.0
    for k in range(50):
        n_layers, n_r = (1, 2) if k % 3 == 0 else (2, 4) if k % 3 == 1 else (2, 2)
        views, _ = theorem1_instance(rng, n_layers, n_r, 16)
        s = [0.0, 0.1, 0.5, 1.0][k % 4]
        noisy = ViewPair(views.Y1 + s * crandn(rng, n_r, 16), views.Y2 + s * crandn(rng, n_r, 16))
        g_red = cca_two_view(noisy).g
        g_mv, _ = maxvar_projector_solution(noisy)
        worst = min(worst, abs(np.vdot(g_red, g_mv)))
    criterion(2, "reduced solver matches projector-sum solver", worst >= 1 - 1e-8,
              f"min |<g, g_maxvar>| = {worst:.12f} over 50 instances")


def test_end_to_end_zero_error(criterion):
    t0 = time.perf_counter()
    cfg = SimConfig(n_rb=12, n_t=8, n_r=2, layers=2, delay_spread=0.0, speed=0.0,
                    receivers=("cca",), sweep_points=(INF,), seeds=5, frames_per_seed=5).validate()
    res = sweep(cfg)
    errs = [r.err_count for r in res.rows]
    counts = [r.re_count for r in res.rows]
    elapsed = time.perf_counter() - t0
    criterion(3, "noiseless flat two-layer CCA", len(errs) == 2 and sum(errs) == 0 and elapsed < 30,
              f"errors {errs} over {counts} REs, {elapsed:.1f} s")


def test_interference_robustness(criterion):
    t0 = time.perf_counter()
    cfg = SimConfig(n_rb=12, n_t=8, n_r=2, layers=2, mode="interference", delay_spread=30e-9,
                    speed=3 * KMH, snr_db=INF, sweep_axis="sir_db",
                    sweep_points=(-10.0, -5.0, 0.0, 5.0, 10.0), seeds=5, frames_per_seed=5,
                    receivers=("cca", "pilot")).validate()
    res = sweep(cfg, workers=2)
    cca = {p: res.get(p, "cca").ser for p in cfg.sweep_points}
    pilot_lo, pilot_hi = res.get(-10.0, "pilot").ser, res.get(10.0, "pilot").ser
    elapsed = time.perf_counter() - t0
    ok = max(cca.values()) < 1e-3 and pilot_lo > 0 and pilot_lo >= 10 * pilot_hi and elapsed < 300
    criterion(4, "CCA flat under interference, pilot receiver degrades", ok,
              f"max CCA SER {max(cca.values()):.2e}; pilot SER {pilot_lo:.3g} at -10 dB vs "
              f"{pilot_hi:.3g} at +10 dB; {elapsed:.1f} s")


def test_subgrid_trend(criterion):
    t0 = time.perf_counter()
    cfg = SimConfig(n_rb=50, n_t=8, n_r=2, delay_spread=300e-9, speed=3 * KMH, scs=30e3,
                    n_per_rb=8, kind="time", snr_db=15.0, receivers=("cca",), sweep_axis="n_bsg",
                    sweep_points=(1, 5, 50), seeds=20, frames_per_seed=2).validate()
    ser = {p: per_seed_ser(cfg, i) for i, p in enumerate(cfg.sweep_points)}
    p_50, w50, l50 = sign_test_pvalue(ser[5], ser[50])
    p_1, w1, l1 = sign_test_pvalue(ser[5], ser[1])
    elapsed = time.perf_counter() - t0
    ok = p_50 < ALPHA and p_1 < ALPHA and elapsed < 900
    means = ", ".join(f"N_BSG={k}: {v.mean():.3g}" for k, v in ser.items())
    criterion(5, "N_BSG=5 beats 1 and 50 at DS=300 ns", ok,
              f"{means}; 5<50 in {w50}/{w50 + l50} seeds p={p_50:.3g}; "
              f"5<1 in {w1}/{w1 + l1} seeds p={p_1:.3g}; {elapsed:.1f} s")


def _orientation_ser(ds, speed_kmh):
    cfg = SimConfig(n_rb=50, n_t=8, n_r=2, delay_spread=ds, speed=speed_kmh * KMH, scs=30e3,
                    n_per_rb=8, n_bsg=2, snr_db=5.0, receivers=("cca",), sweep_axis="pattern",
                    sweep_points=("time", "frequency"), seeds=20, frames_per_seed=2).validate()
    return per_seed_ser(cfg, 0), per_seed_ser(cfg, 1)


def _cli_recommendation(capsys, ds, speed_kmh):
    capsys.readouterr()
    cli_main(["coherence", "--scs", "30e3", "--ds", str(ds), "--speed-kmh", str(speed_kmh),
              "--carrier", "4e9"])
    out = capsys.readouterr().out
    return out.split("recommended pattern:")[1].strip()


def test_pattern_orientation_trend(criterion, capsys):
    t0 = time.perf_counter()
    a_time, a_freq = _orientation_ser(30e-9, 60.0)
    b_time, b_freq = _orientation_ser(300e-9, 1.0)
    p_a, wa, la = sign_test_pvalue(a_freq, a_time)
    p_b, wb, lb = sign_test_pvalue(b_time, b_freq)
    rec_a = _cli_recommendation(capsys, 30e-9, 60)
    rec_b = _cli_recommendation(capsys, 300e-9, 1)
    elapsed = time.perf_counter() - t0
    ok = (p_a < ALPHA and p_b < ALPHA and rec_a == "frequency" and rec_b == "time"
          and elapsed < 900)
    criterion(6, "frequency repetition wins in setup A, time repetition in setup B", ok,
              f"A: time {a_time.mean():.3g} vs freq {a_freq.mean():.3g}, freq better in "
              f"{wa}/{wa + la} seeds p={p_a:.3g}; B: time {b_time.mean():.3g} vs freq "
              f"{b_freq.mean():.3g}, time better in {wb}/{wb + lb} seeds p={p_b:.3g}; "
              f"CLI recommends {rec_a} / {rec_b}; {elapsed:.1f} s")


def test_baseline_sanity(criterion):
    cfg = SimConfig(n_rb=12, n_t=8, n_r=2, layers=2, delay_spread=300e-9, speed=30 * KMH,
                    receivers=("pilot", "pchan"),
                    sweep_points=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
                    seeds=10, frames_per_seed=2).validate()
    res = sweep(cfg, workers=2)
    pairs = [(res.get(p, "pchan", layer).ser, res.get(p, "pilot", layer).ser)
             for p in cfg.sweep_points for layer in (0, 1)]
    frac = np.mean([a <= b for a, b in pairs])
    noiseless = []
    for layers in (1, 2):
        c = SimConfig(n_rb=12, n_t=8, n_r=2, layers=layers, delay_spread=300e-9, speed=30 * KMH,
                      receivers=("pchan",), sweep_points=(INF,), seeds=5,
                      frames_per_seed=2).validate()
        noiseless += [r.err_count for r in sweep(c).rows]
    ok = frac >= 0.95 and sum(noiseless) == 0
    criterion(7, "PCHAN bounds the pilot receiver; noiseless PCHAN is error free", ok,
              f"PCHAN <= pilot at {frac:.0%} of {len(pairs)} points; noiseless errors {noiseless}")


def test_determinism(criterion):
    cfg = SimConfig(n_rb=6, n_bsg=3, layers=2, delay_spread=100e-9, speed=10.0,
                    sweep_points=(0.0, 10.0), seeds=4, frames_per_seed=2).validate()
    texts = [to_csv_text(sweep(cfg, workers=w).rows).encode() for w in (1, 1, 2, 3)]
    ok = all(t == texts[0] for t in texts)
    criterion(8, "byte-identical CSV across runs and worker counts", ok,
              f"{len(texts)} runs, worker counts 1, 1, 2, 3, {len(texts[0])} bytes")


def test_numerics_suite(criterion):
    rng = np.random.default_rng(9)
    worst_svd = worst_eig = worst_orth = 0.0
    for k in range(100):
        m, n = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        A = crandn(rng, m, n)
        U, s, V = svd(A)
        fro = np.linalg.norm(A)
        worst_svd = max(worst_svd, np.linalg.norm(U * s @ V.conj().T - A) / fro)
        worst_orth = max(worst_orth, np.linalg.norm(U.conj().T @ U - np.eye(s.size)),
                         np.linalg.norm(V.conj().T @ V - np.eye(s.size)))
        B = random_hermitian_psd(rng, n)
        pair = hermitian_dominant_eig(B)
        worst_eig = max(worst_eig, np.linalg.norm(B @ pair.vector - pair.value * pair.vector)
                        / np.linalg.norm(B))
    sym = random_qpsk(rng, 10_000)
    qpsk_ok = np.array_equal(qpsk_map(qpsk_demap(sym)), sym)
    bij_ok = True
    for n_rb in (1, 12, 50, 52):
        dims = GridDims(n_rb)
        idx = np.arange(1, dims.n_re + 1)
        m, n = re_position(idx, n_rb)
        bij_ok &= np.array_equal(re_index(m, n, n_rb), idx)
        bij_ok &= len(set(zip(m.tolist(), n.tolist()))) == dims.n_re
    ok = max(worst_svd, worst_eig) <= 1e-10 and worst_orth <= 1e-10 and qpsk_ok and bij_ok
    criterion(9, "numerics", ok,
              f"SVD residual {worst_svd:.1e}, eig residual {worst_eig:.1e}, orthonormality "
              f"{worst_orth:.1e}, QPSK round trip {qpsk_ok}, index bijection {bij_ok}")


def test_selector_agrees_with_cli():
    assert select_pattern_kind(30e3, 30e-9, 60 * KMH, 4e9) is PatternKind.FREQUENCY
    assert select_pattern_kind(30e3, 300e-9, 1 * KMH, 4e9) is PatternKind.TIME
