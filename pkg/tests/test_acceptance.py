"""Exit criteria of the build, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import statistics
import time

import numpy as np

from aparareal.asynchronous import async_solve
from aparareal.fd import (TridiagonalSystem, StateVector, initial_state, propagate,
                          solve_tridiagonal)
from aparareal.pricing import MarketOption, exact_price
from aparareal.schedule import admissible, random_schedule, simulate_schedule, synchronous_schedule
from aparareal.sync import make_config, parareal_solve, sequential_reference

# (dT, V_e) columns of the published tables, N = 16 so T = 16 dT
TABLE1_VE = [(0.1, 0.4853), (0.2, 1.3947), (0.3, 2.3140), (0.4, 3.1925), (0.5, 4.0203),
             (0.6, 4.7961), (0.7, 5.5213), (0.8, 6.1981), (0.9, 6.8291), (1.0, 7.4169)]
TABLE2_VE = [(0.1, 1.5179), (0.2, 3.3141), (0.3, 4.9504), (0.4, 6.4476), (0.5, 7.8241),
             (0.6, 9.0939), (0.7, 10.2673), (0.8, 11.3530), (0.9, 12.3584), (1.0, 13.2898)]


def test_exact_pricer_reproduces_tables_1_and_2(criterion):
    worst = 0.0
    for (S, E), table in (((15, 20), TABLE1_VE), ((25, 30), TABLE2_VE)):
        for dT, ve in table:
            worst = max(worst, abs(exact_price(MarketOption(0.2, 0.05, S, E, 16 * dT)) - ve))
    criterion(worst <= 5e-4, f"max |V_e - table| = {worst:.2e} (tol 5e-4, 20 values)")


def test_table1_row1_sync_and_async(criterion):
    cfg = make_config(spot=15, strike=20, delta_T=0.1, n_slices=16, m=250)
    t0 = time.perf_counter()
    sync = parareal_solve(cfg, workers=16)
    res, stats = async_solve(cfg)
    wall = time.perf_counter() - t0
    e_sync, e_async = abs(sync.price - 0.4853), abs(res.price - 0.4853)
    ok = sync.converged and res.converged and e_sync <= 1e-3 and e_async <= 1e-3 and wall < 60
    criterion(ok, f"eps_a sync={e_sync:.2e} async={e_async:.2e} (tol 1e-3), {wall:.1f}s")


def test_table2_row1_relative_error(criterion):
    cfg = make_config(spot=25, strike=30, delta_T=0.1, n_slices=16, m=250)
    sync = parareal_solve(cfg)
    res, _ = async_solve(cfg)
    r_sync, r_async = abs(sync.price - 1.5179) / 1.5179, abs(res.price - 1.5179) / 1.5179
    ok = sync.converged and res.converged and max(r_sync, r_async) <= 5e-3
    criterion(ok, f"eps_r sync={r_sync:.2e} async={r_async:.2e} (tol 5e-3)")


def test_parareal_exactness(criterion):
    worst = 0.0
    for N in (2, 4, 8):
        cfg = make_config(spot=25, strike=30, delta_T=0.1, n_slices=N, m=32, tol=1e-300)
        ref, _ = sequential_reference(cfg)
        res = parareal_solve(cfg)
        assert res.iterations == N
        worst = max(worst, max(np.max(np.abs(a.values - b.values))
                               for a, b in zip(res.lambdas, ref)))
    criterion(worst <= 1e-10, f"max interface deviation after N iterations {worst:.2e} (tol 1e-10)")


def test_sync_embedding(criterion):
    rng = np.random.default_rng(20240611)
    mismatches = 0
    for _ in range(10):
        N = int(rng.integers(1, 7))
        S, E = float(rng.uniform(5, 40)), float(rng.uniform(5, 40))
        dT = float(rng.choice([0.05, 0.1, 0.2]))
        cfg = make_config(spot=S, strike=E, delta_T=dT, n_slices=N, m=int(rng.integers(8, 48)),
                          sigma=float(rng.uniform(0.1, 0.5)), rate=float(rng.uniform(0, 0.1)))
        sync = parareal_solve(cfg, record_history=True)
        sim = simulate_schedule(cfg, synchronous_schedule(N, sync.iterations), record_history=True)
        same = all(np.array_equal(a.values, b.values)
                   for ha, hb in zip(sync.history, sim.history) for a, b in zip(ha, hb))
        mismatches += not (same and sim.price == sync.price)
    criterion(mismatches == 0, f"{mismatches}/10 configurations differ bitwise")


def test_schedule_robustness(criterion):
    cfg = make_config(spot=25, strike=30, delta_T=0.1, n_slices=4, m=32)
    sync = parareal_solve(cfg)
    worst, failures = 0.0, 0
    for seed in range(50):
        sched = random_schedule(4, 40, max_delay=3, seed=seed)
        assert admissible(sched, window=4, max_delay=3)
        res = simulate_schedule(cfg, sched)
        failures += not res.converged
        worst = max(worst, abs(res.price - sync.price))
    ok = failures == 0 and worst <= 20 * cfg.tol
    criterion(ok, f"{failures}/50 unconverged, max |price - sync| = {worst:.2e} "
                  f"(tol {20 * cfg.tol:.0e})")


def test_table3_qualitative(criterion):
    reps = 3
    sync_iters, async_means = {}, {}
    for N in (16, 32, 64):
        cfg = make_config(spot=25, strike=30, delta_T=0.1, n_slices=N, m=150)
        sync_iters[N] = parareal_solve(cfg).iterations
        means = []
        for _ in range(reps):
            res, stats = async_solve(cfg)
            assert res.converged
            assert stats.min <= stats.mean <= stats.max
            means.append(stats.mean)
        async_means[N] = statistics.fmean(means)
    s16, a = sync_iters[16], async_means
    ok = (8 <= s16 <= 15 and a[16] >= s16 and a[16] <= a[32] <= a[64])
    criterion(ok, f"sync N=16: {s16} iters; async mean over {reps} runs: "
                  + ", ".join(f"N={N}: {v:.1f}" for N, v in a.items()))


def test_numerical_kernel_properties(criterion):
    rng = np.random.default_rng(7)
    worst_res = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 200))
        sub, sup = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        diag = (np.abs(sub) + np.abs(sup) + rng.uniform(0.01, 1, n)) * rng.choice([-1, 1], n)
        system = TridiagonalSystem(sub, diag, sup)
        b = rng.normal(size=n)
        x = solve_tridiagonal(system, b)
        worst_res = max(worst_res, np.max(np.abs(system.matvec(x) - b)) / np.max(np.abs(b)))

    cfg = make_config(spot=15, strike=20, delta_T=0.1, n_slices=16, m=250)
    c = 2.5
    const = propagate(StateVector(0.0, np.full(249, c)), 200, 2e-5, cfg.grid, cfg.problem,
                      boundary=(c, c))
    const_err = float(np.max(np.abs(const.values - c)))

    lowest = np.inf
    for dT in [0.1 * i for i in range(1, 11)]:
        cfg = make_config(spot=15, strike=20, delta_T=dT, n_slices=16, m=250)
        s = initial_state(cfg.grid, cfg.problem)
        for _ in range(16 * cfg.decomposition.fine_steps_per_slice):
            s = propagate(s, 1, cfg.decomposition.dtau_fine, cfg.grid, cfg.problem)
            lowest = min(lowest, float(s.values.min()))
    ok = worst_res <= 1e-10 and const_err <= 1e-12 and lowest >= -1e-12
    criterion(ok, f"tridiag residual {worst_res:.1e}, constant drift {const_err:.1e}, "
                  f"min state {lowest:.1e}")
