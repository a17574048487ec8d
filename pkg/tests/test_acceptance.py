"""Acceptance criteria for the package, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (also collected into the
terminal summary by ``conftest.py``). Run only this module with::

    pytest tests/test_acceptance.py -s
"""

import io
import itertools
import math
import time
from contextlib import contextmanager

import numpy as np

from acczofw import (
    BlackBoxProblem,
    Box,
    CooGeEstimator,
    L1Ball,
    LinfBall,
    ProblemMetadata,
    Schedule,
    SeededRng,
    SolverConfig,
    UniGeEstimator,
    coo_gradient,
    correntropy_problem,
    least_squares_problem,
    make_schedule,
    momentum_step,
    quartic_test_problem,
    run_solver,
    sample_unit_sphere,
)
from acczofw.dataio import (
    Dataset,
    parse_libsvm,
    read_trace_csv,
    serialize_libsvm,
    split,
    synthesize_classification,
    write_trace_csv,
)
from acczofw.solvers import FEAS_TOL, GapMode, Mode, RunTrace, SolverState, TraceRecord, Variant, sample_batch

ALL_VARIANTS = list(Variant)
STAR = (Variant.AccSZOFWStar_CooGE, Variant.AccSZOFWStar_UniGE)


@contextmanager
def criterion(report, number, title):
    """Time the block and record a PASS/FAIL line for it."""
    start = time.perf_counter()
    info = {}
    try:
        yield info
    except BaseException as exc:
        line = (number, "FAIL", f"{title} ({time.perf_counter() - start:.2f}s): {exc}".splitlines()[0])
        report.append(line)
        print(f"{line[1]} criterion {number}: {line[2]}")
        raise
    detail = f"{title} ({time.perf_counter() - start:.2f}s)"
    if info.get("note"):
        detail += f"; {info['note']}"
    report.append((number, "PASS", detail))
    print(f"PASS criterion {number}: {detail}")


def _mode_for(variant):
    return Mode.FiniteSum if variant is Variant.AccZOFW else Mode.Stochastic


def _random_problem(rng, n, d):
    A = rng.normal(size=(n, d))
    if rng.random() < 0.5:
        return least_squares_problem(A, rng.normal(size=n))
    return correntropy_problem(A, np.where(rng.random(n) < 0.5, -1.0, 1.0), rng.uniform(0.5, 5))


def _random_set(rng, d, kind):
    if kind == 0:
        return LinfBall(rng.uniform(0.2, 2), d, center=rng.normal(size=d))
    if kind == 1:
        return L1Ball(rng.uniform(0.2, 5), d, center=rng.normal(size=d))
    lower = rng.normal(size=d)
    return Box(lower, lower + rng.uniform(0.2, 3, d))


def test_c1_coordinate_estimator_error_bound(report):
    with criterion(report, 1, "CooGE error within 1.01 L^2 d mu^2 on the quartic") as info:
        t0 = time.perf_counter()
        d = 10
        p = quartic_test_problem(d, 1.0)
        L = p.metadata.L
        assert L == 12.0
        rng = np.random.default_rng(2024)
        worst = 0.0
        for mu in (1e-1, 1e-2, 1e-3):
            est = CooGeEstimator(mu)
            for x in rng.uniform(-1, 1, (100, d)):
                err = np.sum((coo_gradient(est, p, [0], x) - p.true_gradient(x)) ** 2)
                ratio = err / (L ** 2 * d * mu ** 2)
                worst = max(worst, ratio)
                assert ratio <= 1.01, f"ratio {ratio} at mu={mu}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0, f"took {elapsed:.2f}s"
        info["note"] = f"worst ratio {worst:.3g}"


def test_c2_sphere_estimator_unbiased(report):
    with criterion(report, 2, "UniGE mean within 3 standard errors of c (d=20, 1e5 draws)") as info:
        t0 = time.perf_counter()
        d, m = 20, 100_000
        c = np.random.default_rng(7).normal(size=d)
        p = BlackBoxProblem(ProblemMetadata(d=d, n=1), lambda idx, pts: pts @ c, lambda x: c)
        x = np.random.default_rng(8).uniform(-1, 1, d)
        est = UniGeEstimator(0.05)
        u = sample_unit_sphere(d, SeededRng(9), size=m)
        samples = est.per_component(p, np.zeros(m, dtype=int), x, u)
        assert p.counter.total == 2 * m
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(m)
        z = np.abs(mean - c) / se
        assert np.all(z <= 3.0), f"max |z| = {z.max():.2f}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        info["note"] = f"max |z| {z.max():.2f}"


def test_c3_iterate_distance_bounds(report):
    with criterion(report, 3, "dist_z_step <= 2 eta D and dist_xz <= eta D, all variants") as info:
        t0 = time.perf_counter()
        worst_step = worst_xz = 0.0
        rows = 0
        for variant in ALL_VARIANTS:
            for prob_seed in range(5):
                rng = np.random.default_rng(100 + prob_seed)
                n, d = int(rng.integers(5, 15)), int(rng.integers(2, 6))
                p = _random_problem(rng, n, d)
                cset = _random_set(rng, d, prob_seed % 3)
                D = cset.diameter()
                eta = float(rng.uniform(0.05, 0.6))
                sched = Schedule(T=200, eta0=eta, mu=1e-4, beta=1e-3, q=int(rng.integers(1, 8)),
                                 b=3, b1=6, b2=3)
                cfg = SolverConfig(variant, sched, mode=_mode_for(variant), record_loss=False)
                for seed in range(3):
                    start = cset.sample(SeededRng(seed))
                    tr = run_solver(p, cset, cfg, start, rng=seed)
                    step, xz = tr.column("dist_z_step"), tr.column("dist_xz")
                    assert len(step) == 200
                    rows += len(step)
                    worst_step = max(worst_step, float(np.max(step / (2 * eta * D))))
                    worst_xz = max(worst_xz, float(np.max(xz / (eta * D))))
                    assert np.all(step <= 2 * eta * D * 1.01), variant
                    assert np.all(xz <= eta * D * 1.01), variant
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"took {elapsed:.2f}s"
        info["note"] = f"{rows} rows, worst ratios {worst_step:.3f} / {worst_xz:.3f}"


def test_c4_momentum_three_step_expansion(report):
    with criterion(report, 4, "z_3 matches the three-term expansion to 1e-12") as info:
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(2000):
            d = int(rng.integers(1, 8))
            z0 = rng.normal(size=d)
            w = rng.normal(size=(3, d))
            a = rng.uniform(0, 1, 4)  # a[t] plays alpha_t, t = 1..3
            g = rng.uniform(0.01, 0.99, 3)
            e = rng.uniform(0.01, 0.99, 3)
            s = SolverState(0, z0.copy(), z0.copy(), z0.copy(), None, None, SeededRng(0))
            zs = [s.z]
            for t in range(3):
                s = momentum_step(s, w[t], a[t + 1], g[t], e[t])
                zs.append(s.z)
            z0_, z1, z2, z3 = zs
            expected = (z2 + ((1 - a[3]) * e[2] + a[3] * g[2]) * (w[2] - z2)
                        + a[3] * (1 - g[2]) * (1 - a[2]) * (g[1] - e[1]) * (w[1] - z1)
                        + a[3] * (1 - g[2]) * (1 - a[2]) * (1 - g[1]) * (1 - a[1])
                        * (g[0] - e[0]) * (w[0] - z0_))
            diff = float(np.max(np.abs(z3 - expected)))
            worst = max(worst, diff)
            assert diff <= 1e-12
        info["note"] = f"2000 draws, max deviation {worst:.2e}"


def test_c5_spider_full_batch_telescoping(report):
    with criterion(report, 5, "finite-sum SPIDER with b=n equals full CooGE (n=20, d=5, T=30)") as info:
        n, d, T = 20, 5, 30
        rng = np.random.default_rng(5)
        p = correntropy_problem(rng.normal(size=(n, d)), np.where(rng.random(n) < 0.5, -1.0, 1.0), 2.0)
        worst = 0.0
        for q in (3, 7, 31):
            sched = Schedule(T=T, eta0=0.2, mu=1e-4, beta=1e-3, q=q, b=n)
            cfg = SolverConfig(Variant.AccSZOFW_CooGE, sched, mode=Mode.FiniteSum)
            ref = CooGeEstimator(sched.mu)
            errs = []

            def check(before, w, after):
                errs.append(float(np.max(np.abs(before.v - ref.estimate(p, np.arange(n), before.z)))))

            run_solver(p, L1Ball(3, d), cfg, np.zeros(d), rng=q, callback=check)
            assert len(errs) == T
            worst = max(worst, max(errs))
            assert max(errs) <= 1e-10, f"q={q}: {max(errs)}"
        info["note"] = f"max deviation {worst:.2e}"


def test_c6_storm_rho_one_is_plain_estimate(report):
    with criterion(report, 6, "rho = 1 makes the STORM surrogate the plain estimate, bitwise") as info:
        checked = 0
        for variant in STAR:
            rng = np.random.default_rng(6)
            p = _random_problem(rng, 12, 4)
            sched = Schedule(T=100, eta0=0.1, mu=1e-3, beta=1e-2, rho_fixed=1.0)
            cfg = SolverConfig(variant, sched)
            est = UniGeEstimator(sched.beta) if variant.uses_uni else CooGeEstimator(sched.mu)
            replay = SeededRng(66)
            same = []

            def check(before, w, after):
                batch = sample_batch(replay, p.n, 1, Mode.Stochastic)
                if variant.uses_uni:
                    g = est.estimate(p, batch, before.z, replay)
                else:
                    g = est.estimate(p, batch, before.z)
                same.append(np.array_equal(g, before.v))

            run_solver(p, LinfBall(1, 4), cfg, np.zeros(4), rng=66, callback=check)
            assert len(same) == 100 and all(same), variant
            checked += len(same)
        info["note"] = f"{checked} iterations identical"


def _closed_form_queries(variant, sched, mode, d, n, T, baseline_estimator):
    uni = variant.uses_uni or (variant is Variant.PlainZOFW_baseline and baseline_estimator == "uni")
    c = 2 if uni else 2 * d
    if variant is Variant.AccZOFW:
        return T * c * n
    if variant is Variant.PlainZOFW_baseline:
        return T * c * sched.b
    if variant in STAR:
        return c + 2 * c * (T - 1)
    anchors = -(-T // sched.q)  # iterations with t mod q == 0
    anchor_cost = c * (n if mode is Mode.FiniteSum else sched.b1)
    step_cost = 2 * c * (sched.b if mode is Mode.FiniteSum else sched.b2)
    return anchors * anchor_cost + (T - anchors) * step_cost


def test_c7_query_accounting(report):
    with criterion(report, 7, "query counters equal closed-form totals on 20 random configs") as info:
        rng = np.random.default_rng(7)
        seen = set()
        for k in range(20):
            variant = ALL_VARIANTS[k % len(ALL_VARIANTS)]
            d, n, T = int(rng.integers(1, 8)), int(rng.integers(1, 30)), int(rng.integers(3, 60))
            if variant in STAR:
                sched = make_schedule("AccSZOFWStar_Theorem", T, d, n)
            else:
                sched = Schedule(T=T, eta0=0.1, mu=1e-3, beta=1e-2, q=int(rng.integers(1, 10)),
                                 b=int(rng.integers(1, 12)), b1=int(rng.integers(1, 40)),
                                 b2=int(rng.integers(1, 12)))
            if variant is Variant.AccZOFW:
                mode = Mode.FiniteSum
            elif variant is Variant.AccSZOFW_CooGE:
                mode = Mode.FiniteSum if rng.random() < 0.5 else Mode.Stochastic
            else:
                mode = Mode.Stochastic
            base_est = "uni" if rng.random() < 0.5 else "coo"
            cfg = SolverConfig(variant, sched, mode=mode, gap_mode=GapMode.CooGEFull,
                               baseline_estimator=base_est, eval_every=int(rng.integers(1, 5)))
            p = _random_problem(rng, n, d)
            tr = run_solver(p, Box.cube(1, d), cfg, np.zeros(d), rng=k)
            expected = _closed_form_queries(variant, sched, mode, d, n, T, base_est)
            assert p.counter.total == tr.total_queries == expected, (variant, mode, expected)
            if variant is Variant.AccSZOFWStar_CooGE:
                assert expected == 2 * d + 4 * d * (T - 1)
            if variant is Variant.AccSZOFWStar_UniGE:
                assert expected == 2 + 4 * (T - 1)
            seen.add((variant, mode))
        info["note"] = f"{len(seen)} variant/mode pairs covered"


def test_c8_lmo_brute_force(report):
    with criterion(report, 8, "LMO equals exhaustive enumeration for d <= 4 (1e4 directions)") as info:
        rng = np.random.default_rng(8)
        total = 0
        for d in range(1, 5):
            sets = [LinfBall(rng.uniform(0.1, 2), d, center=rng.normal(size=d)),
                    L1Ball(rng.uniform(0.1, 5), d, center=rng.normal(size=d)),
                    Box(-rng.uniform(0.1, 2, d), rng.uniform(0.1, 2, d))]
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
            cands = [
                sets[0].center + sets[0].radius * signs,
                sets[1].center + sets[1].radius * np.vstack([np.eye(d), -np.eye(d)]),
                np.where(signs > 0, sets[2].upper, sets[2].lower),
            ]
            V = rng.normal(size=(10_000, d))
            for cset, verts in zip(sets, cands):
                best = verts[np.argmax(verts @ -V.T, axis=0)]
                got = np.array([cset.lmo(v) for v in V])
                np.testing.assert_array_equal(got, best)
                total += len(V)
        info["note"] = f"{total} directions across 12 sets"


def _c9_setup(seed):
    ds = synthesize_classification(2000, 50, 0.1, SeededRng(1000 + seed))
    train, _ = split(ds, 0.5, SeededRng(2000 + seed))
    return correntropy_problem(train.features, train.labels, 10.0), L1Ball(10.0, 50)


def test_c9_desk_scale_ordering(report):
    with criterion(report, 9, "accelerated UniGE solvers beat plain ZO-FW at 2e6 queries") as info:
        t0 = time.perf_counter()
        budget = 2_000_000
        preset = "Experiment_RobustClassification"
        solvers = {
            "Acc-SZOFW*(UniGE)": (Variant.AccSZOFWStar_UniGE, True),
            "Acc-SZOFW(UniGE)": (Variant.AccSZOFW_UniGE, False),
            "ZO-FW baseline": (Variant.PlainZOFW_baseline, False),
        }
        losses = {k: [] for k in solvers}
        for seed in range(5):
            for name, (variant, star) in solvers.items():
                p, cset = _c9_setup(seed)
                sched = make_schedule(preset, 10**6, p.d, p.n, star=star, estimator="uni")
                cfg = SolverConfig(variant, sched, eval_every=100, gap_mode=GapMode.TrueGradient,
                                   query_budget=budget)
                tr = run_solver(p, cset, cfg, np.zeros(p.d), rng=seed)
                assert budget <= tr.total_queries
                gaps = tr.column("gap")
                k = max(1, len(gaps) // 10)
                assert gaps[-k:].mean() < gaps[:k].mean(), f"{name} seed {seed} gap did not fall"
                losses[name].append(tr.final_loss)
        med = {k: float(np.median(v)) for k, v in losses.items()}
        base = med["ZO-FW baseline"]
        assert med["Acc-SZOFW*(UniGE)"] < base, med
        assert med["Acc-SZOFW(UniGE)"] < base, med
        elapsed = time.perf_counter() - t0
        assert elapsed < 300.0, f"took {elapsed:.1f}s"
        info["note"] = "median losses " + ", ".join(f"{k} {v:.4f}" for k, v in med.items())


def test_c10_feasibility_fuzz(report):
    with criterion(report, 10, "every x, y, z, w feasible at 1e-9 over 1e4 iterations") as info:
        rng = np.random.default_rng(10)
        iterations = violations = 0
        for variant in ALL_VARIANTS:
            for kind in range(3):
                for seed in range(3):
                    d, n = int(rng.integers(1, 7)), int(rng.integers(2, 12))
                    p = _random_problem(rng, n, d)
                    cset = _random_set(rng, d, kind)
                    eta = float(rng.uniform(0.01, 0.6))
                    sched = Schedule(T=186, eta0=eta, mu=1e-3, beta=1e-2, q=int(rng.integers(1, 6)),
                                     b=2, b1=5, b2=2, eta_decay=float(rng.choice([0.0, 0.5])))
                    cfg = SolverConfig(variant, sched, mode=_mode_for(variant), record_loss=False,
                                       eval_every=50)

                    def check(before, w, after):
                        nonlocal iterations, violations
                        iterations += 1
                        for pt in (w, after.x, after.y, after.z):
                            violations += not cset.contains(pt, FEAS_TOL)

                    run_solver(p, cset, cfg, cset.sample(SeededRng(seed)), rng=seed, callback=check)
        assert iterations >= 10_000
        assert violations == 0, f"{violations} violations"
        info["note"] = f"{iterations} iterations, 0 violations"


def _random_trace(rng, rows):
    recs, q = [], 0
    for t in range(rows):
        q += int(rng.integers(1, 10**6))
        recs.append(TraceRecord(
            t=t,
            loss=None if rng.random() < 0.05 else float(rng.normal() * 10.0 ** rng.integers(-300, 300)),
            gap=None if rng.random() < 0.3 else float(rng.standard_normal() * 10.0 ** rng.integers(-20, 20)),
            queries=q,
            diag_queries=int(rng.integers(0, 2**62)),
            dist_z_step=float(rng.random()),
            dist_xz=float(np.nextafter(rng.random(), 1.0)),
        ))
    return RunTrace(recs)


def test_c11_round_trips(report):
    with criterion(report, 11, "LIBSVM and trace CSV round trips bit-exact on 1000 instances") as info:
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n, d = int(rng.integers(1, 25)), int(rng.integers(1, 30))
            X = rng.normal(size=(n, d)) * 10.0 ** rng.integers(-200, 200, size=(n, d)).astype(float)
            X[rng.random((n, d)) < 0.7] = 0.0
            ds = Dataset(X, np.where(rng.random(n) < 0.5, -1.0, 1.0))
            back = parse_libsvm(serialize_libsvm(ds).encode(), n_features=d)
            assert back.features.tobytes() == ds.features.tobytes()
            assert back.labels.tobytes() == ds.labels.tobytes()
        for _ in range(1000):
            tr = _random_trace(rng, int(rng.integers(0, 30)))
            buf = io.BytesIO()
            write_trace_csv(tr, buf)
            back = read_trace_csv(buf.getvalue())
            assert back.records == tr.records
            for a, b in zip(back.records, tr.records):
                for f in ("loss", "gap", "dist_z_step", "dist_xz"):
                    va, vb = getattr(a, f), getattr(b, f)
                    assert (va is None and vb is None) or np.float64(va).tobytes() == np.float64(vb).tobytes()
        info["note"] = "2000 instances"
