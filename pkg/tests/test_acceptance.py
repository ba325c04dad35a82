"""End-to-end acceptance gate.

Each criterion prints exactly one PASS/FAIL line with its measured numbers,
then asserts. Randomized criteria run at seed 42, committed before any of
these tests were first executed; a red line is a real discrepancy, not a
tuning artifact.
"""
import io
import math
import time

import numpy as np
from scipy.stats import chi2

from groupcover import (
    FACEBOOK_PROFILE,
    GraphProfile,
    GroupAssignment,
    SocialGraph,
    WorkloadConfig,
    assign_groups,
    coupon_expectation,
    disconnect_prob_integral,
    disconnect_prob_mgf,
    estimate_edge_privacy,
    poisson_lambda,
    project_graph,
    run_workload,
    simulate_connection_prob,
    simulate_stream_histogram,
    strategy_random_poll,
    table1,
)
from oracles import brute_projection, edge_privacy_oracle, random_instance

SEED = 42

DESK = GraphProfile(100_000, 20.0, 0.0)

# reference design points: confidence -> (group count, mean group size)
REFERENCE_ROWS = {
    0.999: (141_360, 5100),
    0.995: (161_408, 4467),
    0.99: (173_125, 4165),
    0.9: (244_837, 2945),
    0.8: (292_852, 2462),
    0.75: (315_542, 2285),
    0.2: (786_490, 916),
    0.1: (1_144_580, 630),
    0.01: (3_705_910, 194),
}


def verdict(num, name, ok, detail):
    print(f"ACCEPTANCE {num} ({name}): {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num}: {detail}"


def desk_m(lam):
    return round(math.sqrt(DESK.n * DESK.d / lam))


def poisson_pmf(k, lam):
    return math.exp(-lam) * lam**k / math.factorial(k)


def test_criterion_1_design_table():
    t0 = time.perf_counter()
    rows = table1(FACEBOOK_PROFILE)
    elapsed = time.perf_counter() - t0

    worst_m = worst_size = worst_lam = 0.0
    for row in rows:
        ref_m, _ = REFERENCE_ROWS[row["confidence"]]
        ref_size = FACEBOOK_PROFILE.n / ref_m
        worst_m = max(worst_m, abs(row["m"] - ref_m) / ref_m)
        worst_size = max(worst_size, abs(row["group_size"] - ref_size) / ref_size)
        lam_exact = -math.log(1.0 - row["confidence"])
        worst_lam = max(worst_lam, abs(row["lambda"] - lam_exact))
    ok = (
        len(rows) == 9
        and worst_m < 0.001
        and worst_size < 0.001
        and worst_lam < 1e-4
        and elapsed < 1.0
    )
    verdict(
        1,
        "design table",
        ok,
        f"max |dm|/m={worst_m:.2e} max |dsize|/size={worst_size:.2e} "
        f"max |dlambda|={worst_lam:.2e} in {elapsed:.2f}s",
    )


def test_criterion_2_integral_agreement():
    t0 = time.perf_counter()
    worst_poisson = worst_routes = 0.0
    for ref_m, _ in REFERENCE_ROWS.values():
        quad = disconnect_prob_integral(FACEBOOK_PROFILE, ref_m)
        closed = disconnect_prob_mgf(FACEBOOK_PROFILE, ref_m)
        lam = poisson_lambda(FACEBOOK_PROFILE, ref_m)
        worst_poisson = max(worst_poisson, abs(quad - math.exp(-lam)))
        worst_routes = max(worst_routes, abs(quad - closed))
    elapsed = time.perf_counter() - t0
    ok = worst_poisson <= 0.01 and worst_routes <= 1e-4 and elapsed < 10.0
    verdict(
        2,
        "integral vs Poisson",
        ok,
        f"max |quad - e^-lam|={worst_poisson:.2e} "
        f"max |quad - closed|={worst_routes:.2e} in {elapsed:.2f}s",
    )


def test_criterion_3_desk_scale_monte_carlo():
    t0 = time.perf_counter()
    pairs = 100_000
    legs = []
    ok = True
    for lam_target in (0.2231, 1.6, 4.6052):
        m = desk_m(lam_target)
        lam = poisson_lambda(DESK, m)
        expected = -math.expm1(-lam)

        hist = simulate_stream_histogram(DESK, m, pairs, seed=SEED)
        p, se = simulate_connection_prob(DESK, m, pairs, seed=SEED)
        dev = (p - expected) / se

        ks = range(max(hist) + 1)
        tv = 0.5 * sum(abs(hist.get(k, 0.0) - poisson_pmf(k, lam)) for k in ks)
        tv += 0.5 * (1.0 - sum(poisson_pmf(k, lam) for k in ks))

        leg_ok = abs(dev) <= 3.0 and tv <= 0.02
        ok &= leg_ok
        legs.append(f"lam={lam:.4f} m={m} dev={dev:+.2f}SE tv={tv:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60.0
    verdict(3, "desk-scale Monte Carlo", ok, " | ".join(legs) + f" | {elapsed:.1f}s")


def test_criterion_4_edge_privacy():
    t0 = time.perf_counter()
    m = desk_m(4.6052)
    lam = poisson_lambda(DESK, m)
    expected = -math.expm1(-lam)

    s_graph, s_assign, s_est = np.random.SeedSequence(SEED).spawn(3)
    degrees = np.full(DESK.n, int(DESK.d), dtype=np.int64)
    graph = SocialGraph.from_degrees(degrees, seed=s_graph)
    assignment = assign_groups(DESK.n, m, seed=s_assign)
    p, se = estimate_edge_privacy(graph, assignment, trials=10_000, seed=s_est)
    dev = (p - expected) / se

    rng = np.random.default_rng(SEED)
    checked = mismatches = 0
    while checked < 300:
        small_graph, small_assign = random_instance(rng)
        if small_graph.edge_count == 0:
            continue
        trials = max(100, 2 * small_graph.edge_count)
        est, _ = estimate_edge_privacy(small_graph, small_assign, trials=trials, seed=0)
        if abs(est - edge_privacy_oracle(small_graph, small_assign)) > 1e-12:
            mismatches += 1
        checked += 1
    elapsed = time.perf_counter() - t0

    ok = abs(dev) <= 3.0 and mismatches == 0
    verdict(
        4,
        "edge privacy",
        ok,
        f"estimate={p:.5f} vs {expected:.5f} dev={dev:+.2f}SE at 1e4 trials; "
        f"exhaustive mismatches {mismatches}/{checked} | {elapsed:.1f}s",
    )


def test_criterion_5_resource_accounting():
    t0 = time.perf_counter()

    # light design: isolated friend pairs, one user per group, every stream
    # unique, no header overhead
    n = 200
    graph = SocialGraph.from_edges(n, [(2 * i, 2 * i + 1) for i in range(n // 2)])
    light_cfg = WorkloadConfig(
        profile=graph, m=n, assignment=GroupAssignment(n, np.arange(n)),
        ticks=5, send_rate=0.2, phi=0.0, replications=1, seed=SEED,
        pairs_sampled=2_000, privacy_trials=0,
    )
    light, _ = run_workload(light_cfg)
    light_ok = light.bandwidth_ratio == 1.0

    # hybrid desk workload at eps=0.001 (lambda ~ 6.91): the polled user's
    # own edges inflate the stream mean by ~1/lambda, which this design
    # point keeps inside the 15% band
    m = 538
    lam = poisson_lambda(DESK, m)
    hybrid_cfg = dict(
        profile=DESK, m=m, ticks=4, send_rate=0.004, phi=0.05,
        replications=1, seed=SEED, pairs_sampled=2_000, privacy_trials=0,
    )
    hybrid, _ = run_workload(WorkloadConfig(**hybrid_cfg))
    bw_rel = hybrid.bandwidth_ratio / (lam * 1.05) - 1.0
    comp_rel = hybrid.computation_ratio / (1.0 + 0.05 * lam) - 1.0

    bulk, _ = run_workload(WorkloadConfig(**{**hybrid_cfg, "strategy": "bulk_download"}))
    bulk_rel = bulk.bandwidth_ratio / ((DESK.n / m) * 1.05) - 1.0
    elapsed = time.perf_counter() - t0

    ok = (
        light_ok
        and abs(bw_rel) < 0.15
        and abs(comp_rel) < 0.15
        and abs(bulk_rel) < 0.15
        and bulk.connections == 1.0
    )
    verdict(
        5,
        "resource accounting",
        ok,
        f"light bw={light.bandwidth_ratio!r} (want exactly 1.0); "
        f"hybrid bw {bw_rel:+.1%} comp {comp_rel:+.1%}; "
        f"bulk bw {bulk_rel:+.1%} conn={bulk.connections} | {elapsed:.1f}s",
    )


def test_criterion_6_coupon_collector():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)

    mean_errs = []
    means_ok = True
    for d_b in (1, 2, 10):
        counts = [strategy_random_poll(d_b, seed=rng)[1] for _ in range(10_000)]
        expected = coupon_expectation(d_b)
        rel = abs(np.mean(counts) - expected) / expected
        mean_errs.append(f"d_b={d_b}: {rel:.2%}")
        means_ok &= rel < 0.05

    # chi-square for d_b=5 against the inclusion-exclusion law
    d = 5
    trials = 100_000
    counts: dict[int, int] = {}
    for _ in range(trials):
        _, t = strategy_random_poll(d, seed=rng)
        counts[t] = counts.get(t, 0) + 1

    def cdf(t):
        return sum((-1) ** i * math.comb(d, i) * ((d - i) / d) ** t for i in range(d + 1))

    bins = list(range(d, d + 25))
    probs = [cdf(t) - cdf(t - 1) for t in bins]
    probs.append(1.0 - cdf(bins[-1]))
    observed = [counts.get(t, 0) for t in bins]
    observed.append(trials - sum(observed))
    stat = sum((o - trials * p) ** 2 / (trials * p) for o, p in zip(observed, probs))
    crit = chi2.ppf(0.999, df=len(probs) - 1)
    elapsed = time.perf_counter() - t0

    ok = means_ok and stat < crit
    verdict(
        6,
        "coupon collector",
        ok,
        f"mean errors {', '.join(mean_errs)}; chi2={stat:.1f} < {crit:.1f} "
        f"at 1e5 trials | {elapsed:.1f}s",
    )


def test_criterion_7_property_suites():
    t0 = time.perf_counter()

    rng = np.random.default_rng(SEED)
    mismatches = conservation_fails = 0
    for _ in range(1000):
        graph, assignment = random_instance(rng)
        pn = project_graph(graph, assignment)
        if pn.stream_counts != brute_projection(graph, assignment):
            mismatches += 1
        if pn.total_multiplicity() != graph.edge_count:
            conservation_fails += 1

    config = dict(
        profile=GraphProfile(20_000, 8.0, 0.0), m=253, ticks=6,
        send_rate=0.02, phi=0.05, replications=3, seed=SEED,
        pairs_sampled=2_000, privacy_trials=500,
    )
    outputs = []
    for workers in (1, 2, 4, 1):
        report, log = run_workload(WorkloadConfig(**config), workers=workers)
        rbuf, lbuf = io.StringIO(), io.StringIO()
        report.to_json(rbuf)
        log.to_csv(lbuf)
        outputs.append((rbuf.getvalue(), lbuf.getvalue()))
    deterministic = all(out == outputs[0] for out in outputs[1:])
    elapsed = time.perf_counter() - t0

    ok = mismatches == 0 and conservation_fails == 0 and deterministic
    verdict(
        7,
        "property suites",
        ok,
        f"projection mismatches {mismatches}/1000, conservation fails "
        f"{conservation_fails}/1000, byte-identical across worker counts: "
        f"{deterministic} | {elapsed:.1f}s",
    )
