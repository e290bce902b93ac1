"""Acceptance suite: one test per release criterion.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see
them as they happen) and enforces its stated tolerance and runtime cap.
Monte-Carlo tests use fixed seeds, so outcomes are reproducible.
"""

import itertools
import math
import time

import numpy as np
import pytest

import rasphy as rp

RNG_SEED = 20240 + 613


def report(name: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# 1. Simulator correctness against the exact enumeration oracle
# ---------------------------------------------------------------------------


def test_01_simulator_exact():
    t0 = time.time()
    tree = rp.generate_random_regular(5, rp.RegularityParams(0.1, 0.2, 1.5),
                                      seed=3)
    model = rp.SubstitutionModel.uniform(2)
    rates = rp.RateDistribution.two_speed(0.5, 1.5)
    k = 1_000_000
    aln = rp.simulate_alignment(tree, model, rates, k, seed=11)
    exact = rp.exact_leaf_distribution(tree, model, rates)

    powers = (2 ** np.arange(4, -1, -1)).astype(np.int64)
    codes = aln.data.astype(np.int64) @ powers
    emp = np.bincount(codes, minlength=32) / k
    probs = exact.reshape(-1)
    sigma = np.sqrt(probs * (1.0 - probs) / k)
    worst_z = float(np.max(np.abs(emp - probs) / np.maximum(sigma, 1e-15)))

    base = rp.exact_leaf_distribution(tree, model, rates, root=0)
    reroot = max(
        float(np.abs(rp.exact_leaf_distribution(tree, model, rates,
                                                root=v) - base).max())
        for v in range(tree.n_vertices))
    elapsed = time.time() - t0
    ok = worst_z < 4.0 and reroot < 1e-12 and elapsed < 120.0
    report("01-simulator-exact", ok,
           f"worst z={worst_z:.2f} (<4), reroot diff={reroot:.2e} (<1e-12), "
           f"{elapsed:.0f}s (<120s)")


# ---------------------------------------------------------------------------
# 2. Pair-agreement law: empirical agreement approaches phi(d(a, b))
# ---------------------------------------------------------------------------


def test_02_pair_agreement_law():
    t0 = time.time()
    rng = np.random.default_rng(RNG_SEED)
    params = rp.RegularityParams(0.1, 0.25, 2.0)
    kinds = [rp.RateDistribution.constant(),
             rp.RateDistribution.two_speed(0.5, 1.5),
             rp.RateDistribution.gamma(2.0),
             rp.RateDistribution.lognormal(0.5)]
    k = 100_000
    worst_z = 0.0
    for trial in range(20):
        n = int(rng.integers(8, 17))
        r = int(rng.choice([2, 4]))
        tree = rp.generate_random_regular(n, params,
                                          seed=int(rng.integers(2**30)))
        model = rp.SubstitutionModel.uniform(r)
        rates = kinds[trial % len(kinds)]
        aln = rp.simulate_alignment(tree, model, rates, k,
                                    seed=int(rng.integers(2**30)))
        a, b = map(int, rng.choice(n, size=2, replace=False))
        d = rp.tree_metric(tree)[a, b]
        qhat = rp.agreement_matrix(aln, model).values[a, b]
        expected = rates.phi(d)
        p_agree = model.q_inf + model.p_inf * expected
        sigma = math.sqrt(p_agree * (1 - p_agree) / k) / model.p_inf
        worst_z = max(worst_z, abs(qhat - expected) / sigma)
    elapsed = time.time() - t0
    ok = worst_z < 4.0 and elapsed < 120.0
    report("02-pair-agreement-law", ok,
           f"worst z={worst_z:.2f} over 20 configs (<4), "
           f"{elapsed:.0f}s (<120s)")


# ---------------------------------------------------------------------------
# 3. Independence of agreement indicators across path-disjoint pairs
# ---------------------------------------------------------------------------


def test_03_independence_factorization():
    tree = rp.parse_newick(
        "((a:0.15,b:0.1):0.12,(c:0.2,d:0.17):0.14,(e:0.1,f:0.2):0.1);")
    model = rp.SubstitutionModel.uniform(2)
    exact = rp.exact_leaf_distribution(tree, model,
                                       rp.RateDistribution.constant())
    pairs = [(0, 1), (2, 3), (4, 5)]
    assert all(rp.paths_disjoint(tree, p, q)
               for p, q in itertools.combinations(pairs, 2))
    configs = np.array(list(itertools.product(range(2), repeat=6)))
    probs = exact.reshape(-1)
    agree = {p: configs[:, p[0]] == configs[:, p[1]] for p in pairs}
    worst = 0.0
    for outcome in itertools.product([False, True], repeat=3):
        mask = np.ones(len(configs), dtype=bool)
        prod = 1.0
        for p, want in zip(pairs, outcome):
            mask &= agree[p] == want
            prod *= probs[agree[p] == want].sum()
        worst = max(worst, abs(float(probs[mask].sum()) - prod))
    report("03-independence", worst < 1e-10,
           f"worst factorization error={worst:.2e} (<1e-10)")


# ---------------------------------------------------------------------------
# 4. Size bound: pairs within distance 4g number at least n/4
# ---------------------------------------------------------------------------


def test_04_size_bound():
    rng = np.random.default_rng(RNG_SEED + 4)
    params = rp.RegularityParams(0.1, 0.2, 1.2)
    violations = 0
    smallest_ratio = np.inf
    for _ in range(100):
        n = int(rng.integers(32, 513))
        tree = rp.generate_random_regular(n, params,
                                          seed=int(rng.integers(2**30)))
        d = rp.tree_metric(tree)
        iu = np.triu_indices(n, k=1)
        count = int((d[iu] <= 4 * params.max_edge).sum())
        smallest_ratio = min(smallest_ratio, count / n)
        if count < n / 4:
            violations += 1
    report("04-size-bound", violations == 0,
           f"violations={violations}/100, smallest |pairs|/n="
           f"{smallest_ratio:.2f} (>=0.25)")


# ---------------------------------------------------------------------------
# 5. Sparsity certificate: oracle exactly, data-driven with high probability
# ---------------------------------------------------------------------------


def test_05_sparsity_certificate():
    rng = np.random.default_rng(RNG_SEED + 5)
    params = rp.RegularityParams(0.1, 0.2, 1.2)
    oracle_fails = 0
    for _ in range(50):
        n = int(rng.integers(16, 129))
        tree = rp.generate_random_regular(n, params,
                                          seed=int(rng.integers(2**30)))
        pairs = rp.oracle_sparsify(tree, params, m=1.0)
        if not rp.certify_sparsity(pairs, tree, params).ok:
            oracle_fails += 1

    params9 = rp.RegularityParams(0.1, 0.2, 1.5)
    rates = rp.RateDistribution.two_speed(0.5, 1.5)
    model = rp.SubstitutionModel.uniform(4)
    thresholds = rp.ClusteringThresholds.for_max_edge(0.2)
    data_ok = 0
    for seed in range(40):
        tree = rp.generate_random_regular(128, params9, seed=seed)
        aln = rp.simulate_alignment(tree, model, rates, 20_000,
                                    seed=seed + 7000)
        q = rp.agreement_matrix(aln, model)
        pairs = rp.sparsify(rp.close_pairs(q, thresholds), q, thresholds)
        if rp.certify_sparsity(pairs, tree, params9).ok:
            data_ok += 1
    ok = oracle_fails == 0 and data_ok >= 38
    report("05-sparsity-certificate", ok,
           f"oracle fails={oracle_fails}/50 (need 0), "
           f"data-driven passes={data_ok}/40 (need >=38)")


# ---------------------------------------------------------------------------
# 6. Concentration + separation: slow/fast classification on complete trees
# ---------------------------------------------------------------------------


def test_06_concentration_separation():
    t0 = time.time()
    rates = rp.RateDistribution.two_speed(1.0, 3.0)  # rescales to {0.5, 1.5}
    model = rp.SubstitutionModel.uniform(4)
    params = rp.RegularityParams(0.2, 0.2, 1.5)
    m = rates.phi_inverse(math.exp(-5 * 0.2))
    medians = []
    for h in (6, 8, 10):
        tree = rp.generate_complete_binary(h, 0.2)
        pairs = rp.oracle_sparsify(tree, params, m)
        accs = []
        for seed in range(10):
            aln = rp.simulate_alignment(tree, model, rates, 2000,
                                        seed=1000 * h + seed)
            accs.append(rp.site_classification_report(aln, pairs,
                                                      tree).accuracy)
        medians.append(float(np.median(accs)))
    elapsed = time.time() - t0
    ok = (medians[-1] >= 0.99
          and medians[0] <= medians[1] <= medians[2]
          and elapsed < 600.0)
    report("06-concentration-separation", ok,
           f"median accuracy n=64:{medians[0]:.3f} <= n=256:{medians[1]:.3f}"
           f" <= n=1024:{medians[2]:.3f} (last >=0.99), "
           f"{elapsed:.0f}s (<600s)")


# ---------------------------------------------------------------------------
# 7. Full-sum negative control
# ---------------------------------------------------------------------------


def _exact_spin_sum_dist(h: int, mu: float):
    """Transfer-matrix oracle: exact distribution of the leaf-spin sum on
    a complete binary tree (h levels, all edges mu, two-state model)."""
    p = (1.0 - math.exp(-mu)) / 2.0
    dist = np.array([0.0, 1.0])  # support [-1, +1] given subtree root +
    for _ in range(h):
        mixed = (1.0 - p) * dist + p * dist[::-1]
        dist = np.convolve(mixed, mixed)
    probs = 0.5 * (dist + dist[::-1])
    vals = np.arange(-2 ** h, 2 ** h + 1, 2, dtype=float)
    return vals, probs


def _full_sum_ratio_exact(h: int, mu: float):
    vals, probs = _exact_spin_sum_dist(h, mu)
    u = (vals ** 2 - 2.0 ** h) / 2.0
    mean = float((probs * u).sum())
    var = float((probs * (u - mean) ** 2).sum())
    return mean, var


def _spin_sums_fast(h: int, mu: float, k: int, rng, chunk=250_000):
    """Direct CFN propagation on the complete tree, spins as 0/1 bits."""
    flip_edge = (1.0 - math.exp(-mu)) / 2.0
    flip_root = (1.0 - math.exp(-2.0 * mu)) / 2.0
    n = 2 ** h
    out = np.empty(k, dtype=np.int64)
    for start in range(0, k, chunk):
        size = min(chunk, k - start)
        left = (rng.random(size, dtype=np.float32) < 0.5).astype(np.uint8)
        right = left ^ (rng.random(size, dtype=np.float32)
                        < flip_root).astype(np.uint8)
        level = np.stack([left, right], axis=1)
        for _ in range(h - 1):
            parents = np.repeat(level, 2, axis=1)
            flips = (rng.random(parents.shape, dtype=np.float32)
                     < flip_edge).astype(np.uint8)
            level = parents ^ flips
        # spin = 1 - 2*bit, so sum = n - 2 * popcount
        out[start:start + size] = n - 2 * level.sum(axis=1, dtype=np.int64)
    return out


def test_07_full_sum_negative_control():
    t0 = time.time()
    gamma = 0.3
    mu = -0.5 * math.log(gamma / 2.0)
    model = rp.SubstitutionModel.uniform(2)
    rates = rp.RateDistribution.constant()

    # (a) empirical mean through the package simulator matches the
    # closed-form recursion solution, for every h
    mean_fail = []
    for h in (5, 6, 7, 8):
        tree = rp.generate_complete_binary(h, mu)
        aln = rp.simulate_alignment(tree, model, rates, 200_000,
                                    seed=500 + h)
        u = rp.full_sum_statistics(aln, model)
        want = gamma * 2 ** (h - 2) * (gamma ** h - 1) / (gamma - 1)
        se = float(u.std(ddof=1)) / math.sqrt(len(u))
        if abs(float(u.mean()) - want) >= 4 * se:
            mean_fail.append(h)

    # (b) exact transfer-matrix ratios strictly decrease over h in {5..8}
    exact_ratios = []
    for h in (5, 6, 7, 8):
        mean, var = _full_sum_ratio_exact(h, mu)
        exact_ratios.append(mean * mean / var)
    exact_decreasing = all(x > y for x, y in
                           zip(exact_ratios, exact_ratios[1:]))

    # (c) the empirical signal-to-noise ratio drops from h=5 to h=8
    # (adjacent steps shrink below Monte-Carlo resolution, so the trend
    # is certified on the endpoints, at 8e6 sites a >5 sigma decision)
    rng = np.random.default_rng(RNG_SEED + 7)
    emp_ratios = {}
    for h in (5, 8):
        s = _spin_sums_fast(h, mu, 8_000_000, rng).astype(np.float64)
        u = (s * s - 2.0 ** h) / 2.0
        emp_ratios[h] = float(u.mean()) ** 2 / float(u.var())
    elapsed = time.time() - t0
    ok = (not mean_fail and exact_decreasing
          and emp_ratios[5] > emp_ratios[8])
    report("07-full-sum-negative-control", ok,
           f"mean formula 4-sigma fails at h={mean_fail or 'none'}, exact "
           f"ratios={['%.5f' % r for r in exact_ratios]} decreasing="
           f"{exact_decreasing}, empirical ratio h5={emp_ratios[5]:.5f} > "
           f"h8={emp_ratios[8]:.5f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 8. Distorted-metric reconstruction contract
# ---------------------------------------------------------------------------


def test_08_distortion_contract():
    t0 = time.time()
    f, g = 0.1, 0.2
    params = rp.RegularityParams(f, g, 1.2)
    rates_by_n = {}
    for n in (32, 64, 128):
        psi = 5 * g * math.log(n)
        cfg = rp.ReconstructionConfig(trust_cap=psi, tau=f / 5)
        hits = 0
        for seed in range(40):
            tree = rp.generate_random_regular(n, params, seed=seed)
            hits += rp.end_to_end_contract_check(
                tree, cfg, f / 5, psi, seeds=[seed * 13 + 1])
        rates_by_n[n] = hits / 40
    elapsed = time.time() - t0
    ok = all(rate >= 0.95 for rate in rates_by_n.values()) and elapsed < 300.0
    report("08-distortion-contract", ok,
           f"recovery rates {rates_by_n} (each >=0.95), "
           f"{elapsed:.0f}s (<300s)")


# ---------------------------------------------------------------------------
# 9. End-to-end reconstruction from simulated data
# ---------------------------------------------------------------------------


def test_09_end_to_end():
    t0 = time.time()
    params = rp.RegularityParams(0.1, 0.2, 1.5)
    rates = rp.RateDistribution.two_speed(0.5, 1.5)
    model = rp.SubstitutionModel.uniform(4)
    assert rp.check_assumption(rates, params).ok
    hits = 0
    for seed in range(20):
        tree = rp.generate_random_regular(128, params, seed=seed)
        aln = rp.simulate_alignment(tree, model, rates, 20_000,
                                    seed=seed + 3000)
        rep = rp.run_pipeline(aln, rp.PipelineConfig(reg=params, rates=rates),
                              truth=tree)
        if rep.ok and rep.rf_distance == 0:
            hits += 1
    elapsed = time.time() - t0
    ok = hits >= 18 and elapsed < 1800.0
    report("09-end-to-end", ok,
           f"RF=0 in {hits}/20 runs (need >=18), n=128 k=20000, "
           f"{elapsed:.0f}s (<1800s)")


# ---------------------------------------------------------------------------
# 10. Identifiability witness by exhaustive enumeration
# ---------------------------------------------------------------------------


def test_10_identifiability_witness():
    t0 = time.time()
    p1 = rp.parse_newick(
        "((a:0.1,b:0.2):0.15,(c:0.12,d:0.18):0.11,e:0.14);")
    p2 = rp.parse_newick(
        "((a:0.1,c:0.2):0.15,(b:0.12,d:0.18):0.11,e:0.14);")
    rates = rp.RateDistribution.two_speed(0.5, 1.5)
    model = rp.SubstitutionModel.uniform(2)
    tv = rp.identifiability_witness(p1, p2, rates, rates, model)
    elapsed = time.time() - t0
    ok = tv > 0.0 and elapsed < 60.0
    report("10-identifiability", ok,
           f"TV={tv:.6f} (>0) between distinct 5-leaf topologies, "
           f"{elapsed:.0f}s (<60s)")
