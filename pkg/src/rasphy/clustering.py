"""Site clustering statistics built from sparse families of leaf pairs.

The per-site statistic averages normalized agreement indicators over a
set of leaf pairs.  For it to discriminate between per-site rates the
pair set must consist of close pairs (separation) whose connecting paths
are pairwise edge-disjoint and which number linearly in the leaf count
(concentration).  This module builds such pair sets two ways:

* data-driven (``close_pairs`` then ``sparsify``), using only the
  empirical agreement matrix and thresholds derived from the maximum
  edge weight g, never true distances;
* oracle (``oracle_sparsify``), using the true tree metric, for
  verification of the sparsity properties.

``site_statistic`` evaluates the per-site average; ``full_sum_statistic``
is the naive all-pairs variant kept as a negative control (its
signal-to-noise degrades on large trees).  ``certify_sparsity`` checks
the three sparse-pair properties against a known tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import Alignment, SubstitutionModel
from .trees import Phylogeny, RegularityParams, tree_metric

__all__ = [
    "AgreementMatrix",
    "ClusteringThresholds",
    "PairSet",
    "SparsityCertificate",
    "agreement_matrix",
    "all_site_statistics",
    "certify_sparsity",
    "close_pairs",
    "expected_statistic_curve",
    "full_sum_statistic",
    "invert_statistic_curve",
    "oracle_sparsify",
    "site_statistic",
    "sparsify",
    "sparsity_constant",
]


@dataclass(frozen=True)
class AgreementMatrix:
    """Empirical normalized pair agreement.

    ``values[a, b]`` is the average over sites of
    ``(indicator(state_a == state_b) - q_inf) / p_inf``; its expectation
    under the model is ``phi(d(a, b))``.  Entries lie in
    ``[-q_inf/p_inf, 1]``.  The diagonal holds the self-agreement value
    1.0 (a leaf always agrees with itself), which the sparsification
    step relies on to discard pairs sharing a leaf.
    """

    values: np.ndarray
    sample_count: int


@dataclass(frozen=True)
class ClusteringThresholds:
    """Agreement cutoffs derived from the maximum edge weight g.

    ``close_level = exp(-4.5 g)``   admit a pair as "close"
    ``prune_level = exp(-5.5 g)``   treat two leaves as crowding
    ``mid_level   = exp(-5 g)``     the target correlation scale
    ``safety_gap``                  smallest of the four consecutive
                                    gaps between ``exp(-4g) ..
                                    exp(-6g)``; estimation errors below
                                    it cannot cross any threshold.
    """

    close_level: float
    prune_level: float
    mid_level: float
    safety_gap: float

    @classmethod
    def for_max_edge(cls, g: float) -> "ClusteringThresholds":
        if g <= 0.0:
            raise ValueError("max edge weight must be positive")
        levels = [math.exp(-c * g) for c in (4.0, 4.5, 5.0, 5.5, 6.0)]
        gap = min(levels[i] - levels[i + 1] for i in range(4))
        return cls(close_level=levels[1], prune_level=levels[3],
                   mid_level=levels[2], safety_gap=gap)

    def __post_init__(self):
        if not (self.prune_level < self.mid_level < self.close_level):
            raise ValueError("thresholds must be ordered prune < mid < close")
        if self.safety_gap <= 0.0:
            raise ValueError("safety gap must be positive")


@dataclass(frozen=True)
class PairSet:
    """Unordered distinct leaf pairs, each stored as ``(a, b)`` with a < b.

    ``provenance`` records whether the set came from the data-driven
    path ("data-driven") or from true distances ("oracle").
    """

    pairs: tuple
    provenance: str = "data-driven"

    def __post_init__(self):
        canon = tuple(sorted((min(a, b), max(a, b)) for a, b in self.pairs))
        if any(a == b for a, b in canon):
            raise ValueError("a pair may not repeat a leaf")
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate pair")
        object.__setattr__(self, "pairs", canon)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class SparsityCertificate:
    """Oracle-mode verification of the three sparse-pair properties.

    ``gamma_s = 2 ** -(2 * floor(M / f) + 2)`` is the guaranteed linear
    density.  The certificate is complete only if all three checks ran;
    ``ok`` means all three passed.
    """

    gamma_s: float
    path_disjoint: bool
    size_ok: bool
    distance_ok: bool
    pair_count: int
    n_leaves: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.path_disjoint and self.size_ok and self.distance_ok

    def lines(self):
        yield f"gamma_s={self.gamma_s!r}"
        yield f"pair_count={self.pair_count}"
        yield f"n_leaves={self.n_leaves}"
        yield f"path_disjoint={self.path_disjoint}"
        yield f"size_ok={self.size_ok}"
        yield f"distance_ok={self.distance_ok}"
        yield f"ok={self.ok}"
        if self.detail:
            yield f"detail={self.detail}"


def sparsity_constant(params: RegularityParams) -> float:
    """The guaranteed pair density ``2 ** -(2*floor(M/f) + 2)``."""
    return 2.0 ** -(2 * math.floor(params.distance_cap / params.min_edge) + 2)


# ---------------------------------------------------------------------------
# Empirical agreement
# ---------------------------------------------------------------------------


def agreement_matrix(aln: Alignment, model: SubstitutionModel) -> AgreementMatrix:
    """Normalized agreement averages for every leaf pair.

    Computed with one-hot matrix products, exact in float64 (match
    counts are integers well below 2**53).
    """
    data = aln.data
    k = aln.k
    counts = np.zeros((aln.n, aln.n))
    for x in range(aln.r):
        hot = (data == x).astype(np.float64)
        counts += hot.T @ hot
    q = (counts / k - model.q_inf) / model.p_inf
    np.fill_diagonal(q, 1.0)
    return AgreementMatrix(values=q, sample_count=k)


def close_pairs(q: AgreementMatrix, t: ClusteringThresholds) -> PairSet:
    """All pairs whose empirical agreement reaches ``close_level``.

    The boundary is closed: a pair sitting exactly on the threshold is
    included.
    """
    vals = q.values
    n = vals.shape[0]
    a_idx, b_idx = np.triu_indices(n, k=1)
    keep = vals[a_idx, b_idx] >= t.close_level
    pairs = tuple(zip(a_idx[keep].tolist(), b_idx[keep].tolist()))
    return PairSet(pairs, provenance="data-driven")


def sparsify(candidates: PairSet, q: AgreementMatrix,
             t: ClusteringThresholds) -> PairSet:
    """Greedily thin a candidate set so surviving pairs do not crowd.

    Pairs are picked in descending agreement (ties broken
    lexicographically).  After a pick, every remaining pair with a leaf
    whose agreement with either picked leaf reaches ``prune_level`` is
    dropped; since self-agreement is 1, the picked pair and anything
    sharing a leaf with it always go.
    """
    if len(candidates) == 0:
        raise ValueError("candidate pair set is empty")
    vals = q.values
    order = sorted(candidates, key=lambda ab: (-vals[ab[0], ab[1]], ab))
    pa = np.array([a for a, _ in order])
    pb = np.array([b for _, b in order])
    alive = np.ones(len(order), dtype=bool)
    kept = []
    while True:
        idx = np.argmax(alive)
        if not alive[idx]:
            break
        a_star, b_star = order[idx]
        kept.append((a_star, b_star))
        crowd = np.maximum(
            np.maximum(vals[pa, a_star], vals[pa, b_star]),
            np.maximum(vals[pb, a_star], vals[pb, b_star]),
        )
        alive &= crowd < t.prune_level
    return PairSet(tuple(kept), provenance=candidates.provenance)


def oracle_sparsify(p: Phylogeny, params: RegularityParams,
                    m: float) -> PairSet:
    """Idealized sparsification with the true tree metric.

    Starts from all pairs at distance at most ``m`` (requires
    ``4g < m < M``), picks pairs in ascending distance, and after each
    pick removes every pair having a leaf within distance ``m`` of
    either picked leaf.  The output is pairwise path-disjoint, has at
    least ``gamma_s * n`` pairs, and all its distances lie in
    ``[2f, M]``.
    """
    g = params.max_edge
    if not (4.0 * g < m < params.distance_cap):
        raise ValueError(f"need 4g < m < M, got m={m}, 4g={4 * g}, "
                         f"M={params.distance_cap}")
    dist = tree_metric(p)
    n = p.n_leaves
    a_idx, b_idx = np.triu_indices(n, k=1)
    within = dist[a_idx, b_idx] <= m
    order = sorted(
        zip(a_idx[within].tolist(), b_idx[within].tolist()),
        key=lambda ab: (dist[ab[0], ab[1]], ab),
    )
    pa = np.array([a for a, _ in order])
    pb = np.array([b for _, b in order])
    alive = np.ones(len(order), dtype=bool)
    kept = []
    while len(order) > 0:
        idx = np.argmax(alive)
        if not alive[idx]:
            break
        a_star, b_star = order[idx]
        kept.append((a_star, b_star))
        near = np.minimum(
            np.minimum(dist[pa, a_star], dist[pa, b_star]),
            np.minimum(dist[pb, a_star], dist[pb, b_star]),
        )
        alive &= near > m
    return PairSet(tuple(kept), provenance="oracle")


def certify_sparsity(pairs: PairSet, p: Phylogeny,
                     params: RegularityParams) -> SparsityCertificate:
    """Verify the three sparse-pair properties against the true tree.

    Path-disjointness is checked by counting edge usage across all pair
    paths (pairwise disjoint iff no edge is used twice).
    """
    dist = tree_metric(p)
    n = p.n_leaves
    gamma_s = sparsity_constant(params)

    usage: dict = {}
    clash = None
    for a, b in pairs:
        for e in p.path_edges(a, b):
            if e in usage:
                clash = (usage[e], (a, b))
                break
            usage[e] = (a, b)
        if clash:
            break

    size_ok = len(pairs) >= gamma_s * n
    dmin, dmax = 2.0 * params.min_edge, params.distance_cap
    dvals = [dist[a, b] for a, b in pairs]
    distance_ok = all(dmin <= d <= dmax for d in dvals)
    detail = ""
    if clash:
        detail = f"paths of {clash[0]} and {clash[1]} share an edge"
    elif not distance_ok:
        bad = [(a, b) for (a, b), d in zip(pairs, dvals)
               if not (dmin <= d <= dmax)]
        detail = f"{len(bad)} pairs outside [2f, M], first {bad[0]}"
    return SparsityCertificate(
        gamma_s=gamma_s,
        path_disjoint=clash is None,
        size_ok=size_ok,
        distance_ok=distance_ok,
        pair_count=len(pairs),
        n_leaves=n,
        detail=detail,
    )


# ---------------------------------------------------------------------------
# The statistic
# ---------------------------------------------------------------------------


def _pair_indicator_stats(aln: Alignment, pairs: PairSet,
                          model: SubstitutionModel) -> np.ndarray:
    data = aln.data
    pa = np.fromiter((a for a, _ in pairs), dtype=np.int64, count=len(pairs))
    pb = np.fromiter((b for _, b in pairs), dtype=np.int64, count=len(pairs))
    agree = (data[:, pa] == data[:, pb]).mean(axis=1)
    return (agree - model.q_inf) / model.p_inf


def all_site_statistics(aln: Alignment, pairs: PairSet,
                        model: SubstitutionModel) -> np.ndarray:
    """Vector of the clustering statistic for every site."""
    if len(pairs) == 0:
        raise ValueError("pair set is empty")
    return _pair_indicator_stats(aln, pairs, model)


def site_statistic(aln: Alignment, pairs: PairSet, i: int,
                   model: SubstitutionModel) -> float:
    """Average normalized agreement over the pair set at site ``i``.

    Conditioned on the site's scaling factor ``lam`` its mean is the
    pair average of ``exp(-lam * d(a, b))``, strictly decreasing in
    ``lam``.
    """
    if len(pairs) == 0:
        raise ValueError("pair set is empty")
    row = aln.data[i]
    agree = np.fromiter((row[a] == row[b] for a, b in pairs),
                        dtype=np.float64, count=len(pairs)).mean()
    return float((agree - model.q_inf) / model.p_inf)


def expected_statistic_curve(p: Phylogeny, pairs: PairSet, lambda_grid):
    """Exact conditional-mean curve ``lam -> mean over pairs of
    exp(-lam * d(a, b))`` (strictly decreasing).  Oracle diagnostic; uses
    the true metric."""
    if len(pairs) == 0:
        raise ValueError("pair set is empty")
    dist = tree_metric(p)
    dvals = np.array([dist[a, b] for a, b in pairs])
    return [(float(lam), float(np.exp(-lam * dvals).mean()))
            for lam in lambda_grid]


def invert_statistic_curve(p: Phylogeny, pairs: PairSet,
                           u_value: float) -> float:
    """The rate whose conditional-mean statistic equals ``u_value``.

    Oracle-mode diagnostic (needs true distances): inverts the strictly
    decreasing curve of :func:`expected_statistic_curve` by bisection
    with bracket doubling, e.g. to name the rate a statistic bin's
    midpoint corresponds to.  ``u_value`` must lie in (0, 1].
    """
    if not (0.0 < u_value <= 1.0):
        raise ValueError("u_value must lie in (0, 1]")
    dist = tree_metric(p)
    dvals = np.array([dist[a, b] for a, b in pairs])

    def curve(lam: float) -> float:
        return float(np.exp(-lam * dvals).mean())

    if u_value == 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while curve(hi) > u_value:
        lo = hi
        hi *= 2.0
        if hi > 1e9:
            raise ValueError(f"curve never reaches {u_value}")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if curve(mid) > u_value:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def full_sum_statistic(aln: Alignment, i: int,
                       model: SubstitutionModel) -> float:
    """All-pairs agreement sum at site ``i`` (negative baseline).

    Sums the normalized indicator over every distinct leaf pair, without
    the pair-count normalization.  In the two-state uniform model this
    equals ``sum over pairs of sigma_a * sigma_b`` for the +/-1 site
    encoding.
    """
    return float(full_sum_statistics(aln, model)[i])


def full_sum_statistics(aln: Alignment, model: SubstitutionModel) -> np.ndarray:
    """Vectorized :func:`full_sum_statistic` over all sites."""
    data = aln.data
    n = aln.n
    agree = np.zeros(aln.k)
    for x in range(aln.r):
        cx = (data == x).sum(axis=1).astype(np.float64)
        agree += cx * (cx - 1.0) / 2.0
    n_pairs = n * (n - 1) / 2.0
    return (agree - model.q_inf * n_pairs) / model.p_inf
