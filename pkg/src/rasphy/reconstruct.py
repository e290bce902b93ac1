"""Topology recovery from a distorted metric.

The input is a symmetric matrix of distance estimates that is accurate
(within ``tau``) on every entry below a trust horizon and arbitrary or
``+inf`` beyond it.  Reconstruction proceeds by cherry agglomeration:

1. among trusted entries, find a pair whose quartet split against the
   nearest trusted witnesses is confirmed with margin above ``4 * tau``
   (four entries enter a four-point comparison, each off by at most
   ``tau``, so a genuine cherry margin of twice the scaled minimum edge
   weight survives whenever ``tau`` is at most a fifth of it);
2. merge the pair into a pseudo-leaf placed at the cherry apex, taking
   the median of the available distance estimates per neighbor for
   robustness against censored entries;
3. repeat until three nodes remain.

Every comparison is homogeneous in the distance scale, so a global
rescaling of the input (with the configuration scaled along) cannot
change any decision; the unknown scaling factor of the estimated metric
is therefore harmless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distances import DistortedMetric
from .trees import Phylogeny, Topology, quartet_margin, tree_metric

__all__ = [
    "AmbiguousCherry",
    "DisconnectedTrustGraph",
    "ReconstructionConfig",
    "end_to_end_contract_check",
    "inject_distortion",
    "reconstruct_topology",
]


class DisconnectedTrustGraph(RuntimeError):
    """No candidate cherry could be tested; the trust horizon or the
    sample size is too small."""


class AmbiguousCherry(RuntimeError):
    """Candidate cherries exist but none passed the quartet margin test."""


@dataclass(frozen=True)
class ReconstructionConfig:
    """Tuning knobs for the agglomeration.

    ``trust_cap``       only entries strictly below it are used; ``None``
                        selects a data-driven cap (3 times the 20th
                        percentile of the finite entries, clipped to the
                        largest finite entry).
    ``tau``             noise tolerance; quartet splits must win by more
                        than ``4 * tau``.
    ``witness_count``   how many nearest witnesses vet each candidate.
    """

    trust_cap: float | None = None
    tau: float = 0.0
    witness_count: int = 6

    def __post_init__(self):
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")
        if self.trust_cap is not None and not self.trust_cap > 4.0 * self.tau:
            raise ValueError("trust_cap must exceed 4 * tau")
        if self.witness_count < 2:
            raise ValueError("witness_count must be at least 2")


def _resolve_trust_cap(values: np.ndarray, cfg: ReconstructionConfig) -> float:
    if cfg.trust_cap is not None:
        return cfg.trust_cap
    n = values.shape[0]
    iu = np.triu_indices(n, k=1)
    finite = values[iu][np.isfinite(values[iu])]
    if finite.size == 0:
        raise DisconnectedTrustGraph("no finite distance estimates")
    cap = min(3.0 * float(np.percentile(finite, 20)), float(finite.max()))
    # strict comparisons below; nudge so the largest finite entry stays usable
    cap = np.nextafter(cap, np.inf)
    if not cap > 4.0 * cfg.tau:
        raise DisconnectedTrustGraph(
            f"data-driven trust cap {cap} does not exceed 4*tau={4 * cfg.tau}"
        )
    return cap


def reconstruct_topology(dhat, cfg: ReconstructionConfig | None = None,
                         labels=None) -> Topology:
    """Recover the leaf topology from a distorted metric.

    ``dhat`` is a :class:`DistortedMetric` or a symmetric ``(n, n)``
    array with ``+inf`` for missing entries.  ``labels`` names the
    leaves (defaults to ``leaf_0 ..``).

    Contract: if the input is a valid distortion of a tree metric whose
    (rescaled) edge weights lie in ``[f', g']`` with accuracy
    ``tau <= f'/5`` and trust horizon ``psi >= 5 g' log n``, and
    ``cfg.trust_cap <= psi``, the output equals the true topology.
    """
    cfg = cfg or ReconstructionConfig()
    values = dhat.values if isinstance(dhat, DistortedMetric) else \
        np.asarray(dhat, dtype=float)
    n = values.shape[0]
    if n < 4:
        raise ValueError("need at least 4 leaves")
    if labels is None:
        labels = [f"leaf_{i}" for i in range(n)]
    cap = _resolve_trust_cap(values, cfg)
    margin_floor = 4.0 * cfg.tau

    total = 2 * n - 3  # leaves plus every merge product
    d = np.full((total, total), np.inf)
    d[:n, :n] = values
    np.fill_diagonal(d, 0.0)
    clades: list = list(labels)
    active: list[int] = list(range(n))
    next_id = n

    while len(active) > 3:
        act = np.array(active)
        sub = d[np.ix_(act, act)]
        ii, jj = np.triu_indices(len(act), k=1)
        vals = sub[ii, jj]
        usable = vals < cap
        order = np.argsort(vals[usable], kind="stable")
        cand = list(zip(act[ii[usable]][order].tolist(),
                        act[jj[usable]][order].tolist()))
        merged = False
        tested_any = False
        for a, b in cand:
            witnesses = [
                c for c in active
                if c != a and c != b and d[a, c] < cap and d[b, c] < cap
            ]
            witnesses.sort(key=lambda c: (min(d[a, c], d[b, c]), c))
            witnesses = witnesses[: cfg.witness_count]
            pairs = [
                (c, e)
                for i_, c in enumerate(witnesses)
                for e in witnesses[i_ + 1:]
                if d[c, e] < cap
            ]
            if not pairs:
                continue
            tested_any = True
            confirmed = True
            for c, e in pairs:
                split, margin = quartet_margin(d, a, b, c, e)
                if set(split[0]) not in ({a, b}, {c, e}) or \
                        margin <= margin_floor:
                    confirmed = False
                    break
            if not confirmed:
                continue
            # merge the confirmed cherry at its apex
            heights = [0.5 * (d[a, b] + d[a, c] - d[b, c]) for c in witnesses]
            h_a = float(np.median(heights))
            h_a = min(max(h_a, 0.0), d[a, b])
            h_b = d[a, b] - h_a
            v = next_id
            next_id += 1
            clades.append((clades[a], clades[b]))
            for c in active:
                if c == a or c == b:
                    continue
                ests = []
                if np.isfinite(d[a, c]) and np.isfinite(d[b, c]):
                    ests.append(0.5 * (d[a, c] + d[b, c] - d[a, b]))
                if np.isfinite(d[a, c]):
                    ests.append(d[a, c] - h_a)
                if np.isfinite(d[b, c]):
                    ests.append(d[b, c] - h_b)
                est = max(float(np.median(ests)), 0.0) if ests else np.inf
                d[v, c] = d[c, v] = est
            active = [c for c in active if c != a and c != b]
            active.append(v)
            merged = True
            break
        if not merged:
            if tested_any:
                raise AmbiguousCherry(
                    f"no candidate cherry won its quartet tests by more than "
                    f"4*tau={margin_floor} with {len(active)} nodes left"
                )
            raise DisconnectedTrustGraph(
                f"no candidate cherry has two trusted witnesses with "
                f"{len(active)} nodes left; trust horizon or sample size "
                "too small"
            )
    return Topology.from_nested(tuple(clades[c] for c in active))


def inject_distortion(metric: np.ndarray, tau: float, psi: float,
                      seed: int) -> DistortedMetric:
    """Synthetic valid distortion of an exact metric.

    Entries at distance ``psi + tau`` or beyond are censored to ``+inf``;
    all others receive independent uniform noise strictly inside
    ``(-tau, tau)``.  With ``tau = 0`` the surviving entries are exact.
    """
    rng = np.random.default_rng(seed)
    d = np.asarray(metric, dtype=float)
    n = d.shape[0]
    out = d.copy()
    if tau > 0.0:
        iu = np.triu_indices(n, k=1)
        noise = rng.uniform(-tau, tau, size=len(iu[0])) * (1.0 - 1e-12)
        out[iu] += noise
        out.T[iu] = out[iu]
    out[d >= psi + tau] = np.inf
    np.fill_diagonal(out, 0.0)
    return DistortedMetric(values=out)


def end_to_end_contract_check(p: Phylogeny, cfg: ReconstructionConfig,
                              injected_tau: float, injected_psi: float,
                              seeds, lam_scale: float = 1.0) -> float:
    """Fraction of seeds for which reconstruction from a synthetic
    distortion of the (rescaled) true metric returns the true topology.

    Out-of-contract settings may fail; failures and reconstruction
    errors count against the rate but never raise.
    """
    truth = p.topology()
    metric = lam_scale * tree_metric(p)
    hits = 0
    seeds = list(seeds)
    for seed in seeds:
        dhat = inject_distortion(metric, injected_tau, injected_psi, seed)
        try:
            recon = reconstruct_topology(dhat, cfg, labels=p.labels)
        except (AmbiguousCherry, DisconnectedTrustGraph):
            continue
        if recon == truth:
            hits += 1
    return hits / len(seeds)
