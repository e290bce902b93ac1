"""End-to-end orchestration: alignment in, topology plus diagnostics out.

``run_pipeline`` chains the inference stages

    agreement matrix -> close pairs -> sparsify -> per-site statistics
    -> binning constants -> bin assignment -> abundant bin
    -> bin agreement -> distorted metric -> topology

reading nothing but the alignment character matrix (the hidden rate
sidecar is stripped on entry, so inference cannot leak it even by
accident).  Stage failures of the statistical kind (no abundant bin, no
confirmable cherry) are captured in the report rather than raised;
diagnostics against the true tree and the hidden rates are filled in
afterwards when the caller provides them.

Also here: the desk-scale identifiability oracle (exact total-variation
distance between leaf distributions of two small models) and the
slow/fast site classification report for two-speed simulations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import binning as _binning
from . import clustering as _clustering
from . import distances as _distances
from . import reconstruct as _reconstruct
from .models import (Alignment, RateDistribution, SubstitutionModel,
                     check_assumption, exact_leaf_distribution)
from .trees import Phylogeny, RegularityParams, Topology, robinson_foulds, tree_metric

__all__ = [
    "ClassificationReport",
    "PipelineConfig",
    "PipelineError",
    "PipelineReport",
    "StageRecord",
    "identifiability_witness",
    "run_pipeline",
    "site_classification_report",
]


class PipelineError(RuntimeError):
    """A stage failed; carries the stage name and a remediation hint."""

    def __init__(self, stage: str, cause: BaseException, hint: str):
        super().__init__(f"stage {stage!r} failed: {cause} (hint: {hint})")
        self.stage = stage
        self.cause = cause
        self.hint = hint


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run needs besides the alignment itself.

    ``rates`` is the modeled rate distribution; when provided, the
    regularity assumption is checked before anything runs.  ``k`` and
    ``seed`` document the simulation that produced the alignment (they
    are echoed into reports, not used for inference).
    """

    reg: RegularityParams
    model: SubstitutionModel | None = None
    rates: RateDistribution | None = None
    k: int | None = None
    seed: int | None = None
    gamma_u: float | None = None
    recon: _reconstruct.ReconstructionConfig | None = None


@dataclass
class StageRecord:
    name: str
    status: str  # "ok" | "failed" | "skipped"
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)
    reason: str = ""


@dataclass
class PipelineReport:
    """Everything a run produced, stage by stage.

    ``ok`` is true iff every stage ran; on failure ``error`` holds the
    annotated exception and downstream stages are marked skipped.
    Oracle-mode fields (``rf_distance``, ``certificate``,
    ``distortion``) are filled only when ground truth was supplied.
    """

    stages: list = field(default_factory=list)
    topology: Topology | None = None
    pair_set: _clustering.PairSet | None = None
    u_values: np.ndarray | None = None
    bin_params: _binning.BinningParams | None = None
    assignment: _binning.BinAssignment | None = None
    abundant_bin: int | None = None
    bin_size: int | None = None
    dhat: _distances.DistortedMetric | None = None
    rf_distance: int | None = None
    certificate: _clustering.SparsityCertificate | None = None
    distortion: _distances.DistortionReport | None = None
    error: PipelineError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def raise_if_failed(self):
        if self.error is not None:
            raise self.error

    def stage(self, name: str) -> StageRecord:
        for rec in self.stages:
            if rec.name == name:
                return rec
        raise KeyError(name)


_STAGES = (
    "agreement_matrix",
    "close_pairs",
    "sparsify",
    "site_statistics",
    "derive_params",
    "bin_sites",
    "select_abundant",
    "bin_agreement",
    "distorted_metric",
    "reconstruct_topology",
)

_HINTS = {
    "close_pairs": "check f/g against the data scale",
    "sparsify": "increase k so agreement estimates stabilize",
    "select_abundant": "increase k",
    "reconstruct_topology": "increase k or loosen the trust cap",
}


def run_pipeline(aln: Alignment, cfg: PipelineConfig,
                 truth: Phylogeny | None = None) -> PipelineReport:
    """Run the full inference chain on an alignment.

    The sidecar of hidden rates, if present, is stripped before any
    stage runs; with ``truth`` (and the original sidecar) given, oracle
    diagnostics are appended after inference finishes.  Statistical
    stage failures are recorded in the report (``report.ok`` false)
    instead of raising; use ``report.raise_if_failed()`` to escalate.
    """
    if cfg.rates is not None:
        verdict = check_assumption(cfg.rates, cfg.reg)
        if not verdict.ok:
            raise ValueError(
                "model assumption violated: phi_inverse(exp(-6g)) = "
                f"{verdict.phi_inv_6g!r} exceeds the distance cap "
                f"{cfg.reg.distance_cap!r}"
            )
    stripped = aln.without_lambdas()
    model = cfg.model or SubstitutionModel.uniform(aln.r)
    report = PipelineReport()
    thresholds = _clustering.ClusteringThresholds.for_max_edge(cfg.reg.max_edge)

    state: dict = {}

    def run_stage(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:  # noqa: BLE001 - annotated and recorded
            hint = _HINTS.get(name, "inspect the stage detail")
            err = PipelineError(name, exc, hint)
            report.stages.append(StageRecord(
                name=name, status="failed",
                seconds=time.perf_counter() - t0, reason=str(err)))
            report.error = err
            return None
        report.stages.append(StageRecord(
            name=name, status="ok", seconds=time.perf_counter() - t0))
        return out

    def skip_remaining(after: str):
        idx = _STAGES.index(after)
        for name in _STAGES[idx + 1:]:
            report.stages.append(StageRecord(
                name=name, status="skipped",
                reason=f"upstream stage {after!r} failed"))

    for name in _STAGES:
        if name == "agreement_matrix":
            out = run_stage(name, lambda: _clustering.agreement_matrix(
                stripped, model))
            state["qmat"] = out
        elif name == "close_pairs":
            out = run_stage(name, lambda: _clustering.close_pairs(
                state["qmat"], thresholds))
            state["candidates"] = out
            if out is not None:
                report.stages[-1].detail["candidate_pairs"] = len(out)
        elif name == "sparsify":
            out = run_stage(name, lambda: _clustering.sparsify(
                state["candidates"], state["qmat"], thresholds))
            report.pair_set = out
            if out is not None:
                report.stages[-1].detail["pair_count"] = len(out)
        elif name == "site_statistics":
            out = run_stage(name, lambda: _clustering.all_site_statistics(
                stripped, report.pair_set, model))
            report.u_values = out
        elif name == "derive_params":
            out = run_stage(name, lambda: _binning.derive_params(
                cfg.reg, stripped.n, cfg.gamma_u))
            report.bin_params = out
        elif name == "bin_sites":
            out = run_stage(name, lambda: _binning.bin_sites(
                report.u_values, report.bin_params))
            report.assignment = out
        elif name == "select_abundant":
            out = run_stage(name, lambda: _binning.select_abundant(
                report.assignment, stripped.k))
            report.abundant_bin = out
            if out is not None:
                report.bin_size = len(report.assignment.bins[out])
                report.stages[-1].detail["abundant_bin"] = out
                report.stages[-1].detail["bin_size"] = report.bin_size
        elif name == "bin_agreement":
            out = run_stage(name, lambda: _distances.bin_agreement(
                stripped, report.assignment.bins[report.abundant_bin], model))
            state["qstar"] = out
        elif name == "distorted_metric":
            out = run_stage(name, lambda: _distances.distorted_metric(
                state["qstar"], source_bin=report.abundant_bin,
                bin_size=report.bin_size))
            report.dhat = out
        elif name == "reconstruct_topology":
            out = run_stage(name, lambda: _reconstruct.reconstruct_topology(
                report.dhat, cfg.recon,
                labels=truth.labels if truth is not None else None))
            report.topology = out
        if report.error is not None:
            skip_remaining(name)
            break

    if truth is not None:
        _oracle_diagnostics(report, aln, cfg, truth)
    return report


def _oracle_diagnostics(report: PipelineReport, aln: Alignment,
                        cfg: PipelineConfig, truth: Phylogeny):
    if report.topology is not None:
        report.rf_distance = robinson_foulds(report.topology, truth.topology())
    if report.pair_set is not None:
        report.certificate = _clustering.certify_sparsity(
            report.pair_set, truth, cfg.reg)
    if (report.dhat is not None and aln.hidden_lambdas is not None
            and report.abundant_bin is not None):
        bin_idx = report.assignment.bins[report.abundant_bin]
        lam_star = float(aln.hidden_lambdas[bin_idx].mean())
        tau = lam_star * cfg.reg.min_edge / 5.0
        psi = 5.0 * lam_star * cfg.reg.max_edge * np.log(aln.n)
        report.distortion = _distances.verify_distortion(
            report.dhat, lam_star * tree_metric(truth), tau, psi)


# ---------------------------------------------------------------------------
# Desk-scale oracles and diagnostics
# ---------------------------------------------------------------------------


def identifiability_witness(p1: Phylogeny, p2: Phylogeny,
                            rates1: RateDistribution,
                            rates2: RateDistribution,
                            model: SubstitutionModel) -> float:
    """Exact total-variation distance between the two leaf distributions.

    Both instances must be small enough for exact enumeration and share
    the same leaf label set.  A strictly positive value witnesses that
    the models are distinguishable from leaf data alone.
    """
    if set(p1.labels) != set(p2.labels):
        raise ValueError("instances must share a leaf label set")
    d1 = exact_leaf_distribution(p1, model, rates1)
    d2 = exact_leaf_distribution(p2, model, rates2)
    # align the second distribution's leaf axes to the first's label order
    axis_of = {lab: i for i, lab in enumerate(p2.labels)}
    perm = [axis_of[lab] for lab in p1.labels]
    d2 = np.transpose(d2, axes=perm)
    return 0.5 * float(np.abs(d1 - d2).sum())


@dataclass(frozen=True)
class ClassificationReport:
    """Slow/fast site classification against the hidden rate sidecar."""

    accuracy: float
    threshold: float
    mean_slow: float
    mean_fast: float
    n_slow: int
    n_fast: int
    confusion: tuple  # ((true slow pred slow, true slow pred fast), (...))

    def lines(self):
        yield f"accuracy={self.accuracy!r}"
        yield f"threshold={self.threshold!r}"
        yield f"mean_slow={self.mean_slow!r}"
        yield f"mean_fast={self.mean_fast!r}"
        yield f"n_slow={self.n_slow}"
        yield f"n_fast={self.n_fast}"
        (tss, tsf), (tfs, tff) = self.confusion
        yield f"confusion={tss},{tsf},{tfs},{tff}"


def site_classification_report(aln: Alignment, pairs: _clustering.PairSet,
                               truth: Phylogeny,
                               model: SubstitutionModel | None = None
                               ) -> ClassificationReport:
    """Classify sites as slow or fast by thresholding the statistic.

    Requires the simulator sidecar (two distinct hidden rates at most)
    and the true tree, which supplies the conditional-mean curve whose
    midpoint is the decision threshold.  Slow sites have the smaller
    rate, hence the larger statistic.
    """
    if aln.hidden_lambdas is None:
        raise ValueError("alignment carries no hidden rate sidecar")
    model = model or SubstitutionModel.uniform(aln.r)
    speeds = np.unique(aln.hidden_lambdas)
    if len(speeds) > 2:
        raise ValueError("classification report needs two-speed rates")
    lam_slow = float(speeds[0])
    lam_fast = float(speeds[-1])
    curve = _clustering.expected_statistic_curve(
        truth, pairs, [lam_slow, lam_fast])
    mean_slow, mean_fast = curve[0][1], curve[1][1]
    threshold = 0.5 * (mean_slow + mean_fast)
    u = _clustering.all_site_statistics(aln, pairs, model)
    lam_mid = 0.5 * (lam_slow + lam_fast)
    truly_fast = aln.hidden_lambdas > lam_mid
    predicted_fast = u < threshold
    accuracy = float((truly_fast == predicted_fast).mean())
    tss = int((~truly_fast & ~predicted_fast).sum())
    tsf = int((~truly_fast & predicted_fast).sum())
    tfs = int((truly_fast & ~predicted_fast).sum())
    tff = int((truly_fast & predicted_fast).sum())
    return ClassificationReport(
        accuracy=accuracy, threshold=threshold,
        mean_slow=mean_slow, mean_fast=mean_fast,
        n_slow=int((~truly_fast).sum()), n_fast=int(truly_fast.sum()),
        confusion=((tss, tsf), (tfs, tff)),
    )
