"""Evaluation harness: negative-outfit generation, precision/recall over
compatibility scores, gold-standard capsule scoring, and solver benchmarks.

Negatives are built the trustworthy way: swap one piece of a positive outfit
for a same-layer piece taken from an outfit whose meta-label is declared
exclusive (winter vs summer, work vs vacation), so the result is very likely
a true negative rather than an unobserved-but-fine combination.
"""

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import average_precision_score, precision_recall_curve

from .baselines import document_vector
from .catalog import Capsule, Outfit, capsule_outfits
from .errors import BudgetExceededError, ValidationError
from .objective import objective
from .optimize import GreedyConfig, exhaustive_optimal, iterative_greedy, naive_greedy
from .style.base import derive_seed

#: Example exclusive meta-label pairs; real runs may load their own table.
DEFAULT_EXCLUSIVE_PAIRS = {
    "season": [["winter", "summer"]],
    "occasion": [["work", "vacation"]],
    "function": [["date", "hike"]],
}


@dataclass(frozen=True)
class TaggedOutfit:
    """An outfit plus its meta-labels (season, occasion, ...)."""

    outfit: Outfit
    meta: tuple

    @property
    def meta_dict(self):
        return dict(self.meta)


def tag_outfit(outfit, meta):
    return TaggedOutfit(outfit=outfit, meta=tuple(sorted((str(k), str(v)) for k, v in meta.items())))


@dataclass(frozen=True)
class SwapRecord:
    """How one negative was built from its source positive."""

    source_index: int
    layer: int
    removed_id: str
    inserted_id: str
    dimension: str
    source_label: str
    donor_label: str


@dataclass
class LabeledOutfitSet:
    positives: list
    negatives: list
    provenance: list = field(default_factory=list)


def _exclusive_lookup(pairs):
    lookup = {}
    for dim, dim_pairs in pairs.items():
        table = {}
        for a, b in dim_pairs:
            table.setdefault(str(a), set()).add(str(b))
            table.setdefault(str(b), set()).add(str(a))
        lookup[str(dim)] = table
    return lookup


def _exclusive_dimension(source_meta, donor_meta, lookup):
    for dim, table in lookup.items():
        s, d = source_meta.get(dim), donor_meta.get(dim)
        if s is not None and d is not None and d in table.get(s, ()):
            return dim
    return None


def generate_negatives(positives, ratio, seed=0, exclusive_pairs=None):
    """Build ``ratio`` negatives per positive by exclusive-label piece swaps.

    Each negative replaces exactly one piece of its source positive with a
    same-layer piece from a positive carrying an exclusive meta-label, and
    never coincides with any positive.
    """
    if ratio < 0:
        raise ValidationError("ratio must be non-negative")
    lookup = _exclusive_lookup(exclusive_pairs or DEFAULT_EXCLUSIVE_PAIRS)
    positives = list(positives)
    for idx, tagged in enumerate(positives):
        if len(tagged.outfit.members) < 2:
            raise ValidationError(
                f"positive {idx} has fewer than 2 pieces; cannot swap safely"
            )

    # donor pool per layer: (piece, owner meta), deterministic order
    donors_by_layer = {}
    for tagged in positives:
        for piece in tagged.outfit.members:
            donors_by_layer.setdefault(piece.layer, []).append((piece, tagged.meta_dict))

    positive_keys = {t.outfit.key for t in positives}
    rng = np.random.default_rng(derive_seed(seed, "negatives"))
    negatives, provenance = [], []
    for idx, tagged in enumerate(positives):
        source_meta = tagged.meta_dict
        options = []
        for piece in tagged.outfit.members:
            for donor, donor_meta in donors_by_layer.get(piece.layer, ()):
                if donor.id == piece.id:
                    continue
                dim = _exclusive_dimension(source_meta, donor_meta, lookup)
                if dim is not None:
                    options.append((piece, donor, donor_meta, dim))
        if not options and ratio > 0:
            raise ValidationError(
                f"positive {idx}: no exclusive-label donor available for any layer"
            )
        made = 0
        attempts = 0
        while made < ratio:
            if attempts > 50 * ratio + 100:
                raise ValidationError(
                    f"positive {idx}: cannot build {ratio} distinct negatives"
                )
            attempts += 1
            piece, donor, donor_meta, dim = options[int(rng.integers(0, len(options)))]
            members = [m for m in tagged.outfit.members if m.layer != piece.layer]
            candidate = Outfit(members + [donor])
            if candidate.key in positive_keys:
                continue
            negatives.append(tag_outfit(candidate, donor_meta))
            provenance.append(
                SwapRecord(
                    source_index=idx,
                    layer=piece.layer,
                    removed_id=piece.id,
                    inserted_id=donor.id,
                    dimension=dim,
                    source_label=source_meta[dim],
                    donor_label=donor_meta[dim],
                )
            )
            made += 1
    return LabeledOutfitSet(positives=positives, negatives=negatives, provenance=provenance)


@dataclass
class PrCurve:
    points: list  # (precision, recall) pairs
    thresholds: list
    average_precision: float
    best_f1_threshold: float


def pr_curve(labeled, model, seed=0):
    """Precision/recall over the raw (un-thresholded) per-token likelihood.

    The ranking score is deliberately the raw value: the step score would
    collapse the curve to a single operating point.  Also reports the
    threshold maximising F1, usable to calibrate the step score.
    """
    if not labeled.positives or not labeled.negatives:
        raise ValidationError("need both positives and negatives")
    docs = [t.outfit.document for t in labeled.positives + labeled.negatives]
    y = np.array([1] * len(labeled.positives) + [0] * len(labeled.negatives))
    scores = np.array(
        [
            model.log_likelihood(doc, seed=derive_seed(seed, "pr", i))
            for i, doc in enumerate(docs)
        ]
    )
    precision, recall, thresholds = precision_recall_curve(y, scores)
    ap = float(average_precision_score(y, scores))
    f1 = 2 * precision[:-1] * recall[:-1] / np.maximum(precision[:-1] + recall[:-1], 1e-12)
    best = int(np.argmax(f1))
    return PrCurve(
        points=[(float(p), float(r)) for p, r in zip(precision, recall)],
        thresholds=[float(t) for t in thresholds],
        average_precision=ap,
        best_f1_threshold=float(thresholds[best]),
    )


@dataclass
class CapsuleScore:
    """Distances to a human gold standard: lower compatibility distance is
    better; higher versatility (piece spread) is better."""

    compatibility_distance: float
    versatility_distance: float
    nn_distances: list


def gold_score(capsule, gold_outfits, features, catalog):
    """Distance of a capsule to gold-standard outfits, sigma-normalised.

    Compatibility: sum over capsule outfits of the feature-space distance to
    the nearest gold outfit.  Versatility: sum over layers of pairwise
    distances among the selected pieces.  Each sum is normalised by the
    standard deviation of all distances entering it (computed over this
    call), which makes the scores invariant to uniform feature scaling.
    """
    if not gold_outfits:
        raise ValidationError("gold set is empty")
    outfits = capsule_outfits(capsule, catalog)
    if not outfits:
        raise ValidationError("capsule induces no outfits")
    dim = features.dim
    cap_vecs = np.vstack([document_vector(o.document, dim) for o in outfits])
    gold_vecs = np.vstack([document_vector(o.document, dim) for o in gold_outfits])
    nn = features.pairwise(cap_vecs, gold_vecs).min(axis=1)
    compat = float((nn / _spread(nn)).sum())

    pair_dists = []
    for ids in capsule.selections:
        if len(ids) < 2:
            continue
        vecs = features.vectors(ids)
        dist = features.pairwise(vecs)
        iu = np.triu_indices(len(ids), k=1)
        pair_dists.extend(dist[iu].tolist())
    if pair_dists:
        arr = np.array(pair_dists)
        versatility = float((arr / _spread(arr)).sum())
    else:
        versatility = 0.0
    return CapsuleScore(
        compatibility_distance=compat,
        versatility_distance=versatility,
        nn_distances=[float(d) for d in nn],
    )


def _spread(distances):
    """Normalisation divisor: the standard deviation of the distances, with
    scale-preserving fallbacks (mean, then 1) when they are degenerate."""
    sigma = float(distances.std())
    if sigma > 0:
        return sigma
    mean = float(distances.mean())
    return mean if mean > 0 else 1.0


def _fit_loglog_slope(xs, ys):
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def bench_solvers(
    t_values,
    seeds,
    n=6,
    m=4,
    k=4,
    epsilon=0.5,
    include_optimal=True,
    capsule_budget=2_000_000,
    outfit_budget=1_000_000,
    instance_kwargs=None,
):
    """Run the solvers across instance sizes and report quality, work, time.

    Evaluation counts are per-outfit score requests (the unit of real work,
    since topic-model inference dominates).  For the iterative solver the
    per-sweep count of a steady sweep is reported alongside the total; the
    log-log slope of count vs. T is fitted for both solvers.
    """
    t_values = [int(t) for t in t_values]
    seeds = [int(s) for s in seeds]
    instance_kwargs = dict(instance_kwargs or {})
    from .synth import make_instance

    rows = []
    for t in t_values:
        for seed in seeds:
            # fresh instance (and cold scorer cache) per solver, so wall
            # times do not depend on run order; per-outfit seeds keep the
            # scores identical across the copies
            catalog, cfg = make_instance(seed, n=n, m=m, k=k, **instance_kwargs)
            _, cfg_naive = make_instance(seed, n=n, m=m, k=k, **instance_kwargs)
            _, cfg_opt = make_instance(seed, n=n, m=m, k=k, **instance_kwargs)
            row = {"t": t, "seed": seed, "n": n, "m": m}
            started = time.perf_counter()
            cap_i, tr_i = iterative_greedy(catalog, cfg, GreedyConfig(t=t, epsilon=epsilon))
            row["iterative"] = {
                "objective": tr_i.final_objective,
                "eval_requests": tr_i.total_eval_requests,
                "sweep_requests": [s.eval_requests for s in tr_i.sweeps],
                "steady_sweep_requests": (
                    tr_i.sweeps[1].eval_requests
                    if len(tr_i.sweeps) > 1
                    else tr_i.sweeps[0].eval_requests
                ),
                "sweeps": len(tr_i.sweeps),
                "wall_time_s": time.perf_counter() - started,
            }
            started = time.perf_counter()
            cap_n, tr_n = naive_greedy(catalog, cfg_naive, GreedyConfig(t=t))
            row["naive"] = {
                "objective": tr_n.final_objective,
                "eval_requests": tr_n.total_eval_requests,
                "wall_time_s": time.perf_counter() - started,
            }
            if include_optimal:
                started = time.perf_counter()
                try:
                    cap_o, opt = exhaustive_optimal(
                        catalog,
                        cfg_opt,
                        t,
                        capsule_budget=capsule_budget,
                        outfit_budget=outfit_budget,
                    )
                    row["optimal"] = {
                        "objective": opt,
                        "wall_time_s": time.perf_counter() - started,
                    }
                    row["iterative"]["ratio"] = tr_i.final_objective / opt if opt else None
                    row["naive"]["ratio"] = tr_n.final_objective / opt if opt else None
                except BudgetExceededError as exc:
                    row["optimal"] = {
                        "skipped": True,
                        "required": exc.required,
                        "budget": exc.budget,
                    }
            rows.append(row)

    naive_counts = {
        t: float(np.mean([r["naive"]["eval_requests"] for r in rows if r["t"] == t]))
        for t in t_values
    }
    iter_counts = {
        t: float(
            np.mean([r["iterative"]["steady_sweep_requests"] for r in rows if r["t"] == t])
        )
        for t in t_values
    }
    report = {
        "config": {
            "t_values": t_values,
            "seeds": seeds,
            "n": n,
            "m": m,
            "k": k,
            "epsilon": epsilon,
        },
        "rows": rows,
        "mean_eval_requests": {
            "naive_total": naive_counts,
            "iterative_per_sweep": iter_counts,
        },
    }
    if len(t_values) >= 2:
        report["slopes"] = {
            "naive_total_vs_t": _fit_loglog_slope(
                t_values, [naive_counts[t] for t in t_values]
            ),
            "iterative_per_sweep_vs_t": _fit_loglog_slope(
                t_values, [iter_counts[t] for t in t_values]
            ),
        }
    timing = {}
    for solver in ("iterative", "naive", "optimal"):
        vals = [
            r[solver]["wall_time_s"]
            for r in rows
            if solver in r and "wall_time_s" in r[solver]
        ]
        if vals:
            timing[solver] = {"mean_s": float(np.mean(vals)), "runs": len(vals)}
    report["timing"] = timing
    return report
