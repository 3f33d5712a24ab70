"""Capsule construction: iterative per-layer greedy, a naive greedy baseline,
and an exhaustive oracle.

The iterative solver sweeps the layers, resets the layer under selection, and
greedily re-picks it while the other layers stay fixed; with other layers
fixed the objective is submodular in that layer's garments, so each layer
pass inherits the greedy near-optimality guarantee.  Sweeps repeat until the
last layer's accumulated gain stops improving by at least ``epsilon``.

The naive baseline grows every layer one garment per time step with no
resets.  Its candidate evaluations cannot be reused between steps (the other
layers grow under it), which is where its extra factor of T in evaluation
count comes from.

Candidate evaluations are aggregated once per (layer, sweep) block: a
candidate's introduced outfit set never changes while the other layers are
fixed, so later steps re-rank candidates with O(K) arithmetic instead of
re-scoring outfits.
"""

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .catalog import Capsule, Outfit, capsule_outfits
from .errors import BudgetExceededError, ValidationError
from .objective import ObjectiveState, objective

#: Convergence tolerance on the end-of-sweep objective gain.
DEFAULT_EPSILON = 0.5


@dataclass
class GreedyConfig:
    """Solver knobs: selections per layer, sweep convergence, seed garments."""

    t: object
    epsilon: float = DEFAULT_EPSILON
    max_sweeps: int = 20
    pinned: tuple = ()
    tie_break: str = "min_id"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")
        if self.tie_break != "min_id":
            raise ValidationError(f"unknown tie_break rule: {self.tie_break!r}")
        self.pinned = tuple(self.pinned)


@dataclass
class StepRecord:
    sweep: int
    layer: int
    garment_id: str
    gain: float


@dataclass
class SweepRecord:
    index: int
    objective: float
    accumulated_gain: float
    eval_requests: int
    reverted: bool = False


@dataclass
class RunTrace:
    """What a solver did: per-step picks, per-sweep objectives, eval counts."""

    steps: list = field(default_factory=list)
    sweeps: list = field(default_factory=list)
    total_eval_requests: int = 0
    total_eval_misses: int = 0
    final_objective: float = 0.0
    converged: bool = False
    wall_time: float = 0.0

    def to_dict(self, include_timing=True):
        out = {
            "steps": [
                {"sweep": s.sweep, "layer": s.layer, "garment": s.garment_id, "gain": s.gain}
                for s in self.steps
            ],
            "sweeps": [
                {
                    "index": s.index,
                    "objective": s.objective,
                    "accumulated_gain": s.accumulated_gain,
                    "eval_requests": s.eval_requests,
                    "reverted": s.reverted,
                }
                for s in self.sweeps
            ],
            "total_eval_requests": self.total_eval_requests,
            "total_eval_misses": self.total_eval_misses,
            "final_objective": self.final_objective,
            "converged": self.converged,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time
        return out


def _normalize_t(t, catalog):
    counts = catalog.counts
    if np.isscalar(t):
        t_vec = [0 if n == 0 else int(t) for n in counts]
    else:
        t_vec = [int(x) for x in t]
        if len(t_vec) != catalog.n_layers:
            raise ValidationError(
                f"t has {len(t_vec)} entries for {catalog.n_layers} layers"
            )
    for i, (ti, ni) in enumerate(zip(t_vec, counts)):
        if ti < 0:
            raise ValidationError("selection counts must be non-negative")
        if ti > ni:
            raise ValidationError(
                f"layer {i}: requested {ti} selections from {ni} candidates"
            )
    return tuple(t_vec)


def _resolve_pins(pinned, catalog, t_vec):
    per_layer = [[] for _ in range(catalog.n_layers)]
    for gid in pinned:
        g = catalog.garment(gid)
        if gid in per_layer[g.layer]:
            raise ValidationError(f"garment {gid!r} pinned twice")
        per_layer[g.layer].append(gid)
    for i, pins in enumerate(per_layer):
        if len(pins) > t_vec[i]:
            raise ValidationError(
                f"layer {i}: {len(pins)} pinned garments exceed t={t_vec[i]}"
            )
    return [tuple(p) for p in per_layer]


def _other_layer_pools(selections, skip, catalog):
    return [
        [catalog.garment(gid) for gid in ids]
        for j, ids in enumerate(selections)
        if j != skip and ids
    ]


def _introduced(garment, other_pools):
    """Outfits a garment introduces given the other layers' selections."""
    if not other_pools:
        return (Outfit([garment]),)
    return tuple(
        Outfit((garment,) + combo) for combo in itertools.product(*other_pools)
    )


def _argmax_gain(state, candidates, aggs, chosen):
    """Highest-gain unchosen candidate; ties go to the smallest id (the
    candidate list is id-sorted and replacement is strict)."""
    best_id, best_gain = None, None
    for g in candidates:
        if g.id in chosen:
            continue
        gain = state.gain(aggs[g.id])
        if best_gain is None or gain > best_gain:
            best_id, best_gain = g.id, gain
    return best_id, best_gain


def iterative_greedy(catalog, obj_config, greedy_config):
    """Sweep the layers, rebuilding each one greedily with the rest fixed,
    until the end-of-sweep objective gain drops below epsilon."""
    t_vec = _normalize_t(greedy_config.t, catalog)
    pins = _resolve_pins(greedy_config.pinned, catalog, t_vec)
    active = [i for i in range(catalog.n_layers) if t_vec[i] > 0]
    if not active:
        raise ValidationError("no layer has a positive selection count")
    scorer = obj_config.scorer
    trace = RunTrace()
    started = time.perf_counter()
    req0, miss0 = scorer.snapshot()

    selections = [list(p) for p in pins]
    prev_gain = 0.0
    last_state = None
    for sweep in range(1, greedy_config.max_sweeps + 1):
        sweep_req0, _ = scorer.snapshot()
        previous = [list(s) for s in selections]
        layer_gain = 0.0
        for i in active:
            selections[i] = list(pins[i])
            state = ObjectiveState(obj_config)
            others = _other_layer_pools(selections, i, catalog)
            if pins[i]:
                base = [
                    o
                    for gid in pins[i]
                    for o in _introduced(catalog.garment(gid), others)
                ]
                state.fold(state.aggregate(base))
            candidates = sorted(
                (g for g in catalog.layers[i] if g.id not in pins[i]),
                key=lambda g: g.id,
            )
            aggs = {g.id: state.aggregate(_introduced(g, others)) for g in candidates}
            chosen = set()
            layer_gain = 0.0
            for _ in range(t_vec[i] - len(pins[i])):
                best_id, best_gain = _argmax_gain(state, candidates, aggs, chosen)
                chosen.add(best_id)
                selections[i].append(best_id)
                state.fold(aggs[best_id])
                layer_gain += best_gain
                trace.steps.append(StepRecord(sweep, i, best_id, best_gain))
            last_state = state
        sweep_req1, _ = scorer.snapshot()
        full_objective = last_state.value()
        record = SweepRecord(sweep, full_objective, layer_gain, sweep_req1 - sweep_req0)
        # a terminal re-sweep can land strictly below the previous sweep;
        # keep the better selections instead of the literal last state
        kept = [s for s in trace.sweeps if not s.reverted]
        if kept and full_objective < kept[-1].objective - 1e-12:
            record.reverted = True
            trace.sweeps.append(record)
            selections = previous
            trace.converged = True
            break
        trace.sweeps.append(record)
        delta = layer_gain - prev_gain
        prev_gain = layer_gain
        if delta < greedy_config.epsilon:
            trace.converged = True
            break

    capsule = Capsule(tuple(tuple(s) for s in selections))
    req1, miss1 = scorer.snapshot()
    trace.total_eval_requests = req1 - req0
    trace.total_eval_misses = miss1 - miss0
    trace.final_objective = objective(capsule_outfits(capsule, catalog), obj_config)
    trace.wall_time = time.perf_counter() - started
    return capsule, trace


def naive_greedy(catalog, obj_config, greedy_config):
    """Grow all layers one garment per time step, never resetting.

    Every layer's step-t pick is evaluated against the step t-1 selections,
    and a pick's introduced outfits pair it with the *previous* round only,
    so combinations among same-round picks never enter the bookkeeping.
    That is the point of this baseline: it ignores the combinatorial growth
    a new garment causes, which is what the iterative solver fixes.
    """
    t_vec = _normalize_t(greedy_config.t, catalog)
    pins = _resolve_pins(greedy_config.pinned, catalog, t_vec)
    active = [i for i in range(catalog.n_layers) if t_vec[i] > 0]
    if not active:
        raise ValidationError("no layer has a positive selection count")
    scorer = obj_config.scorer
    trace = RunTrace()
    started = time.perf_counter()
    req0, miss0 = scorer.snapshot()

    selections = [list(p) for p in pins]
    state = ObjectiveState(obj_config)
    seed_capsule = Capsule(tuple(tuple(p) for p in pins))
    seed_outfits = capsule_outfits(seed_capsule, catalog)
    if seed_outfits:
        state.fold(state.aggregate(seed_outfits))

    for step in range(1, max(t_vec) + 1):
        step_req0, _ = scorer.snapshot()
        step_gain = 0.0
        picks = []
        for i in active:
            if len(selections[i]) >= t_vec[i]:
                continue
            others = _other_layer_pools(selections, i, catalog)
            candidates = sorted(
                (g for g in catalog.layers[i] if g.id not in selections[i]),
                key=lambda g: g.id,
            )
            aggs = {g.id: state.aggregate(_introduced(g, others)) for g in candidates}
            best_id, best_gain = _argmax_gain(state, candidates, aggs, set())
            picks.append((i, best_id, aggs[best_id], best_gain))
        for i, best_id, agg, best_gain in picks:
            selections[i].append(best_id)
            state.fold(agg)
            step_gain += best_gain
            trace.steps.append(StepRecord(step, i, best_id, best_gain))
        step_req1, _ = scorer.snapshot()
        trace.sweeps.append(
            SweepRecord(step, state.value(), step_gain, step_req1 - step_req0)
        )

    capsule = Capsule(tuple(tuple(s) for s in selections))
    req1, miss1 = scorer.snapshot()
    trace.total_eval_requests = req1 - req0
    trace.total_eval_misses = miss1 - miss0
    trace.final_objective = objective(capsule_outfits(capsule, catalog), obj_config)
    trace.converged = True
    trace.wall_time = time.perf_counter() - started
    return capsule, trace


def exhaustive_optimal(
    catalog,
    obj_config,
    t,
    capsule_budget=2_000_000,
    outfit_budget=1_000_000,
):
    """Enumerate every per-layer T-subset combination and return the best.

    Raises BudgetExceededError (with the required enumeration size) rather
    than attempting an intractable run.  Ties go to the lexicographically
    smallest garment-id tuple.
    """
    t_vec = _normalize_t(t, catalog)
    active = [i for i in range(catalog.n_layers) if t_vec[i] > 0]
    if not active:
        raise ValidationError("no layer has a positive selection count")
    counts = catalog.counts
    n_capsules = math.prod(math.comb(counts[i], t_vec[i]) for i in active)
    n_outfits = math.prod(counts[i] for i in active)
    if n_capsules > capsule_budget:
        raise BudgetExceededError(
            f"{n_capsules} capsules to enumerate exceeds budget {capsule_budget}",
            required=n_capsules,
            budget=capsule_budget,
        )
    if n_outfits > outfit_budget:
        raise BudgetExceededError(
            f"{n_outfits} outfits to score exceeds budget {outfit_budget}",
            required=n_outfits,
            budget=outfit_budget,
        )

    pools = [sorted(catalog.layers[i], key=lambda g: g.id) for i in active]
    shape = tuple(len(p) for p in pools)
    all_outfits = [Outfit(combo) for combo in itertools.product(*pools)]
    stats = obj_config.scorer.stats_many(all_outfits)
    k = obj_config.n_styles
    compat = np.array([s.compat for s in stats]).reshape(shape)
    thetas = np.array([s.theta for s in stats]).reshape(shape + (k,))
    log_rem = np.log(np.maximum(1.0 - thetas, 1e-300))

    combos = [list(itertools.combinations(range(n), t_vec[i])) for i, n in zip(active, shape)]
    indicators = []
    for n, layer_combos in zip(shape, combos):
        u = np.zeros((len(layer_combos), n))
        for row, combo in enumerate(layer_combos):
            u[row, list(combo)] = 1.0
        indicators.append(u)

    letters = "abcd"[: len(active)]
    outs = "ijkl"[: len(active)]
    expr = (
        letters
        + ","
        + ",".join(f"{o}{l}" for o, l in zip(outs, letters))
        + "->"
        + outs
    )
    total = np.einsum(expr, compat, *indicators, optimize=True)
    w = obj_config.style_weights()
    lam = obj_config.coverage_weight
    for z in range(k):
        log_prod = np.einsum(expr, log_rem[..., z], *indicators, optimize=True)
        total += lam * w[z] * (1.0 - np.exp(log_prod))

    flat_best = int(np.argmax(total))
    combo_idx = np.unravel_index(flat_best, total.shape)
    selections = [()] * catalog.n_layers
    for pos, i in enumerate(active):
        chosen = combos[pos][combo_idx[pos]]
        selections[i] = tuple(pools[pos][c].id for c in chosen)
    capsule = Capsule(tuple(selections))
    return capsule, float(total[combo_idx])


class _SelectorBase(BaseEstimator):
    def _check_fitted(self):
        if getattr(self, "capsule_", None) is None:
            raise ValidationError("selector has not been fitted; call fit(catalog)")


class IterativeGreedySelector(_SelectorBase):
    """Estimator wrapper around :func:`iterative_greedy`."""

    def __init__(self, objective_config=None, t=4, epsilon=DEFAULT_EPSILON, max_sweeps=20, pinned=()):
        self.objective_config = objective_config
        self.t = t
        self.epsilon = epsilon
        self.max_sweeps = max_sweeps
        self.pinned = pinned

    def fit(self, X, y=None):
        cfg = GreedyConfig(
            t=self.t, epsilon=self.epsilon, max_sweeps=self.max_sweeps, pinned=self.pinned
        )
        self.capsule_, self.trace_ = iterative_greedy(X, self.objective_config, cfg)
        return self


class NaiveGreedySelector(_SelectorBase):
    """Estimator wrapper around :func:`naive_greedy`."""

    def __init__(self, objective_config=None, t=4, pinned=()):
        self.objective_config = objective_config
        self.t = t
        self.pinned = pinned

    def fit(self, X, y=None):
        cfg = GreedyConfig(t=self.t, pinned=self.pinned)
        self.capsule_, self.trace_ = naive_greedy(X, self.objective_config, cfg)
        return self


class ExhaustiveSelector(_SelectorBase):
    """Estimator wrapper around :func:`exhaustive_optimal`."""

    def __init__(self, objective_config=None, t=4, capsule_budget=2_000_000, outfit_budget=1_000_000):
        self.objective_config = objective_config
        self.t = t
        self.capsule_budget = capsule_budget
        self.outfit_budget = outfit_budget

    def fit(self, X, y=None):
        self.capsule_, self.objective_value_ = exhaustive_optimal(
            X,
            self.objective_config,
            self.t,
            capsule_budget=self.capsule_budget,
            outfit_budget=self.outfit_budget,
        )
        return self
