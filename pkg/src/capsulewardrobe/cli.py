"""Command-line front end.

Subcommands: ``fit``, ``score``, ``capsule``, ``personalize``, ``eval``,
``bench``, ``synth``.  Every output is canonical JSON accompanied by a
``<out>.manifest.json`` sidecar recording the resolved configuration, input
digests and timings; rerunning a command with identical inputs reproduces
the primary outputs byte for byte.

Exit codes: 0 success, 2 usage, 3 validation failure, 4 enumeration budget
exceeded.  Failures also emit a machine-readable JSON error record on
stderr.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, synth
from .baselines import FeatureTable, cluster_centers, mmr_select
from .catalog import LAYER_NAMES, AttributeVocab, capsule_outfits, catalog_to_dict, load_catalog
from .errors import BudgetExceededError, CapsuleWardrobeError, ValidationError
from .evaluate import (
    DEFAULT_EXCLUSIVE_PAIRS,
    bench_solvers,
    generate_negatives,
    gold_score,
    pr_curve,
)
from .io import (
    RunManifest,
    capsule_payload,
    documents_with_vocab,
    load_capsule,
    load_corpus,
    load_labeled,
    load_weights,
    read_json,
    save_corpus,
    save_labeled,
    write_json,
    sha256_file,
)
from .objective import ObjectiveConfig, objective
from .optimize import (
    DEFAULT_EPSILON,
    GreedyConfig,
    exhaustive_optimal,
    iterative_greedy,
    naive_greedy,
)
from .scoring import StyleScorer
from .style import DEFAULT_STEP_THRESHOLD, FitConfig, fit_style_model, load_model, user_preference
from .style.base import derive_seed


def _parse_seeds(text):
    """'0..99' or '3,7,11' or '5' -> list of ints."""
    text = str(text)
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x != ""]


def _parse_int_list(text):
    return [int(x) for x in str(text).split(",") if x != ""]


def _parse_layers(text, n_layers):
    layers = []
    for token in str(text).split(","):
        token = token.strip()
        if token in LAYER_NAMES:
            layers.append(LAYER_NAMES.index(token))
        else:
            try:
                layers.append(int(token))
            except ValueError:
                raise ValidationError(
                    f"unknown layer {token!r}; use an index or one of {LAYER_NAMES}"
                ) from None
    for layer in layers:
        if layer < 0 or layer >= n_layers:
            raise ValidationError(f"layer {layer} outside catalog layers 0..{n_layers - 1}")
    return layers


def _t_vector(args_t, layers, catalog):
    values = _parse_int_list(args_t)
    if layers is None:
        chosen = [i for i in range(catalog.n_layers) if catalog.counts[i] > 0]
    else:
        chosen = layers
    t_vec = [0] * catalog.n_layers
    if len(values) == 1:
        for i in chosen:
            t_vec[i] = values[0]
    elif len(values) == len(chosen):
        for i, v in zip(chosen, values):
            t_vec[i] = v
    else:
        raise ValidationError(
            f"--t needs 1 value or {len(chosen)} comma-separated values, got {len(values)}"
        )
    return t_vec


def _config_record(args):
    skip = {"func"}
    out = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        out[key] = value if not isinstance(value, (list, tuple)) else list(value)
    return out


def _strip_volatile(obj):
    """Copy a report without wall-clock fields (kept in the sidecar)."""
    if isinstance(obj, dict):
        return {
            k: _strip_volatile(v)
            for k, v in obj.items()
            if k not in ("wall_time_s", "timing", "timings", "mean_s")
        }
    if isinstance(obj, list):
        return [_strip_volatile(v) for v in obj]
    return obj


# -- subcommand handlers --------------------------------------------------


def cmd_fit(args):
    docs, vocab = load_corpus(args.corpus)
    config = FitConfig(
        k=args.k,
        iterations=args.iterations,
        burn_in=args.burn_in,
        sample_count=args.sample_count,
        seed=args.seed,
        variant=args.variant,
        alpha=args.alpha,
        beta=args.beta,
    )
    manifest = RunManifest("fit", _config_record(args), args.seed, {"corpus": args.corpus})
    started = time.perf_counter()
    model = fit_style_model(docs, config, n_attributes=len(vocab))
    manifest.timings["fit_s"] = time.perf_counter() - started
    model.vocab_ = vocab.entries
    model.save(args.out)
    manifest.write_sidecar(args.out)
    return 0


def cmd_score(args):
    model = load_model(args.model)
    vocab = AttributeVocab(model.vocab_)
    raw = read_json(args.docs)
    if "documents" not in raw:
        raise ValidationError("docs file missing field 'documents'")
    docs = documents_with_vocab(raw["documents"], vocab)
    manifest = RunManifest(
        "score", _config_record(args), args.seed, {"model": args.model, "docs": args.docs}
    )
    started = time.perf_counter()
    rows = []
    for i, doc in enumerate(docs):
        ll = model.log_likelihood(doc, seed=derive_seed(args.seed, "score", i))
        rows.append(
            {"index": i, "loglik": ll, "step": 1 if ll >= args.threshold else 0}
        )
    manifest.timings["score_s"] = time.perf_counter() - started
    write_json(
        args.out,
        {"manifest": manifest.core(), "scores": rows, "threshold": args.threshold},
    )
    manifest.write_sidecar(args.out)
    return 0


def _objective_breakdown(capsule, catalog, config):
    from .objective import compatibility, coverage, personalized_coverage

    outfits = capsule_outfits(capsule, catalog)
    breakdown = {
        "compatibility": compatibility(outfits, config),
        "coverage": coverage(outfits, config),
        "coverage_weight": config.coverage_weight,
        "n_outfits": len(outfits),
        "total": objective(outfits, config),
    }
    if config.weights is not None:
        breakdown["personalized_coverage"] = personalized_coverage(outfits, config)
    return breakdown


def cmd_capsule(args):
    catalog = load_catalog(args.catalog)
    inputs = {"catalog": args.catalog}
    model = None
    if args.model:
        model = load_model(args.model)
        inputs["model"] = args.model
    weights = None
    if args.weights:
        weights = load_weights(args.weights)
        inputs["weights"] = args.weights
    layers = _parse_layers(args.layers, catalog.n_layers) if args.layers else None
    t_vec = _t_vector(args.t, layers, catalog)
    pinned = tuple(x for x in (args.seed_outfit or "").split(",") if x)
    manifest = RunManifest("capsule", _config_record(args), args.seed, inputs)

    if model is None:
        raise ValidationError("--model is required (all selectors score with it)")
    scorer = StyleScorer(
        model,
        threshold=args.threshold,
        seed=derive_seed(args.seed, "capsule-scorer"),
        threads=args.threads,
    )
    config = ObjectiveConfig(scorer=scorer, weights=weights, coverage_weight=args.coverage_weight)

    trace_payload = None
    started = time.perf_counter()
    if args.algo == "iterative":
        greedy = GreedyConfig(
            t=t_vec, epsilon=args.epsilon, max_sweeps=args.max_sweeps, pinned=pinned
        )
        capsule, trace = iterative_greedy(catalog, config, greedy)
        trace_payload = trace.to_dict(include_timing=False)
        manifest.timings["solver_s"] = trace.wall_time
    elif args.algo == "naive":
        greedy = GreedyConfig(t=t_vec, pinned=pinned)
        capsule, trace = naive_greedy(catalog, config, greedy)
        trace_payload = trace.to_dict(include_timing=False)
        manifest.timings["solver_s"] = trace.wall_time
    elif args.algo == "optimal":
        if pinned:
            raise ValidationError("seed outfits are not supported with --algo optimal")
        capsule, _ = exhaustive_optimal(
            catalog,
            config,
            t_vec,
            capsule_budget=args.capsule_budget,
            outfit_budget=args.outfit_budget,
        )
        manifest.timings["solver_s"] = time.perf_counter() - started
    elif args.algo == "mmr":
        features = FeatureTable.from_catalog(catalog)
        # deliberately independent of any seed outfit (documented behaviour)
        capsule = mmr_select(catalog, features, model, args.mmr_lambda, t_vec)
        manifest.timings["solver_s"] = time.perf_counter() - started
    elif args.algo == "kmedoids":
        features = FeatureTable.from_catalog(catalog)
        capsule = cluster_centers(
            catalog, features, t_vec, seed=derive_seed(args.seed, "kmedoids")
        )
        manifest.timings["solver_s"] = time.perf_counter() - started
    else:
        raise ValidationError(f"unknown algorithm {args.algo!r}")

    payload = capsule_payload(
        capsule,
        {
            "algo": args.algo,
            "t": t_vec,
            "objective": _objective_breakdown(capsule, catalog, config),
            "manifest": manifest.core(),
        },
    )
    write_json(args.out, payload)
    manifest.write_sidecar(args.out)
    if args.trace and trace_payload is not None:
        write_json(args.trace, {"manifest": manifest.core(), "trace": trace_payload})
    return 0


def cmd_personalize(args):
    model = load_model(args.model)
    vocab = AttributeVocab(model.vocab_)
    raw = read_json(args.user_outfits)
    if "documents" not in raw:
        raise ValidationError("user outfits file missing field 'documents'")
    docs = documents_with_vocab(raw["documents"], vocab)
    inputs = {"model": args.model, "user_outfits": args.user_outfits}
    manifest = RunManifest("personalize", _config_record(args), args.seed, inputs)
    started = time.perf_counter()
    weights = user_preference(model, docs)
    manifest.timings["aggregate_s"] = time.perf_counter() - started
    write_json(
        args.out,
        {
            "manifest": manifest.core(),
            "weights": [float(w) for w in weights],
            "n_outfits": len(docs),
        },
    )
    manifest.write_sidecar(args.out)

    if args.catalog:
        catalog = load_catalog(args.catalog)
        scorer = StyleScorer(
            model,
            threshold=args.threshold,
            seed=derive_seed(args.seed, "capsule-scorer"),
            threads=args.threads,
        )
        config = ObjectiveConfig(
            scorer=scorer, weights=weights, coverage_weight=args.coverage_weight
        )
        t_vec = _t_vector(args.t, None, catalog)
        started = time.perf_counter()
        capsule, trace = iterative_greedy(
            catalog, config, GreedyConfig(t=t_vec, epsilon=args.epsilon)
        )
        manifest.timings["solver_s"] = time.perf_counter() - started
        out = args.capsule_out or (str(args.out) + ".capsule.json")
        write_json(
            out,
            capsule_payload(
                capsule,
                {
                    "algo": "iterative",
                    "t": t_vec,
                    "objective": _objective_breakdown(capsule, catalog, config),
                    "manifest": manifest.core(),
                },
            ),
        )
        manifest.write_sidecar(out)
    return 0


def cmd_eval(args):
    if args.target == "compat":
        return _eval_compat(args)
    if args.target == "capsule":
        return _eval_capsule(args)
    raise ValidationError(f"unknown eval target {args.target!r}")


def _eval_compat(args):
    if not args.model or not args.labeled:
        raise ValidationError("eval compat needs --model and --labeled")
    model = load_model(args.model)
    vocab = AttributeVocab(model.vocab_)
    labeled, _ = load_labeled(args.labeled, vocab)
    inputs = {"model": args.model, "labeled": args.labeled}
    pairs = DEFAULT_EXCLUSIVE_PAIRS
    if args.exclusive_pairs:
        pairs = read_json(args.exclusive_pairs)
        inputs["exclusive_pairs"] = args.exclusive_pairs
    manifest = RunManifest("eval-compat", _config_record(args), args.seed, inputs)
    started = time.perf_counter()
    if not labeled.negatives:
        labeled = generate_negatives(
            labeled.positives, args.ratio, seed=args.seed, exclusive_pairs=pairs
        )
    curve = pr_curve(labeled, model, seed=args.seed)
    manifest.timings["eval_s"] = time.perf_counter() - started
    report = {
        "manifest": manifest.core(),
        "counts": {
            "positives": len(labeled.positives),
            "negatives": len(labeled.negatives),
        },
        "average_precision": curve.average_precision,
        "best_f1_threshold": curve.best_f1_threshold,
        "pr_points": curve.points,
    }
    write_json(args.out, report)
    manifest.write_sidecar(args.out)
    if args.pr_csv:
        lines = ["precision,recall"] + [f"{p!r},{r!r}" for p, r in curve.points]
        with open(args.pr_csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _eval_capsule(args):
    if not (args.capsule and args.gold and args.catalog):
        raise ValidationError("eval capsule needs --capsule, --gold and --catalog")
    catalog = load_catalog(args.catalog)
    capsule = load_capsule(args.capsule)
    gold_set, _ = load_labeled(args.gold, catalog.vocab)
    features = FeatureTable.from_catalog(catalog)
    inputs = {"capsule": args.capsule, "gold": args.gold, "catalog": args.catalog}
    manifest = RunManifest("eval-capsule", _config_record(args), args.seed, inputs)
    started = time.perf_counter()
    score = gold_score(capsule, [t.outfit for t in gold_set.positives], features, catalog)
    manifest.timings["eval_s"] = time.perf_counter() - started
    report = {
        "manifest": manifest.core(),
        "compatibility_distance": score.compatibility_distance,
        "versatility_distance": score.versatility_distance,
        "nn_distances": score.nn_distances,
        "sigma_scope": "all distances computed in this call",
    }
    write_json(args.out, report)
    manifest.write_sidecar(args.out)
    return 0


def cmd_bench(args):
    sizes = _parse_int_list(args.sizes)
    t_values = _parse_int_list(args.t)
    seeds = _parse_seeds(args.seeds)
    manifest = RunManifest("bench", _config_record(args), 0, {})
    started = time.perf_counter()
    full = {}
    for n in sizes:
        full[str(n)] = bench_solvers(
            t_values,
            seeds,
            n=n,
            m=args.m,
            k=args.k,
            epsilon=args.epsilon,
            include_optimal=not args.no_optimal,
            capsule_budget=args.capsule_budget,
            outfit_budget=args.outfit_budget,
            instance_kwargs={"threshold_quantile": 0.7, "bag_range": (3, 6)},
        )
    manifest.timings["bench_s"] = time.perf_counter() - started
    report = {"manifest": manifest.core(), "sizes": _strip_volatile(full)}
    write_json(args.out, report)
    manifest.write_sidecar(args.out)
    # wall-clock data is real output here (runtime comparisons) but varies
    # run to run, so it lives in its own sidecar
    write_json(str(args.out) + ".timings.json", {"sizes": full})
    return 0


def cmd_synth(args):
    os.makedirs(args.out_dir, exist_ok=True)
    model = synth.planted_ctm(
        args.k, args.v, seed=args.seed, rho=args.rho, scale=args.scale, cross=args.cross
    )
    vocab_names = [f"a{i:03d}" for i in range(args.v)]
    manifest = RunManifest("synth", _config_record(args), args.seed, {})
    started = time.perf_counter()

    catalog = synth.synth_catalog(
        model,
        layers=args.layers,
        per_layer=args.per_layer,
        seed=derive_seed(args.seed, "synth-catalog"),
        vocab_names=vocab_names,
    )
    catalog_path = os.path.join(args.out_dir, "catalog.json")
    write_json(catalog_path, catalog_to_dict(catalog))

    corpus = synth.sample_corpus(
        model, args.docs, seed=derive_seed(args.seed, "synth-corpus"), length_range=(10, 20)
    )
    corpus_path = os.path.join(args.out_dir, "corpus.json")
    save_corpus(corpus_path, corpus, vocab_names)

    positives = synth.synth_positive_outfits(
        model, args.outfits, layers=args.layers, seed=derive_seed(args.seed, "synth-labeled")
    )
    for entry in positives:
        for piece in entry["pieces"]:
            piece["attributes"] = [vocab_names[i] for i in piece["attributes"]]
    labeled_path = os.path.join(args.out_dir, "labeled.json")
    save_labeled(labeled_path, positives, vocab_names)

    manifest.timings["synth_s"] = time.perf_counter() - started
    manifest.write_sidecar(os.path.join(args.out_dir, "synth"))
    return 0


# -- parser wiring ---------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="capsulewardrobe",
        description="Assemble mix-and-match capsules from layered item catalogs.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a style topic model on an attribute-bag corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--variant", choices=("ctm", "lda"), default="ctm")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--sample-count", type=int, default=8)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score documents with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_STEP_THRESHOLD)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("capsule", help="build a capsule from a catalog")
    p.add_argument("--catalog", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--t", default="4")
    p.add_argument("--layers", default=None, help="e.g. outer,upper,lower or 0,1,2")
    p.add_argument(
        "--algo",
        choices=("iterative", "naive", "optimal", "mmr", "kmedoids"),
        default="iterative",
    )
    p.add_argument("--seed-outfit", default=None, help="comma-separated garment ids to pin")
    p.add_argument("--weights", default=None)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--max-sweeps", type=int, default=20)
    p.add_argument("--threshold", type=float, default=DEFAULT_STEP_THRESHOLD)
    p.add_argument("--coverage-weight", type=float, default=1.0)
    p.add_argument("--mmr-lambda", dest="mmr_lambda", type=float, default=0.5)
    p.add_argument("--capsule-budget", type=int, default=2_000_000)
    p.add_argument("--outfit-budget", type=int, default=1_000_000)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_capsule)

    p = sub.add_parser("personalize", help="aggregate user outfits into style weights")
    p.add_argument("--model", required=True)
    p.add_argument("--user-outfits", required=True)
    p.add_argument("--catalog", default=None, help="also build a personalized capsule")
    p.add_argument("--t", default="4")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--threshold", type=float, default=DEFAULT_STEP_THRESHOLD)
    p.add_argument("--coverage-weight", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--capsule-out", default=None)
    p.set_defaults(func=cmd_personalize)

    p = sub.add_parser("eval", help="evaluation: compatibility PR or capsule gold score")
    p.add_argument("target", choices=("compat", "capsule"))
    p.add_argument("--model", default=None)
    p.add_argument("--labeled", default=None)
    p.add_argument("--ratio", type=int, default=5)
    p.add_argument("--exclusive-pairs", default=None)
    p.add_argument("--capsule", default=None)
    p.add_argument("--gold", default=None)
    p.add_argument("--catalog", default=None)
    p.add_argument("--pr-csv", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="benchmark the solvers on synthetic instances")
    p.add_argument("--sizes", default="6")
    p.add_argument("--t", default="2,3,4,5")
    p.add_argument("--seeds", default="0..2")
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--no-optimal", action="store_true")
    p.add_argument("--capsule-budget", type=int, default=2_000_000)
    p.add_argument("--outfit-budget", type=int, default=1_000_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic catalog, corpus and labeled outfits")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--v", type=int, default=40)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--per-layer", type=int, default=10)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--outfits", type=int, default=60)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--scale", type=float, default=2.0)
    p.add_argument("--cross", type=float, default=-0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        _emit_error(exc)
        return 4
    except (ValidationError, CapsuleWardrobeError, OSError) as exc:
        _emit_error(exc)
        return 3


def _emit_error(exc):
    record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    extra = {k: getattr(exc, k) for k in ("required", "budget") if getattr(exc, k, None) is not None}
    if extra:
        record["error"].update(extra)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
