"""ifct command line: parse, plan, run, generate and evaluate."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .basefn import HashEmbeddingProvider, PhantomEmbeddingProvider, RemoteEmbeddingProvider
from .basefn.geometry import DiameterMethod
from .bench import (
    CSV_HEADER, MODES, EmbeddingLabeler, Manifest, NoisyLabeler, OracleLabeler, gen_suite,
    phantom_bands, predict_cases, read_case, read_manifest, score, write_case, write_manifest,
)
from .bench.baselines import baseline_path_similarity
from .bench.runner import resolve
from .data import EXAMPLE_ORGANS, example_path
from .errors import IFCTError
from .executor import PatientRecord, execute_plan, serialize_case_result
from .guideline import (
    HTTPGuidelineParser, GuidelineTree, dump_json, enumerate_paths, load_document, parse_guideline, path_text,
    serialize_guideline, tree_from_document, validate_tree,
)
from .planner import (
    FunctionRegistry, HTTPPlannerClient, default_registry, external_plan, plan_loop, read_plan,
    serialize_plan, validate_plan,
)
from .volume import read_volume

log = logging.getLogger("ifct")

PROVIDER_ENV = "IFCT_PROVIDER_URL"


class UsageError(Exception):
    pass


# --- shared option handling -----------------------------------------------------

def _tree_path(value: str) -> Path:
    p = Path(value)
    if not p.exists() and value in EXAMPLE_ORGANS:
        return example_path(value)
    return p


def load_tree(value: str) -> GuidelineTree:
    """A guideline file path, or the name of a shipped example (liver, renal, pancreas)."""
    return parse_guideline(_tree_path(value).read_bytes())


def load_registry(value: str | None) -> FunctionRegistry:
    if value is None:
        return default_registry()
    return FunctionRegistry.from_manifest(Path(value).read_bytes())


def make_provider(value: str | None):
    value = value or "phantom"
    if value == "phantom":
        return PhantomEmbeddingProvider(phantom_bands())
    if value.startswith("local"):
        _, _, seed = value.partition(":")
        try:
            return HashEmbeddingProvider(int(seed or 0))
        except ValueError:
            raise UsageError(f"bad local provider seed in {value!r}") from None
    if value.startswith("remote"):
        _, _, url = value.partition(":")
        url = url or os.environ.get(PROVIDER_ENV)
        if not url:
            raise UsageError(f"remote provider needs a URL or {PROVIDER_ENV}")
        return RemoteEmbeddingProvider(url)
    raise UsageError(f"unknown provider {value!r}; use phantom, local:<seed> or remote:<url>")


def make_labeler(value: str, tree: GuidelineTree, provider, seed: int):
    if value == "oracle":
        return OracleLabeler(tree)
    if value.startswith("noisy"):
        _, _, rate = value.partition(":")
        try:
            return NoisyLabeler(OracleLabeler(tree), float(rate or 0.3), seed)
        except ValueError as exc:
            raise UsageError(f"bad noisy labeler {value!r}: {exc}") from None
    if value == "provider":
        return EmbeddingLabeler(provider)
    raise UsageError(f"unknown labeler {value!r}; use oracle, noisy:<rate> or provider")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _plan_for(args, tree: GuidelineTree, registry: FunctionRegistry):
    if getattr(args, "plan", None):
        plan = read_plan(args.plan)
        report = validate_plan(plan, tree, registry)
        if not report.ok:
            raise IFCTError(f"plan {args.plan} is invalid: {report.summary()}")
        return plan
    return plan_loop(tree, registry, args.max_iter, method_override=args.method)


# --- commands ---------------------------------------------------------------

def cmd_parse_guideline(args) -> int:
    if args.parser_url:
        tree = HTTPGuidelineParser(args.parser_url).parse(Path(args.document).read_bytes())
    else:
        tree = parse_guideline(Path(args.document).read_bytes())
    _emit(serialize_guideline(tree), args.out)
    return 0


def cmd_validate_tree(args) -> int:
    issues = validate_tree(tree_from_document(load_document(_tree_path(args.tree).read_bytes())))
    for issue in issues:
        print(issue, file=sys.stderr)
    if issues:
        return 1
    print("ok")
    return 0


def cmd_enumerate_paths(args) -> int:
    tree = load_tree(args.tree)
    _emit("".join(path_text(tree, p) + "\n" for p in enumerate_paths(tree)), args.out)
    return 0


def cmd_plan(args) -> int:
    tree = load_tree(args.tree)
    registry = load_registry(args.registry)
    if args.planner_url:
        plan = external_plan(tree, registry, HTTPPlannerClient(args.planner_url))
    else:
        plan = plan_loop(tree, registry, args.max_iter, method_override=args.method)
    _emit(serialize_plan(plan), args.out)
    return 0


def cmd_validate_plan(args) -> int:
    tree = load_tree(args.tree)
    report = validate_plan(read_plan(args.plan), tree, load_registry(args.registry))
    if args.json:
        print(dump_json(report.to_json()), end="")
    else:
        print(report.summary())
    return 0 if report.ok else 1


def cmd_run_case(args) -> int:
    tree = load_tree(args.tree)
    registry = load_registry(args.registry)
    if args.case:
        case = read_case(args.case)
        vol, patient = case.volume, case.patient
    elif args.volume and args.patient:
        vol = read_volume(args.volume)
        patient = PatientRecord.from_json(json.loads(Path(args.patient).read_text(encoding="utf-8")))
    else:
        raise UsageError("run-case needs a case file or both --volume and --patient")
    plan = _plan_for(args, tree, registry)
    result = execute_plan(plan, tree, vol, patient, make_provider(args.provider), registry)
    text = serialize_case_result(result, tree, timing=args.timing)
    if args.out:
        _emit(text, args.out)
        print(result.aggregated.recommendation)
        print(path_text(tree, result.aggregated.path))
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen_bench(args) -> int:
    tree_path = _tree_path(args.tree)
    tree = parse_guideline(tree_path.read_bytes())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for case in gen_suite(tree, args.n, args.seed):
        files.append(write_case(case, out).name)
    # keep a copy of the tree beside the cases so the manifest is self-contained
    (out / "tree.json").write_text(serialize_guideline(tree), encoding="utf-8")
    write_manifest(Manifest("tree.json", tree.ref, args.mode or "full", args.seed, files), out / "manifest.json")
    print(f"wrote {len(files)} case(s) to {out}")
    return 0


def _evaluate(args, modes) -> list:
    manifest = read_manifest(args.manifest)
    tree = load_tree(str(resolve(args.manifest, manifest.tree))) if not args.tree else load_tree(args.tree)
    if tree.ref != manifest.tree_ref:
        raise IFCTError(f"manifest is for {manifest.tree_ref}, tree is {tree.ref}")
    cases = [read_case(resolve(args.manifest, c)) for c in manifest.cases]
    seed = manifest.seed if args.seed is None else args.seed
    provider = make_provider(args.provider)
    registry = load_registry(args.registry)
    results, rows = [], {}
    for mode in modes:
        kwargs = {"seed": seed, "workers": args.workers}
        if mode == "full":
            kwargs.update(provider=provider, registry=registry, plan=_plan_for(args, tree, registry))
        elif mode == "baseline":
            kwargs.update(provider=provider, background_in_query=args.background_in_query)
        elif mode == "ablated":
            kwargs.update(labeler=make_labeler(args.labeler, tree, provider, seed))
        preds = predict_cases(tree, cases, mode, **kwargs)
        result = score(preds, mode)
        results.append(result)
        rows[mode] = preds
        print(f"{mode}: n={result.n_cases} accuracy={result.accuracy:.3f} "
              f"weighted_f1={result.weighted_f1:.3f} explanation_accuracy={result.explanation_accuracy:.3f}"
              + (f" errors={len(result.errors)}" if result.errors else ""))
    if args.out:
        from .figures import write_figures

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"tree_ref": tree.ref, "seed": seed,
               "results": [dict(r.to_json(), predictions=[p.to_json() for p in rows[r.mode]]) for r in results]}
        (out / "eval.json").write_text(dump_json(doc), encoding="utf-8")
        (out / "eval.csv").write_text(CSV_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in results),
                                      encoding="utf-8")
        write_figures(results, out)
    return results


def cmd_evaluate(args) -> int:
    modes = MODES if args.mode == "all" else (args.mode,)
    _evaluate(args, modes)
    return 0


def cmd_baseline(args) -> int:
    if args.manifest:
        _evaluate(args, ("baseline",))
        return 0
    if not (args.tree and args.findings is not None):
        raise UsageError("baseline needs --manifest, or --tree with --findings")
    tree = load_tree(args.tree)
    path = baseline_path_similarity(tree, args.findings, args.background or "", make_provider(args.provider),
                                    args.background_in_query)
    print(path_text(tree, path))
    return 0


# --- parser -----------------------------------------------------------------

def _add_common(p, tree_required=True):
    p.add_argument("--tree", required=tree_required, help="guideline file, or liver/renal/pancreas")
    p.add_argument("--registry", help="base-function registry manifest (default: built-in)")


def _add_planning(p):
    p.add_argument("--max-iter", type=int, default=3, help="validation rounds before giving up")
    p.add_argument("--method", choices=[m.value for m in DiameterMethod], help="override the diameter estimator")


def _add_eval(p):
    p.add_argument("--manifest", required=True)
    p.add_argument("--provider", help="phantom (default), local:<seed> or remote:<url>")
    p.add_argument("--labeler", default="noisy:0.3", help="ablated-mode labeler: oracle, noisy:<rate>, provider")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="directory for eval.json, eval.csv and figures")
    p.add_argument("--plan", help="use this plan file instead of synthesizing one")
    p.add_argument("--background-in-query", action="store_true",
                   help="baseline: put patient background in the query instead of each path text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifct", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-guideline", help="check a guideline document and print it in canonical form")
    p.add_argument("document")
    p.add_argument("--parser-url", help="send the raw file to an external parser service first")
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse_guideline)

    p = sub.add_parser("validate-tree", help="list every structural and semantic issue of a tree")
    p.add_argument("tree")
    p.set_defaults(func=cmd_validate_tree)

    p = sub.add_parser("enumerate-paths", help="print every root-to-leaf path, one per line")
    p.add_argument("tree")
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate_paths)

    p = sub.add_parser("plan", help="synthesize and validate a plan for a tree")
    _add_common(p)
    _add_planning(p)
    p.add_argument("--planner-url", help="request the plan from a remote planner service")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate-plan", help="check a plan file against a tree and registry")
    p.add_argument("plan")
    _add_common(p)
    p.add_argument("--json", action="store_true", help="print the full report as JSON")
    p.set_defaults(func=cmd_validate_plan)

    p = sub.add_parser("run-case", help="execute a plan on one scan and patient")
    p.add_argument("case", nargs="?", help="case file written by gen-bench")
    _add_common(p)
    _add_planning(p)
    p.add_argument("--volume", help="CTV1 scan, with --patient, instead of a case file")
    p.add_argument("--patient", help="patient record JSON")
    p.add_argument("--plan")
    p.add_argument("--provider")
    p.add_argument("--timing", action="store_true", help="keep wall times in the trace")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run_case)

    p = sub.add_parser("gen-bench", help="generate synthetic cases with oracle paths")
    _add_common(p)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=MODES, help="mode recorded in the manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_bench)

    p = sub.add_parser("evaluate", help="score one mode, or all of them, on a generated suite")
    _add_eval(p)
    _add_common(p, tree_required=False)
    _add_planning(p)
    p.add_argument("--mode", choices=MODES + ("all",), default="full")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="path-similarity baseline on a suite or one findings text")
    p.add_argument("--manifest")
    p.add_argument("--tree")
    p.add_argument("--registry")
    p.add_argument("--findings", help="findings text to match against path texts")
    p.add_argument("--background", help="patient background text")
    p.add_argument("--provider")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--background-in-query", action="store_true")
    p.set_defaults(func=cmd_baseline, labeler="noisy:0.3", plan=None, max_iter=3, method=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ifct {args.command}: {exc}", file=sys.stderr)
        return 2
    except (IFCTError, OSError, ValueError) as exc:
        print(f"ifct {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
