"""Command-line front end: split, score, compare, rank, plot.

Every command derives all randomness from --seed, writes a manifest next
to its outputs, prints the manifest path to standard output, and reports
progress and summaries on standard error. Exit codes: 0 success, 2 usage
or validation problem, 3 the sampler did not converge (outputs are still
written for inspection), 4 I/O or external-command failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .decision import (
    DecisionTriple,
    ReportRow,
    RopeInterval,
    rank,
    read_report_csv,
    rope_from_differences,
    tally,
    ttest_triple,
    write_report_csv,
)
from .errors import BayescvError, CommandFailed, OutputUnreadable
from .manifest import RunManifest, write_manifest
from .metrics import read_corpus
from .model import (
    ModelConfig,
    correlated_ttest,
    fit,
    read_chain_metadata,
    read_chains_csv,
    write_chain_metadata,
    write_chains_csv,
)
from .plotting import draws_to_points, points_from_triples, render_simplex_svg
from .runner import DEFAULT_METRICS, run_external
from .scores import ScoreMatrix, assemble_differences
from .splits import make_splits, read_plan, write_plan

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayescv",
        description="Compare systems scored by repeated k-fold cross-validation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_split = sub.add_parser("split", help="write a repeated k-fold split plan")
    p_split.add_argument("--n", type=int, required=True, help="number of items (sentences)")
    p_split.add_argument("--k", type=int, required=True, help="folds per repetition")
    p_split.add_argument("--m", type=int, required=True, help="repetitions")
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--out-prefix", default="split", help="prefix for output files")
    p_split.set_defaults(func=cmd_split)

    p_score = sub.add_parser("score", help="run an external system over a plan and score it")
    p_score.add_argument("--plan", required=True, help="split plan JSON from the split command")
    p_score.add_argument("--corpus", required=True, help="tagged corpus file")
    p_score.add_argument("--dataset", required=True, help="dataset id recorded in the scores")
    p_score.add_argument("--system", required=True, help="system id recorded in the scores")
    p_score.add_argument(
        "--command",
        required=True,
        help="command template with {train} {dev} {test} {pred} placeholders",
    )
    p_score.add_argument("--metrics", default=",".join(DEFAULT_METRICS))
    p_score.add_argument("--oov-vocab", choices=("train", "train+dev"), default="train")
    p_score.add_argument("--workers", type=int, default=1)
    p_score.add_argument("--timeout", type=float, default=None, help="per-round timeout, seconds")
    p_score.add_argument("--workdir", default=None, help="keep round files under this directory")
    p_score.add_argument("--out-prefix", default="scores")
    p_score.set_defaults(func=cmd_score)

    p_compare = sub.add_parser("compare", help="compare two systems on one metric")
    _add_compare_flags(p_compare)
    p_compare.add_argument("--a", required=True, dest="system_a", help="first system id")
    p_compare.add_argument("--b", required=True, dest="system_b", help="second system id")
    p_compare.add_argument("--out-prefix", default="compare")
    p_compare.set_defaults(func=cmd_compare)

    p_rank = sub.add_parser("rank", help="compare all system pairs and rank them")
    _add_compare_flags(p_rank)
    p_rank.add_argument("--out-prefix", default="rank")
    p_rank.set_defaults(func=cmd_rank)

    p_plot = sub.add_parser("plot", help="render a simplex plot from chains or a report")
    source = p_plot.add_mutually_exclusive_group(required=True)
    source.add_argument("--chains", default=None, help="chains CSV from the compare command")
    source.add_argument("--report", default=None, help="report CSV (one point per row)")
    p_plot.add_argument(
        "--meta", default=None, help="chains metadata file (default: chains path + .meta.txt)"
    )
    p_plot.add_argument(
        "--rope", type=float, default=None, help="rope halfwidth (default: from metadata)"
    )
    p_plot.add_argument("--max-points", type=int, default=5000)
    p_plot.add_argument("--title", default=None)
    p_plot.add_argument("--out-prefix", default="plot")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def _add_compare_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scores", required=True, nargs="+", help="one or more score CSV files, merged"
    )
    parser.add_argument("--metric", required=True)
    rope = parser.add_mutually_exclusive_group(required=True)
    rope.add_argument("--rope", type=float, default=None, help="rope halfwidth, raw score scale")
    rope.add_argument(
        "--rope-mode",
        choices=("ci95",),
        default=None,
        help="derive the rope as half the central 95%% interval of the pooled differences",
    )
    parser.add_argument("--rho", type=float, default=None, help="fold correlation (default 1/k)")
    parser.add_argument("--chains", type=int, default=4)
    parser.add_argument("--draws", type=int, default=12500, help="retained draws per chain")
    parser.add_argument("--warmup", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--no-standardize", action="store_true")
    parser.add_argument("--sigma-bar-factor", type=float, default=1000.0)
    parser.add_argument("--delta0-halfwidth", type=float, default=1.0)
    parser.add_argument(
        "--nu-prior", type=float, nargs=2, default=(2.0, 0.1), metavar=("SHAPE", "RATE")
    )


def cmd_split(args: argparse.Namespace) -> int:
    plan = make_splits(args.n, args.k, args.m, args.seed)
    prefix = Path(args.out_prefix)
    plan_path = prefix.with_name(prefix.name + ".plan.json")
    manifest_path = prefix.with_name(prefix.name + ".manifest.txt")
    manifest = RunManifest.collect(
        "split",
        args.seed,
        {"n": args.n, "k": args.k, "m": args.m, "out_prefix": args.out_prefix},
        [],
    )
    write_manifest(manifest, manifest_path)
    write_plan(plan, plan_path, manifest=str(manifest_path))
    _log(f"plan: {plan_path} ({plan.m} repetitions x {plan.k} folds over {plan.n_items} items)")
    print(manifest_path)
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    plan = read_plan(args.plan)
    corpus = read_corpus(args.corpus)
    metrics = tuple(m for m in args.metrics.split(",") if m)
    matrix = run_external(
        plan,
        corpus,
        args.command,
        dataset_id=args.dataset,
        system_id=args.system,
        metrics=metrics,
        oov_vocab=args.oov_vocab,
        workers=args.workers,
        workdir=args.workdir,
        timeout=args.timeout,
    )
    prefix = Path(args.out_prefix)
    scores_path = prefix.with_name(prefix.name + ".scores.csv")
    manifest_path = prefix.with_name(prefix.name + ".manifest.txt")
    manifest = RunManifest.collect(
        "score",
        None,
        {
            "plan": args.plan,
            "corpus": args.corpus,
            "dataset": args.dataset,
            "system": args.system,
            "command": args.command,
            "metrics": args.metrics,
            "oov_vocab": args.oov_vocab,
            "workers": args.workers,
        },
        [args.plan, args.corpus],
    )
    write_manifest(manifest, manifest_path)
    matrix.to_csv(scores_path, manifest=str(manifest_path))
    na = sum(1 for v in matrix.entries.values() if v is None)
    _log(f"scores: {scores_path} ({len(matrix)} rows, {na} undefined)")
    print(manifest_path)
    return EXIT_OK


def _model_config(args: argparse.Namespace) -> ModelConfig:
    return ModelConfig(
        sigma_bar_factor=args.sigma_bar_factor,
        delta0_prior_halfwidth=args.delta0_halfwidth,
        nu_prior=tuple(args.nu_prior),
        standardize=not args.no_standardize,
        chains=args.chains,
        samples_per_chain=args.draws,
        warmup=args.warmup,
        seed=args.seed,
    )


def _resolve_rope(args: argparse.Namespace, series) -> tuple[RopeInterval, str]:
    if args.rope is not None:
        return RopeInterval(args.rope), "fixed"
    rope = rope_from_differences(series)
    return rope, "ci95:half-width-of-central-95%-interval-of-pooled-differences"


def _compare_pair(
    scores: ScoreMatrix,
    system_a: str,
    system_b: str,
    args: argparse.Namespace,
    outputs: dict[str, Path],
    manifest_path: Path,
) -> tuple[ReportRow, bool, dict[str, str]]:
    """Shared engine for compare and rank. Returns (row, converged, notes)."""
    series = assemble_differences(scores, system_a, system_b, args.metric, rho=args.rho)
    rope, rope_mode = _resolve_rope(args, series)
    notes = {
        "rope_halfwidth": repr(rope.halfwidth),
        "rope_mode": rope_mode,
        "system_a": system_a,
        "system_b": system_b,
        "metric": args.metric,
        "n_datasets": str(len(series)),
    }
    if len(series) == 1:
        # A single shared data set cannot feed the hierarchical model;
        # fall back to the closed-form correlated t posterior and sample
        # the decision counters from it.
        post_t = correlated_ttest(series[0])
        n_samples = args.chains * args.draws
        triple = ttest_triple(post_t, rope, n_samples=n_samples, seed=args.seed)
        notes["method"] = "correlated_ttest"
        notes["ttest_location"] = repr(post_t.location)
        notes["ttest_scale"] = repr(post_t.scale)
        notes["ttest_dof"] = repr(post_t.dof)
        if "meta" in outputs:
            _write_kv(outputs["meta"], notes, manifest_path)
        converged = True
    else:
        config = _model_config(args)
        post = fit(series, config, workers=args.workers)
        triple = tally(post, rope)
        notes["method"] = "hierarchical"
        notes["standardization_constant"] = repr(post.standardization_constant)
        if "chains" in outputs:
            write_chains_csv(post, outputs["chains"], manifest=str(manifest_path))
            extra = dict(notes)
            extra["manifest"] = str(manifest_path)
            write_chain_metadata(post, outputs["meta"], extra=extra)
        converged = post.converged
        if not converged:
            bad = [
                name
                for name, d in post.diagnostics.items()
                if not (d.r_hat == d.r_hat and d.r_hat <= 1.05)
            ]
            _log(f"warning: chains did not converge for {system_a} vs {system_b}: {bad}")
    row = ReportRow(
        system_a=system_a,
        system_b=system_b,
        metric=args.metric,
        triple=triple,
        rope_halfwidth=rope.halfwidth,
    )
    return row, converged, notes


def cmd_compare(args: argparse.Namespace) -> int:
    scores = ScoreMatrix.from_csvs(args.scores)
    prefix = Path(args.out_prefix)
    report_path = prefix.with_name(prefix.name + ".report.csv")
    chains_path = prefix.with_name(prefix.name + ".chains.csv")
    meta_path = prefix.with_name(prefix.name + ".chains.meta.txt")
    manifest_path = prefix.with_name(prefix.name + ".manifest.txt")
    manifest = RunManifest.collect(
        "compare",
        args.seed,
        _echo_flags(args, {"a": args.system_a, "b": args.system_b}),
        list(args.scores),
    )
    write_manifest(manifest, manifest_path)
    row, converged, _ = _compare_pair(
        scores,
        args.system_a,
        args.system_b,
        args,
        {"chains": chains_path, "meta": meta_path},
        manifest_path,
    )
    write_report_csv([row], report_path, manifest=str(manifest_path))
    t = row.triple
    _log(
        f"{args.system_a} vs {args.system_b} on {args.metric}: "
        f"p_left={t.p_left:.3f} p_rope={t.p_rope:.3f} p_right={t.p_right:.3f} "
        f"verdict={t.verdict} (rope halfwidth {row.rope_halfwidth:g})"
    )
    _log(f"report: {report_path}")
    print(manifest_path)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_rank(args: argparse.Namespace) -> int:
    scores = ScoreMatrix.from_csvs(args.scores)
    systems = sorted(
        {key[1] for key in scores.entries if key[2] == args.metric}
    )
    if len(systems) < 2:
        raise ValueError(
            f"ranking needs at least two systems with {args.metric!r} scores, found {systems}"
        )
    prefix = Path(args.out_prefix)
    pairs_path = prefix.with_name(prefix.name + ".pairs.csv")
    ranking_path = prefix.with_name(prefix.name + ".ranking.txt")
    manifest_path = prefix.with_name(prefix.name + ".manifest.txt")
    manifest = RunManifest.collect(
        "rank", args.seed, _echo_flags(args, {}), list(args.scores)
    )
    write_manifest(manifest, manifest_path)
    rows: list[ReportRow] = []
    verdicts: dict[tuple[str, str], DecisionTriple] = {}
    all_converged = True
    for i, system_a in enumerate(systems):
        for system_b in systems[i + 1 :]:
            row, converged, _ = _compare_pair(
                scores, system_a, system_b, args, {}, manifest_path
            )
            rows.append(row)
            verdicts[(system_a, system_b)] = row.triple
            all_converged = all_converged and converged
            t = row.triple
            _log(
                f"{system_a} vs {system_b}: {t.p_left:.3f}/{t.p_rope:.3f}/{t.p_right:.3f} "
                f"-> {t.verdict}"
            )
    write_report_csv(rows, pairs_path, manifest=str(manifest_path))
    result = rank(verdicts)
    lines = [f"# manifest: {manifest_path}"]
    lines += [f"{a} {symbol} {b}" for a, symbol, b in result.labels]
    if result.consistent:
        lines.append(f"ranking: {result.chain}")
    else:
        lines.append("ranking: inconsistent")
        lines += [f"conflict: {c}" for c in result.conflicts]
    ranking_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _log(lines[-1] if result.consistent else "verdicts are inconsistent; see " + str(ranking_path))
    print(manifest_path)
    return EXIT_OK if all_converged else EXIT_NOT_CONVERGED


def cmd_plot(args: argparse.Namespace) -> int:
    prefix = Path(args.out_prefix)
    svg_path = prefix.with_name(prefix.name + ".svg")
    manifest_path = prefix.with_name(prefix.name + ".manifest.txt")
    if args.chains is not None:
        meta_path = Path(args.meta) if args.meta else Path(args.chains + ".meta.txt")
        if not meta_path.exists():
            candidate = Path(str(args.chains).replace(".chains.csv", ".chains.meta.txt"))
            if candidate.exists():
                meta_path = candidate
        chains = read_chains_csv(args.chains)
        meta = read_chain_metadata(meta_path) if meta_path.exists() else {}
        for name in ("delta0", "sigma0", "nu"):
            if name not in chains:
                raise ValueError(f"{args.chains}: missing draws for {name!r}")
        rope_raw = args.rope
        if rope_raw is None:
            if "rope_halfwidth" not in meta:
                raise ValueError("no --rope given and none recorded in the chain metadata")
            rope_raw = float(meta["rope_halfwidth"])
        constant = float(meta.get("standardization_constant", "1.0"))
        label_a = meta.get("system_a", "system a")
        label_b = meta.get("system_b", "system b")
        inputs = [args.chains] + ([str(meta_path)] if meta_path.exists() else [])
        points, triple = draws_to_points(
            chains["delta0"], chains["sigma0"], chains["nu"], rope_raw / constant
        )
        title = args.title or f"{label_a} vs {label_b}"
    else:
        rows = read_report_csv(args.report)
        points = points_from_triples([r.triple for r in rows])
        triple = rows[0].triple if len(rows) == 1 else None
        label_a = rows[0].system_a if len(rows) == 1 else "right region"
        label_b = rows[0].system_b if len(rows) == 1 else "left region"
        inputs = [args.report]
        title = args.title or (f"{label_a} vs {label_b}" if len(rows) == 1 else "pairwise triples")
    manifest = RunManifest.collect(
        "plot",
        None,
        {
            "chains": args.chains or "",
            "report": args.report or "",
            "rope": "" if args.rope is None else repr(args.rope),
            "max_points": args.max_points,
        },
        inputs,
    )
    write_manifest(manifest, manifest_path)
    svg = render_simplex_svg(
        points,
        label_left=label_b,
        label_right=label_a,
        triple=triple,
        title=title,
        manifest=str(manifest_path),
        max_points=args.max_points,
    )
    svg_path.write_text(svg, encoding="utf-8")
    _log(f"plot: {svg_path} ({points.shape[0]} draws)")
    print(manifest_path)
    return EXIT_OK


def _echo_flags(args: argparse.Namespace, extra: dict[str, object]) -> dict[str, object]:
    out: dict[str, object] = {
        "scores": ",".join(args.scores),
        "metric": args.metric,
        "rope": "" if args.rope is None else repr(args.rope),
        "rope_mode": args.rope_mode or "fixed",
        "rho": "" if args.rho is None else repr(args.rho),
        "chains": args.chains,
        "draws": args.draws,
        "warmup": args.warmup,
        "workers": args.workers,
        "standardize": not args.no_standardize,
        "sigma_bar_factor": args.sigma_bar_factor,
        "delta0_halfwidth": args.delta0_halfwidth,
        "nu_prior": f"{args.nu_prior[0]},{args.nu_prior[1]}",
    }
    out.update(extra)
    return out


def _write_kv(path: Path, notes: dict[str, str], manifest_path: Path) -> None:
    lines = dict(notes)
    lines["manifest"] = str(manifest_path)
    with path.open("w", encoding="utf-8") as handle:
        for key in sorted(lines):
            handle.write(f"{key}={lines[key]}\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (CommandFailed, OutputUnreadable) as exc:
        _log(f"error: {exc}")
        if isinstance(exc, CommandFailed) and exc.stderr:
            _log(exc.stderr)
        return EXIT_IO
    except OSError as exc:
        _log(f"error: {exc}")
        return EXIT_IO
    except (BayescvError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
