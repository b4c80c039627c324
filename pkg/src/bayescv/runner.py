"""Driving an external system over every cross-validation round.

The command template gets four placeholders: ``{train}`` and ``{dev}`` are
tagged files, ``{test}`` is the evaluation portion (also written with its
gold tags, so trivial commands like ``cp {test} {pred}`` work; a real
system must ignore the tag column), and ``{pred}`` is where the command
must write its tagged predictions in the same format and order. Only
``{test}`` and ``{pred}`` are mandatory; a no-training baseline can skip
the rest.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .errors import CommandFailed, NoOovTokens, OutputUnreadable, ShapeMismatch, TokenMismatch
from .metrics import (
    TaggedCorpus,
    Vocabulary,
    oov_accuracy,
    read_corpus,
    sentence_accuracy,
    token_accuracy,
    write_corpus,
)
from .scores import ScoreMatrix
from .splits import SplitPlan, fold_roles

__all__ = ["run_external", "DEFAULT_METRICS"]

DEFAULT_METRICS = ("token", "sentence", "oov")



def _score_round(
    job: tuple[int, int],
    plan: SplitPlan,
    corpus: TaggedCorpus,
    command_template: str,
    metrics: Sequence[str],
    oov_vocab: str,
    workdir: Path | None,
    timeout: float | None,
) -> dict[str, float | None]:
    rep, fold = job
    train_idx, val_idx, eval_idx = fold_roles(plan, rep, fold)
    train = corpus.subset(train_idx)
    dev = corpus.subset(val_idx)
    gold = corpus.subset(eval_idx)

    def run_in(folder: Path) -> dict[str, float | None]:
        paths = {
            "train": folder / "train.tsv",
            "dev": folder / "dev.tsv",
            "test": folder / "test.tsv",
            "pred": folder / "pred.tsv",
        }
        write_corpus(train, paths["train"])
        write_corpus(dev, paths["dev"])
        write_corpus(gold, paths["test"])
        try:
            command = command_template.format(**{k: str(v) for k, v in paths.items()})
        except (KeyError, IndexError) as exc:
            raise ValueError(f"unknown placeholder in command template: {exc}") from exc
        argv = shlex.split(command)
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except FileNotFoundError as exc:
            raise CommandFailed(f"round ({rep}, {fold}): cannot execute {argv[0]!r}: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise CommandFailed(f"round ({rep}, {fold}): command timed out: {command}") from exc
        if proc.returncode != 0:
            raise CommandFailed(
                f"round ({rep}, {fold}): command exited with {proc.returncode}: {command}",
                returncode=proc.returncode,
                stderr=proc.stderr[-2000:],
            )
        if not paths["pred"].exists():
            raise OutputUnreadable(f"round ({rep}, {fold}): command wrote no file at {paths['pred']}")
        try:
            predicted = read_corpus(paths["pred"])
        except ValueError as exc:
            raise OutputUnreadable(f"round ({rep}, {fold}): {exc}") from exc
        vocab_corpora = (train, dev) if oov_vocab == "train+dev" else (train,)
        vocabulary = Vocabulary.from_corpus(*vocab_corpora)
        out: dict[str, float | None] = {}
        try:
            for metric in metrics:
                if metric == "token":
                    out[metric] = token_accuracy(gold, predicted)
                elif metric == "sentence":
                    out[metric] = sentence_accuracy(gold, predicted)
                elif metric == "oov":
                    try:
                        out[metric] = oov_accuracy(vocabulary, gold, predicted)
                    except NoOovTokens:
                        out[metric] = None
                else:
                    raise ValueError(f"unknown metric {metric!r}")
        except (ShapeMismatch, TokenMismatch) as exc:
            raise OutputUnreadable(f"round ({rep}, {fold}): prediction misaligned: {exc}") from exc
        return out

    if workdir is None:
        with tempfile.TemporaryDirectory(prefix=f"round_r{rep}_f{fold}_") as tmp:
            return run_in(Path(tmp))
    folder = workdir / f"rep{rep:03d}_fold{fold:03d}"
    folder.mkdir(parents=True, exist_ok=True)
    return run_in(folder)


def run_external(
    plan: SplitPlan,
    corpus: TaggedCorpus,
    command_template: str,
    *,
    dataset_id: str,
    system_id: str,
    metrics: Sequence[str] = DEFAULT_METRICS,
    oov_vocab: str = "train",
    workers: int = 1,
    workdir: str | Path | None = None,
    timeout: float | None = None,
) -> ScoreMatrix:
    """Run a command over every (repetition, fold) round and score it.

    The corpus must have exactly ``plan.n_items`` sentences. ``oov_vocab``
    selects which portions define "in vocabulary": "train" (default) or
    "train+dev". Rounds run in up to ``workers`` threads; each round gets
    a private directory (a temporary one unless ``workdir`` is given, in
    which case files are kept under ``workdir/repNNN_foldNNN``). The
    result always contains one row per metric per round; an undefined
    out-of-vocabulary accuracy is stored as None.
    """
    if corpus.n_sentences != plan.n_items:
        raise ValueError(
            f"plan covers {plan.n_items} items but corpus has {corpus.n_sentences} sentences"
        )
    if oov_vocab not in ("train", "train+dev"):
        raise ValueError(f"oov_vocab must be 'train' or 'train+dev', got {oov_vocab!r}")
    for placeholder in ("{test}", "{pred}"):
        if placeholder not in command_template:
            raise ValueError(f"command template is missing {placeholder}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    workdir_path = Path(workdir) if workdir is not None else None

    jobs = [(rep, fold) for rep in range(plan.m) for fold in range(plan.k)]

    def work(job: tuple[int, int]) -> tuple[tuple[int, int], dict[str, float | None]]:
        return job, _score_round(
            job, plan, corpus, command_template, metrics, oov_vocab, workdir_path, timeout
        )

    results: dict[tuple[int, int], dict[str, float | None]] = {}
    if workers == 1:
        for job in jobs:
            results[job] = work(job)[1]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for job, scored in pool.map(work, jobs):
                results[job] = scored

    matrix = ScoreMatrix()
    for rep, fold in jobs:
        for metric, value in results[(rep, fold)].items():
            matrix.add(dataset_id, system_id, metric, rep, fold, value)
    return matrix
