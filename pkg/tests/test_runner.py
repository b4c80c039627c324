"""External-command scoring loop, exercised with tiny shell commands."""

import sys
from pathlib import Path

import pytest

from bayescv.errors import CommandFailed, OutputUnreadable
from bayescv.metrics import TaggedCorpus, read_corpus
from bayescv.runner import run_external
from bayescv.splits import make_splits

FIXTURES = Path(__file__).parent / "fixtures"
COPY_COMMAND = "cp {test} {pred}"


@pytest.fixture(scope="module")
def toy_corpus():
    return read_corpus(FIXTURES / "toy_corpus.tsv")


@pytest.fixture(scope="module")
def toy_plan():
    return make_splits(200, 5, 2, seed=42)


class TestIdentityBaseline:
    def test_copying_the_test_file_scores_one(self, toy_plan, toy_corpus):
        matrix = run_external(
            toy_plan,
            toy_corpus,
            COPY_COMMAND,
            dataset_id="toy",
            system_id="copy",
            metrics=("token", "sentence", "oov"),
        )
        assert len(matrix) == 2 * 5 * 3
        for key, value in matrix.entries.items():
            assert value == 1.0, key

    def test_worker_count_does_not_change_scores(self, toy_plan, toy_corpus):
        serial = run_external(
            toy_plan, toy_corpus, COPY_COMMAND,
            dataset_id="toy", system_id="copy", metrics=("token",),
        )
        threaded = run_external(
            toy_plan, toy_corpus, COPY_COMMAND,
            dataset_id="toy", system_id="copy", metrics=("token",), workers=4,
        )
        assert serial.entries == threaded.entries


class TestStubTagger:
    def test_majority_tagger_matches_hand_computation(self, toy_corpus):
        plan = make_splits(200, 5, 1, seed=7)
        command = f"{sys.executable} {FIXTURES / 'majority_tagger.py'} {{train}} {{test}} {{pred}}"
        matrix = run_external(
            plan, toy_corpus, command,
            dataset_id="toy", system_id="maj", metrics=("token",),
        )
        from bayescv.splits import fold_roles

        for fold in range(5):
            train_idx, _, eval_idx = fold_roles(plan, 0, fold)
            train = toy_corpus.subset(train_idx)
            evl = toy_corpus.subset(eval_idx)
            tag_counts: dict[str, int] = {}
            for _, tag in train.iter_positions():
                tag_counts[tag] = tag_counts.get(tag, 0) + 1
            top = max(tag_counts.items(), key=lambda kv: (kv[1], [-ord(c) for c in kv[0]]))
            best = min(sorted(tag_counts), key=lambda t: -tag_counts[t])
            assert top[0] == best
            expected = sum(
                1 for _, tag in evl.iter_positions() if tag == best
            ) / evl.n_tokens
            got = matrix.entries[("toy", "maj", "token", 0, fold)]
            assert got == pytest.approx(expected, abs=1e-12)

    def test_lexicon_beats_majority(self, toy_plan, toy_corpus):
        lex_cmd = f"{sys.executable} {FIXTURES / 'lexicon_tagger.py'} {{train}} {{test}} {{pred}}"
        maj_cmd = f"{sys.executable} {FIXTURES / 'majority_tagger.py'} {{train}} {{test}} {{pred}}"
        lex = run_external(
            toy_plan, toy_corpus, lex_cmd,
            dataset_id="toy", system_id="lex", metrics=("token",), workers=4,
        )
        maj = run_external(
            toy_plan, toy_corpus, maj_cmd,
            dataset_id="toy", system_id="maj", metrics=("token",), workers=4,
        )
        lex_mean = sum(lex.entries.values()) / len(lex)
        maj_mean = sum(maj.entries.values()) / len(maj)
        assert lex_mean > maj_mean + 0.2


class TestOovHandling:
    def test_no_oov_tokens_records_none(self):
        # Every sentence is identical, so the train folds always cover
        # the evaluation vocabulary and the OOV metric is undefined.
        sents = [[("same", "X"), ("words", "Y")] for _ in range(12)]
        corpus = TaggedCorpus.from_pairs(sents)
        plan = make_splits(12, 3, 1, seed=0)
        matrix = run_external(
            plan, corpus, COPY_COMMAND,
            dataset_id="flat", system_id="copy", metrics=("token", "oov"),
        )
        for fold in range(3):
            assert matrix.entries[("flat", "copy", "oov", 0, fold)] is None
            assert matrix.entries[("flat", "copy", "token", 0, fold)] == 1.0

    def test_oov_vocab_can_include_dev(self, toy_corpus):
        plan = make_splits(200, 5, 1, seed=9)
        train_only = run_external(
            plan, toy_corpus, COPY_COMMAND,
            dataset_id="toy", system_id="c", metrics=("oov",), oov_vocab="train",
        )
        with_dev = run_external(
            plan, toy_corpus, COPY_COMMAND,
            dataset_id="toy", system_id="c", metrics=("oov",), oov_vocab="train+dev",
        )
        assert set(train_only.entries) == set(with_dev.entries)


class TestFailureModes:
    def test_failing_command_raises_with_stderr(self, toy_corpus):
        plan = make_splits(200, 4, 1, seed=1)
        command = f"{sys.executable} -c \"import sys; sys.stderr.write('boom'); sys.exit(3)\" {{train}} {{test}} {{pred}}"
        with pytest.raises(CommandFailed) as info:
            run_external(
                plan, toy_corpus, command,
                dataset_id="toy", system_id="bad", metrics=("token",),
            )
        assert info.value.returncode == 3
        assert "boom" in info.value.stderr

    def test_missing_prediction_file(self, toy_corpus):
        plan = make_splits(200, 4, 1, seed=1)
        with pytest.raises(OutputUnreadable):
            run_external(
                plan, toy_corpus, "true {test} {pred}",
                dataset_id="toy", system_id="noop", metrics=("token",),
            )

    def test_malformed_prediction_file(self, toy_corpus):
        plan = make_splits(200, 4, 1, seed=1)
        command = "sh -c 'echo garbage-without-tab > {pred}' run {test}"
        with pytest.raises(OutputUnreadable):
            run_external(
                plan, toy_corpus, command,
                dataset_id="toy", system_id="junk", metrics=("token",),
            )

    def test_misaligned_tokens_rejected(self, toy_corpus):
        plan = make_splits(200, 4, 1, seed=1)
        command = "sh -c 'printf \"wrong\\tX\\n\\n\" > {pred}' run {test}"
        with pytest.raises(OutputUnreadable):
            run_external(
                plan, toy_corpus, command,
                dataset_id="toy", system_id="mis", metrics=("token",),
            )

    def test_template_must_mention_placeholders(self, toy_plan, toy_corpus):
        with pytest.raises(ValueError):
            run_external(
                toy_plan, toy_corpus, "true {train} {test}",
                dataset_id="toy", system_id="x", metrics=("token",),
            )

    def test_unknown_metric_rejected(self, toy_plan, toy_corpus):
        with pytest.raises(ValueError):
            run_external(
                toy_plan, toy_corpus, COPY_COMMAND,
                dataset_id="toy", system_id="x", metrics=("bleu",),
            )


class TestWorkdir:
    def test_round_files_kept(self, tmp_path, toy_corpus):
        plan = make_splits(200, 4, 1, seed=2)
        run_external(
            plan, toy_corpus, COPY_COMMAND,
            dataset_id="toy", system_id="copy", metrics=("token",),
            workdir=tmp_path,
        )
        round_dirs = sorted(p.name for p in tmp_path.iterdir())
        assert len(round_dirs) == 4
        first = tmp_path / round_dirs[0]
        names = {p.name for p in first.iterdir()}
        assert {"train.tsv", "dev.tsv", "test.tsv", "pred.tsv"} <= names
