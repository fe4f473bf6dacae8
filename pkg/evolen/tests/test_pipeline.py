#!/usr/bin/env python
"""
test_pipeline.py - End-to-end runs of every variant on synthetic genomes

The pytest cases drive evolen.core.pipeline directly. run_full_test() walks
the same path through the command line, the way a user would.
"""

import dataclasses
import json
import logging
import os
import shutil
import subprocess
import sys
import tempfile

import pytest

from evolen.cli import evolen_cli
from evolen.core.bpe import load_bpe
from evolen.core.encoder import read_tokenizer
from evolen.core.errors import StageError, ValidationError
from evolen.core.pipeline import (
    MANIFEST_NAME,
    TOKENIZER_NAME,
    PipelineConfig,
    load_manifest,
    run_pipeline,
    verify_artifact,
)
from evolen.core.synthetic import SyntheticParams, generate, write_dataset

SMALL = SyntheticParams(seed=3, genome_length=60_000, contigs=2, conserved_fraction=0.1,
                        accelerated_fraction=0.05, copies_per_bin=2)

BAD_MEME = """MEME version 4

ALPHABET= ACGT

MOTIF broken
letter-probability matrix: alength= 4 w= 2
0.25 0.25 0.25 0.25
"""


@pytest.fixture(scope="module")
def small_config(tmp_path_factory):
    data_dir = tmp_path_factory.mktemp("small")
    return write_dataset(generate(SMALL), str(data_dir), vocab_size=128)


def configure(config_path, out_dir, **changes):
    config = PipelineConfig.load(config_path)
    return dataclasses.replace(config, output_dir=str(out_dir), **changes)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def perfect_match(out_dir):
    with open(os.path.join(out_dir, "eval", "summary.json")) as f:
        return json.load(f)["motifs"]["PerfectMatch%"]


class TestConfig:
    def test_relative_paths_resolve_against_the_config(self, small_config):
        config = PipelineConfig.load(small_config)
        assert os.path.isabs(config.fasta)
        assert os.path.dirname(config.fasta) == os.path.dirname(os.path.abspath(small_config))
        config.validate()

    def test_unknown_keys(self):
        with pytest.raises(ValidationError):
            PipelineConfig.from_dict({"fasta": "genome.fa", "vocab": 10})

    @pytest.mark.parametrize("changes", [
        {"variant": "bpe"},
        {"vocab_size": 3},
        {"length_exponent": 3},
        {"alpha": 0.0},
        {"phylop": None},
        {"regions": "missing.bed"},
    ])
    def test_invalid_settings(self, small_config, tmp_path, changes):
        with pytest.raises(ValidationError):
            configure(small_config, tmp_path, **changes).validate()

    def test_no_partition_runs_without_a_track(self, small_config, tmp_path):
        configure(small_config, tmp_path, variant="no_partition", phylop=None).validate()

    def test_hash_ignores_output_dir_only(self, small_config, tmp_path):
        base = configure(small_config, tmp_path / "a")
        assert configure(small_config, tmp_path / "b").config_hash() == base.config_hash()
        assert configure(small_config, tmp_path / "a", vocab_size=64).config_hash() != base.config_hash()

    def test_hash_follows_input_contents(self, small_config, tmp_path):
        config = configure(small_config, tmp_path)
        copy = tmp_path / "motifs.meme"
        shutil.copy(config.motifs, copy)
        same = dataclasses.replace(config, motifs=str(copy))
        assert same.config_hash() == config.config_hash()
        with open(copy, "a") as f:
            f.write("\n")
        assert same.config_hash() != config.config_hash()


class TestFullRun:
    @pytest.fixture(scope="class")
    def full_run(self, small_config, tmp_path_factory):
        config = configure(small_config, tmp_path_factory.mktemp("full"))
        return config, run_pipeline(config)

    def test_artifacts_and_manifest(self, full_run):
        config, out_dir = full_run
        manifest = load_manifest(out_dir)
        assert manifest["status"] == "complete"
        assert manifest["config_hash"] == config.config_hash()
        paths = {a["path"] for a in manifest["artifacts"]}
        for name in ("conserved.fa", "neutral.fa", "accelerated.fa", "stratify_stats.json",
                     "vocab_con.json", "vocab_neu.json", "vocab_acc.json", "merge_report.json",
                     TOKENIZER_NAME, os.path.join("eval", "summary.json")):
            assert name in paths
        assert not any(a["stale"] for a in manifest["artifacts"])

    def test_tokenizer(self, full_run):
        config, out_dir = full_run
        tokenizer = read_tokenizer(os.path.join(out_dir, TOKENIZER_NAME))
        assert tokenizer.tokens[:4] == ("A", "C", "G", "T")
        assert len(tokenizer) <= 128
        assert tokenizer.length_exponent == 2
        assert tokenizer.config_hash == config.config_hash()
        assert verify_artifact(os.path.join(out_dir, MANIFEST_NAME),
                               os.path.join(out_dir, TOKENIZER_NAME)) == config.config_hash()

    def test_accelerated_only_tokens_are_left_out(self, full_run):
        _, out_dir = full_run
        con, neu, acc = (set(load_bpe(os.path.join(out_dir, f"vocab_{c}.json")).tokens)
                         for c in ("con", "neu", "acc"))
        final = set(read_tokenizer(os.path.join(out_dir, TOKENIZER_NAME)).tokens)
        assert not final & (acc - con - neu)
        assert not final & ((neu & acc) - con)

    def test_unchanged_rerun_is_skipped(self, full_run, caplog):
        config, out_dir = full_run
        caplog.set_level(logging.INFO)
        manifest = read_bytes(os.path.join(out_dir, MANIFEST_NAME))
        run_pipeline(config)
        assert "up to date" in caplog.text
        assert read_bytes(os.path.join(out_dir, MANIFEST_NAME)) == manifest

    def test_forced_rerun_is_byte_identical(self, full_run):
        config, out_dir = full_run
        before = {name: read_bytes(os.path.join(out_dir, name))
                  for name in (TOKENIZER_NAME, MANIFEST_NAME, "merge_report.json", "vocab_con.json")}
        run_pipeline(config, force=True)
        for name, content in before.items():
            assert read_bytes(os.path.join(out_dir, name)) == content

    def test_other_output_dir_gives_the_same_tokenizer(self, full_run, tmp_path):
        config, out_dir = full_run
        run_pipeline(dataclasses.replace(config, output_dir=str(tmp_path), evaluate=False), threads=2)
        # evaluate takes part in the hash, so only the entries can match
        first = read_tokenizer(os.path.join(out_dir, TOKENIZER_NAME))
        second = read_tokenizer(os.path.join(str(tmp_path), TOKENIZER_NAME))
        assert first.entries == second.entries

    def test_damaged_artifact_triggers_a_rerun(self, full_run):
        config, out_dir = full_run
        path = os.path.join(out_dir, TOKENIZER_NAME)
        original = read_bytes(path)
        with open(path, "wb") as f:
            f.write(b"{}")
        with pytest.raises(ValidationError):
            verify_artifact(os.path.join(out_dir, MANIFEST_NAME), path)
        run_pipeline(config)
        assert read_bytes(path) == original

    def test_unlisted_file(self, full_run, tmp_path):
        _, out_dir = full_run
        stray = tmp_path / "tokenizer.json"
        stray.write_text("{}")
        with pytest.raises(ValidationError):
            verify_artifact(os.path.join(out_dir, MANIFEST_NAME), str(stray))


class TestVariants:
    def test_no_length_keeps_tokens_and_scores_linearly(self, small_config, tmp_path):
        full = run_pipeline(configure(small_config, tmp_path / "full", evaluate=False))
        linear = run_pipeline(configure(small_config, tmp_path / "linear", variant="no_length",
                                        evaluate=False))
        full_tok = read_tokenizer(os.path.join(full, TOKENIZER_NAME))
        linear_tok = read_tokenizer(os.path.join(linear, TOKENIZER_NAME))
        assert linear_tok.tokens == full_tok.tokens
        assert linear_tok.length_exponent == 1
        assert all(score == len(token) for token, score in linear_tok.entries)
        assert all(score == len(token) ** 2 for token, score in full_tok.entries)

    def test_no_partition_trains_one_vocabulary(self, small_config, tmp_path):
        out_dir = run_pipeline(configure(small_config, tmp_path, variant="no_partition"))
        paths = {a["path"] for a in load_manifest(out_dir)["artifacts"]}
        assert "vocab_genome.json" in paths
        assert "merge_report.json" not in paths
        assert "conserved.fa" not in paths
        genome_vocab = load_bpe(os.path.join(out_dir, "vocab_genome.json"))
        tokenizer = read_tokenizer(os.path.join(out_dir, TOKENIZER_NAME))
        assert tuple(tokenizer.tokens) == genome_vocab.tokens[:128]
        # the track is still stratified for evaluation
        assert os.path.exists(os.path.join(out_dir, "eval", "phylop.tsv"))

    def test_no_priority_records_its_strategy(self, small_config, tmp_path):
        out_dir = run_pipeline(configure(small_config, tmp_path, variant="no_priority", evaluate=False))
        with open(os.path.join(out_dir, "merge_report.json")) as f:
            assert json.load(f)["strategy"] == "no_priority"
        tokenizer = read_tokenizer(os.path.join(out_dir, TOKENIZER_NAME))
        assert len(tokenizer) <= 128


class TestFailures:
    def test_bad_genome_fails_in_load(self, small_config, tmp_path):
        fasta = tmp_path / "bad.fa"
        fasta.write_text(">chr1\nACGTXACGT\n")
        config = configure(small_config, tmp_path / "out", fasta=str(fasta))
        with pytest.raises(StageError) as info:
            run_pipeline(config)
        assert info.value.stage == "load"
        manifest = load_manifest(config.output_dir)
        assert manifest["status"] == "failed"
        assert manifest["artifacts"] == []

    def test_failed_stage_marks_earlier_artifacts_stale(self, small_config, tmp_path):
        motifs = tmp_path / "broken.meme"
        motifs.write_text(BAD_MEME)
        config = configure(small_config, tmp_path / "out", motifs=str(motifs))
        with pytest.raises(StageError) as info:
            run_pipeline(config)
        assert info.value.stage == "evaluate"

        manifest = load_manifest(config.output_dir)
        assert manifest["status"] == "failed"
        assert "build" in manifest["stages"]
        assert manifest["artifacts"] and all(a["stale"] for a in manifest["artifacts"])
        with pytest.raises(ValidationError):
            verify_artifact(os.path.join(config.output_dir, MANIFEST_NAME),
                            os.path.join(config.output_dir, TOKENIZER_NAME))

        # a failed run is never taken as up to date
        with pytest.raises(StageError):
            run_pipeline(config)


class TestEmptyPool:
    @pytest.fixture(scope="class")
    def no_accelerated(self, tmp_path_factory):
        params = dataclasses.replace(SMALL, accelerated_fraction=0.0)
        return write_dataset(generate(params), str(tmp_path_factory.mktemp("no_acc")), vocab_size=64)

    def test_empty_pool_falls_back_to_the_bases(self, no_accelerated, tmp_path, caplog):
        caplog.set_level(logging.WARNING)
        out_dir = run_pipeline(configure(no_accelerated, tmp_path))
        assert load_manifest(out_dir)["status"] == "complete"
        with open(os.path.join(out_dir, "stratify_stats.json")) as f:
            assert json.load(f)["pool_sizes"]["accelerated"] == 0
        acc = load_bpe(os.path.join(out_dir, "vocab_acc.json"))
        assert acc.tokens == ("A", "C", "G", "T")
        assert acc.merges == ()
        assert "accelerated pool is empty" in caplog.text

    def test_merge_keeps_conserved_and_neutral_tokens(self, no_accelerated, tmp_path):
        out_dir = run_pipeline(configure(no_accelerated, tmp_path, evaluate=False))
        with open(os.path.join(out_dir, "merge_report.json")) as f:
            report = json.load(f)
        tokenizer = read_tokenizer(os.path.join(out_dir, TOKENIZER_NAME))
        assert tokenizer.tokens[:4] == ("A", "C", "G", "T")
        assert len(tokenizer) > 4
        assert set(report["final_tokens"]) == set(tokenizer.tokens)


class TestCommandLine:
    def test_pipeline_then_eval(self, small_config, tmp_path):
        out_dir = str(tmp_path / "run")
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["pipeline", "--config", small_config, "--output-dir", out_dir,
                             "--loglevel", "WARNING"])
        assert info.value.code == 0

        data_dir = os.path.dirname(small_config)
        eval_dir = str(tmp_path / "eval")
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["eval", "motifs",
                             "--tokenizer", os.path.join(out_dir, TOKENIZER_NAME),
                             "--manifest", os.path.join(out_dir, MANIFEST_NAME),
                             "--motifs", os.path.join(data_dir, "motifs.meme"),
                             "--out-dir", eval_dir])
        assert info.value.code == 0
        with open(os.path.join(eval_dir, "motifs.json")) as f:
            assert json.load(f)["motifs"]["Motifs"] == SMALL.n_motifs

    def test_stage_commands_chain(self, small_config, tmp_path):
        data_dir = os.path.dirname(small_config)
        pools = str(tmp_path / "pools")
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["stratify", "--fasta", os.path.join(data_dir, "genome.fa"),
                             "--phylop", os.path.join(data_dir, "phylop.bedgraph"),
                             "--out-dir", pools, "--loglevel", "WARNING"])
        assert info.value.code == 0
        with open(os.path.join(pools, "stratify_stats.json")) as f:
            stats = json.load(f)
        assert sum(stats["pool_sizes"].values()) + stats["all_n_bins"] == sum(stats["bin_counts"].values())

        for short, category in (("con", "conserved"), ("neu", "neutral"), ("acc", "accelerated")):
            with pytest.raises(SystemExit) as info:
                evolen_cli.main(["train", "--pool", os.path.join(pools, f"{category}.fa"),
                                 "--vocab-size", "64", "--label", short,
                                 "--out", str(tmp_path / f"vocab_{short}.json"), "--loglevel", "WARNING"])
            assert info.value.code == 0
            assert load_bpe(str(tmp_path / f"vocab_{short}.json")).category_label == category

        out = str(tmp_path / "merged" / "tokenizer.json")
        os.makedirs(os.path.dirname(out))
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["merge", "--con", str(tmp_path / "vocab_con.json"),
                             "--neu", str(tmp_path / "vocab_neu.json"),
                             "--acc", str(tmp_path / "vocab_acc.json"),
                             "--target", "64", "--out", out, "--loglevel", "WARNING"])
        assert info.value.code == 0
        with open(os.path.join(os.path.dirname(out), "merge_report.json")) as f:
            report = json.load(f)
        assert report["target_size"] == 64
        assert report["strategy"] == "priority"
        assert set(read_tokenizer(out).tokens) == set(report["final_tokens"])

        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["merge", "--con", str(tmp_path / "vocab_con.json"),
                             "--neu", str(tmp_path / "vocab_neu.json"),
                             "--acc", str(tmp_path / "vocab_acc.json"),
                             "--target", "64", "--no-priority", "--out", out,
                             "--report", str(tmp_path / "frequency.json"), "--loglevel", "WARNING"])
        assert info.value.code == 0
        with open(tmp_path / "frequency.json") as f:
            assert json.load(f)["strategy"] == "no_priority"

        # vocabularies given in the wrong slots
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["merge", "--con", str(tmp_path / "vocab_acc.json"),
                             "--neu", str(tmp_path / "vocab_neu.json"),
                             "--acc", str(tmp_path / "vocab_con.json"),
                             "--out", str(tmp_path / "swapped.json"), "--loglevel", "CRITICAL"])
        assert info.value.code == 1

    @pytest.mark.parametrize("extra", [["--label", "exon"], []])
    def test_train_needs_a_category_label(self, small_config, tmp_path, extra):
        # genome.fa does not name a category either
        fasta = os.path.join(os.path.dirname(small_config), "genome.fa")
        out = str(tmp_path / "vocab.json")
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["train", "--pool", fasta, "--vocab-size", "16", "--out", out,
                             "--loglevel", "CRITICAL"] + extra)
        assert info.value.code == 1
        assert not os.path.exists(out)

    def test_merge_arguments(self):
        args = evolen_cli.parse_args(["merge", "--con", "c", "--neu", "n", "--acc", "a",
                                      "--target", "5120", "--no-priority", "--out", "t.json"])
        assert args.target == 5120
        assert args.no_priority
        assert args.report is None
        assert evolen_cli.default_report_path("out/t.json") == os.path.join("out", "merge_report.json")
        assert evolen_cli.default_report_path("t.json") == os.path.join(".", "merge_report.json")

    def test_missing_config_fails(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["pipeline", "--config", str(tmp_path / "nope.json")])
        assert info.value.code == 1

    def test_synth_writes_a_runnable_config(self, tmp_path):
        out_dir = str(tmp_path / "synthetic")
        with pytest.raises(SystemExit) as info:
            evolen_cli.main(["synth", "--out-dir", out_dir, "--length", "20000",
                             "--vocab-size", "64", "--loglevel", "WARNING"])
        assert info.value.code == 0
        PipelineConfig.load(os.path.join(out_dir, "pipeline.json")).validate()


def directional_pair(seed, params, vocab_size, root):
    """PerfectMatch% of the full variant and of the whole-genome baseline"""
    data_dir = os.path.join(root, f"data{seed}")
    config_path = write_dataset(generate(dataclasses.replace(params, seed=seed)), data_dir, vocab_size)
    full = run_pipeline(configure(config_path, os.path.join(root, f"full{seed}")))
    baseline = run_pipeline(configure(config_path, os.path.join(root, f"genome{seed}"),
                                      variant="no_partition"))
    return perfect_match(full), perfect_match(baseline)


def test_planted_motifs_survive_better_than_with_one_genome_vocabulary(tmp_path):
    params = SyntheticParams(genome_length=200_000, copies_per_bin=3)
    evolen, baseline = directional_pair(11, params, 1024, str(tmp_path))
    assert evolen >= 50.0
    assert evolen > baseline


@pytest.mark.slow
def test_directional_advantage_over_ten_seeds(tmp_path):
    wins = 0
    for seed in range(10):
        evolen, baseline = directional_pair(seed, SyntheticParams(), 5120, str(tmp_path))
        wins += evolen > baseline
    assert wins >= 8


def print_header(text):
    """Print a nicely formatted header"""
    print("\n" + "=" * 70)
    print(f" {text} ".center(70, "="))
    print("=" * 70 + "\n")


def run_evolen(*args):
    """Run one evolen command in a new process and echo its output"""
    result = subprocess.run(
        [sys.executable, "-m", "evolen", *args],
        capture_output=True,
        text=True,
    )
    print(result.stdout)
    if result.returncode != 0:
        print(f"Command failed with exit code {result.returncode}")
        print(f"Error: {result.stderr}")
    return result.returncode == 0


def run_full_test():
    """Run the complete command line sequence on a fresh synthetic dataset"""
    work_dir = tempfile.mkdtemp(prefix="evolen_test_")
    data_dir = os.path.join(work_dir, "synthetic")
    ok = True
    try:
        print_header("Creating Synthetic Data")
        ok &= run_evolen("synth", "--out-dir", data_dir, "--length", "200000",
                         "--copies-per-bin", "3", "--vocab-size", "1024")

        for variant in ("full", "no_partition"):
            print_header(f"Running Variant '{variant}'")
            config = PipelineConfig.load(os.path.join(data_dir, "pipeline.json"))
            config.variant = variant
            config.output_dir = os.path.join(work_dir, variant)
            config_path = os.path.join(work_dir, f"{variant}.json")
            config.save(config_path)
            ok &= run_evolen("pipeline", "--config", config_path)

        print_header("Comparing Motif Preservation")
        ok &= run_evolen("eval", "motifs",
                         "--tokenizer", os.path.join(work_dir, "full", TOKENIZER_NAME),
                         "--manifest", os.path.join(work_dir, "full", MANIFEST_NAME),
                         "--baseline", os.path.join(work_dir, "no_partition", TOKENIZER_NAME),
                         "--motifs", os.path.join(data_dir, "motifs.meme"),
                         "--label", "evolen",
                         "--out-dir", os.path.join(work_dir, "compare"))

        print_header("Encoding the Genome")
        ok &= run_evolen("encode",
                         "--tokenizer", os.path.join(work_dir, "full", TOKENIZER_NAME),
                         "--fasta", os.path.join(data_dir, "genome.fa"),
                         "--out", os.path.join(work_dir, "spans.tsv"))
    except KeyboardInterrupt:
        print("\nTest interrupted by user")
        ok = False
    finally:
        print_header("Test Complete" if ok else "Test Failed")
        print(f"Outputs kept in {work_dir}")
    return ok


def main():
    sys.exit(0 if run_full_test() else 1)


if __name__ == "__main__":
    main()
