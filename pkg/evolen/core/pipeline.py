"""
pipeline.py - End-to-end EvoLen runs driven by a JSON configuration file

Variants:
    full          stratify -> 3 x BPE -> priority merge -> p=2 scoring
    no_partition  one BPE over the whole genome, no merge, p=2
    no_priority   stratify -> 3 x BPE -> frequency-union merge -> p=2
    no_length     full pipeline with linear (p=1) scoring
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, List, Optional

from evolen import __version__
from evolen.core import analysis, reports
from evolen.core.bpe import BpeVocabulary, base_vocabulary, save_bpe, train_bpe
from evolen.core.encoder import ScoredVocabulary, build_scored_vocab, save_tokenizer
from evolen.core.errors import EvolenError, StageError, ValidationError
from evolen.core.genome_io import (
    format_fasta,
    read_bed_regions,
    read_bedgraph,
    read_fasta,
    read_meme,
    write_text,
)
from evolen.core.merge import merge_no_priority, merge_vocabularies, save_report
from evolen.core.models import (
    CATEGORIES,
    ConservationTrack,
    SequenceRecord,
    Stratification,
    StratificationParams,
)
from evolen.core.stratify import extract_pools, stratification_stats, stratify

# Set up logger for this module
logger = logging.getLogger(__name__)

VARIANTS = ("full", "no_partition", "no_priority", "no_length")

# Variants that stratify the genome before training
PARTITIONED_VARIANTS = ("full", "no_priority", "no_length")

MANIFEST_NAME = "manifest.json"
TOKENIZER_NAME = "tokenizer.json"

# Input fields that hold file paths
PATH_FIELDS = ("fasta", "phylop", "regions", "motifs")


@dataclass
class PipelineConfig:
    """
    Pipeline settings; every constant has its standard default
    """

    fasta: Optional[str] = None
    phylop: Optional[str] = None
    regions: Optional[str] = None
    motifs: Optional[str] = None
    output_dir: str = "evolen_out"
    variant: str = "full"
    bin_size: int = 100
    z: float = 1.645
    vocab_size: int = 5120
    category_vocab_size: Optional[int] = None
    length_exponent: int = 2
    min_merge_frequency: int = 2
    alpha: float = 0.5
    log_base: float = 2.0
    wildcard_threshold: float = 0.25
    max_variants: int = 256
    max_motif_length: int = 12
    evaluate: bool = True

    @property
    def effective_exponent(self) -> int:
        return 1 if self.variant == "no_length" else self.length_exponent

    @property
    def pool_vocab_size(self) -> int:
        return self.category_vocab_size or self.vocab_size

    def validate(self) -> None:
        """
        Check constants and the inputs the selected variant needs

        Raises:
            ValidationError: invalid value or missing input file
        """
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant '{self.variant}', expected one of {VARIANTS}")
        if self.vocab_size < 4:
            raise ValidationError(f"vocab_size must be >= 4, got {self.vocab_size}")
        if self.category_vocab_size is not None and self.category_vocab_size < 4:
            raise ValidationError("category_vocab_size must be >= 4")
        if self.length_exponent not in (1, 2):
            raise ValidationError(f"length_exponent must be 1 or 2, got {self.length_exponent}")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if not 1 <= self.max_motif_length <= analysis.MAX_MOTIF_LENGTH:
            raise ValidationError(f"max_motif_length must lie in 1..{analysis.MAX_MOTIF_LENGTH}")
        StratificationParams(self.z, self.bin_size)

        required = ["fasta"]
        if self.variant in PARTITIONED_VARIANTS:
            required.append("phylop")
        for name in required:
            if not getattr(self, name):
                raise ValidationError(f"variant '{self.variant}' requires the '{name}' input")
        for name in PATH_FIELDS:
            path = getattr(self, name)
            if path and not os.path.exists(path):
                raise ValidationError(f"{name} file not found: {path}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def load(cls, filename: str) -> "PipelineConfig":
        """
        Load a JSON config; relative paths resolve against the file's directory
        """
        with open(filename, "r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{filename} is not valid JSON: {e}")
        base = os.path.dirname(os.path.abspath(filename))
        for name in PATH_FIELDS + ("output_dir",):
            value = data.get(name)
            if value and not os.path.isabs(value):
                data[name] = os.path.normpath(os.path.join(base, value))
        return cls.from_dict(data)

    def save(self, filename: str) -> None:
        with open(filename, "w", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=4)
            f.write("\n")

    def config_hash(self) -> str:
        """
        sha256 over the settings and the contents of the input files

        output_dir does not take part, so moving a run keeps its hash.
        """
        settings = self.to_dict()
        settings.pop("output_dir")
        for name in PATH_FIELDS:
            path = settings.pop(name)
            settings[f"{name}_sha256"] = file_sha256(path) if path and os.path.exists(path) else None
        payload = json.dumps(settings, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def genome_windows(genome: List[SequenceRecord], window: int) -> List[SequenceRecord]:
    """Cut records into consecutive windows (the last one may be shorter)"""
    out = []
    for record in genome:
        for start in range(0, len(record), window):
            out.append(SequenceRecord(
                f"{record.source_contig}:{record.source_offset + start}-"
                f"{record.source_offset + min(start + window, len(record))}",
                record.bases[start:start + window],
                record.source_contig,
                record.source_offset + start,
            ))
    return out


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def load_manifest(output_dir: str) -> Optional[Dict[str, Any]]:
    path = os.path.join(output_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        return None
    with open(path, "r") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError:
            logger.warning(f"Ignoring unreadable manifest {path}")
            return None


def manifest_is_current(manifest: Optional[Dict[str, Any]], config_hash: str, output_dir: str) -> bool:
    """
    True when a completed run with the same hash left all artifacts intact
    """
    if not manifest or manifest.get("status") != "complete":
        return False
    if manifest.get("config_hash") != config_hash:
        return False
    for artifact in manifest.get("artifacts", []):
        path = os.path.join(output_dir, artifact["path"])
        if not os.path.exists(path) or file_sha256(path) != artifact["sha256"]:
            return False
    return True


def verify_artifact(manifest_path: str, artifact_path: str) -> str:
    """
    Check a file against the hash a manifest recorded for it

    Returns:
        The config hash of the run that produced the artifact

    Raises:
        ValidationError: artifact unknown to the manifest, stale, or modified
    """
    with open(manifest_path, "r") as f:
        manifest = json.load(f)
    base = os.path.dirname(os.path.abspath(manifest_path))
    target = os.path.abspath(artifact_path)
    for artifact in manifest.get("artifacts", []):
        if os.path.abspath(os.path.join(base, artifact["path"])) == target:
            if artifact.get("stale"):
                raise ValidationError(f"{artifact_path} is flagged stale in {manifest_path}")
            if file_sha256(artifact_path) != artifact["sha256"]:
                raise ValidationError(f"{artifact_path} does not match the hash in {manifest_path}")
            return manifest["config_hash"]
    raise ValidationError(f"{artifact_path} is not listed in {manifest_path}")


class PipelineRun:
    """
    One execution of the pipeline: runs stages and records their artifacts
    """

    def __init__(self, config: PipelineConfig, threads: int = 1, show_progress: bool = False):
        self.config = config
        self.threads = max(1, threads)
        self.show_progress = show_progress
        self.output_dir = config.output_dir
        self.config_hash = config.config_hash()
        self.artifacts: List[str] = []
        self.stages: List[str] = []

        self.genome: List[SequenceRecord] = []
        self.track: Optional[ConservationTrack] = None
        self.stratification: Optional[Stratification] = None
        self.vocabularies: Dict[str, BpeVocabulary] = {}
        self.tokenizer: Optional[ScoredVocabulary] = None

    # -- bookkeeping -------------------------------------------------------

    def path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    def record(self, path: str) -> str:
        relative = os.path.relpath(path, self.output_dir)
        if relative not in self.artifacts:
            self.artifacts.append(relative)
        return path

    def stage(self, name: str, func: Callable[[], Any]) -> Any:
        logger.info(f"Stage '{name}' started")
        try:
            result = func()
        except Exception as e:
            raise StageError(name, e) from e
        self.stages.append(name)
        logger.info(f"Stage '{name}' finished")
        return result

    def write_manifest(self, status: str) -> str:
        stale = status != "complete"
        manifest = {
            "evolen_version": __version__,
            "config_hash": self.config_hash,
            "variant": self.config.variant,
            "status": status,
            "stages": self.stages,
            "config": self.config.to_dict(),
            "artifacts": [
                {
                    "path": relative,
                    "sha256": file_sha256(self.path(relative)),
                    "stale": stale,
                }
                for relative in self.artifacts
                if os.path.exists(self.path(relative))
            ],
        }
        path = self.path(MANIFEST_NAME)
        with open(path, "w", newline="\n") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")
        return path

    # -- stages ------------------------------------------------------------

    def load_inputs(self) -> None:
        config = self.config
        self.genome = read_fasta(config.fasta)
        logger.info(f"Loaded {len(self.genome)} genome records "
                    f"({sum(len(r) for r in self.genome)} bp) from {config.fasta}")
        if config.phylop:
            self.track = read_bedgraph(config.phylop)
            logger.info(f"Loaded conservation track from {config.phylop}")

    def run_stratify(self) -> None:
        params = StratificationParams(self.config.z, self.config.bin_size)
        self.stratification = stratify(self.genome, self.track, params, self.threads)

    def write_pools(self) -> Dict[str, Any]:
        pools = extract_pools(self.genome, self.stratification)
        for category, pool in pools.items():
            write_text(self.record(self.path(f"{category}.fa")), format_fasta(pool.sequences))
        reports.write_json(self.record(self.path("stratify_stats.json")),
                           stratification_stats(self.stratification, pools))
        return pools

    def train_pools(self, pools) -> None:
        for category in CATEGORIES:
            if not len(pools[category]):
                logger.warning(f"The {category} pool is empty; using the base vocabulary A, C, G, T")
                vocab = base_vocabulary(category)
            else:
                vocab = train_bpe(pools[category], self.config.pool_vocab_size,
                                  self.config.min_merge_frequency, category,
                                  self.threads, self.show_progress)
            self.vocabularies[category] = vocab
            save_bpe(vocab, self.record(self.path(f"vocab_{category[:3]}.json")))

    def train_whole_genome(self) -> None:
        windows = genome_windows(self.genome, self.config.bin_size)
        vocab = train_bpe(windows, self.config.vocab_size, self.config.min_merge_frequency,
                          "genome", self.threads, self.show_progress)
        self.vocabularies["genome"] = vocab
        save_bpe(vocab, self.record(self.path("vocab_genome.json")))

    def merge(self):
        merge_func = merge_no_priority if self.config.variant == "no_priority" else merge_vocabularies
        report = merge_func(self.vocabularies["conserved"], self.vocabularies["neutral"],
                            self.vocabularies["accelerated"], self.config.vocab_size)
        save_report(report, self.record(self.path("merge_report.json")))
        return report

    def build(self, tokens) -> None:
        self.tokenizer = build_scored_vocab(tokens, self.config.effective_exponent, self.config_hash)
        save_tokenizer(self.tokenizer, self.record(self.path(TOKENIZER_NAME)))

    def evaluate(self) -> None:
        os.makedirs(self.path("eval"), exist_ok=True)
        summary = evaluate_tokenizer(self.tokenizer, self.config, self.genome, self.track,
                                     self.stratification, self.path("eval"), self.config.variant,
                                     self.threads)
        for name in summary.pop("_files"):
            self.record(self.path("eval", name))
        reports.write_json(self.record(self.path("eval", "summary.json")), summary)

    def execute(self) -> str:
        config = self.config
        self.stage("load", self.load_inputs)
        if config.variant in PARTITIONED_VARIANTS:
            self.stage("stratify", self.run_stratify)
            pools = self.stage("pools", self.write_pools)
            self.stage("train", lambda: self.train_pools(pools))
            report = self.stage("merge", self.merge)
            self.stage("build", lambda: self.build(report.final_tokens))
        else:
            self.stage("train", self.train_whole_genome)
            self.stage("build", lambda: self.build(self.vocabularies["genome"].tokens[:config.vocab_size]))
        if config.evaluate:
            if self.stratification is None and self.track is not None:
                self.stage("stratify", self.run_stratify)
            self.stage("evaluate", self.evaluate)
        return self.path(TOKENIZER_NAME)


def evaluate_tokenizer(tokenizer: ScoredVocabulary, config: PipelineConfig,
                       genome: List[SequenceRecord], track: Optional[ConservationTrack],
                       stratification: Optional[Stratification], out_dir: str,
                       label: str = "evolen", threads: int = 1) -> Dict[str, Any]:
    """
    Run every analysis the available inputs allow and write the TSV tables

    Returns a JSON-ready summary; its '_files' entry lists the files written.
    """
    summary: Dict[str, Any] = {"tokenizer": label, "vocab_size": len(tokenizer),
                               "length_exponent": tokenizer.length_exponent}
    written: List[str] = []

    if config.motifs:
        records = analysis.motifs_from_pwms(read_meme(config.motifs), config.wildcard_threshold,
                                            config.max_variants, config.max_motif_length)
        if records:
            outcomes = analysis.motif_outcomes(tokenizer, records)
            metrics = analysis.motif_metrics(tokenizer, records)
            reports.write_motif_table(os.path.join(out_dir, "motifs.tsv"), [(label, metrics)])
            reports.write_motif_details(os.path.join(out_dir, "motif_details.tsv"), outcomes)
            written += ["motifs.tsv", "motif_details.tsv"]
            summary["motifs"] = metrics.to_row()
        else:
            logger.warning("No motif survived consensus conversion; motif metrics skipped")

    if track is not None and stratification is not None:
        stats = analysis.phylop_token_stats(tokenizer, genome, track, stratification)
        reports.write_phylop_table(os.path.join(out_dir, "phylop.tsv"), label, stats)
        written.append("phylop.tsv")
        summary["phylop"] = {c: (s.to_row() if s else None) for c, s in stats.categories.items()}

    if config.regions:
        regions = read_bed_regions(config.regions)
        signatures = analysis.region_signatures(tokenizer, genome, regions)
        pairs = analysis.pairwise_js(signatures, config.log_base)
        reports.write_signature_table(os.path.join(out_dir, "length_signatures.tsv"), label, signatures)
        reports.write_js_table(os.path.join(out_dir, "js.tsv"), label, pairs)
        written += ["length_signatures.tsv", "js.tsv"]
        summary["regions"] = reports.signature_summary(signatures, pairs)

        if stratification is not None:
            bins = analysis.enrichment_bins(genome, regions, stratification)
            try:
                table = analysis.enrichment(tokenizer, bins, config.alpha)
            except ValidationError as e:
                logger.warning(f"Enrichment skipped: {e}")
            else:
                reports.write_enrichment_table(os.path.join(out_dir, "enrichment.tsv"), label, table)
                written.append("enrichment.tsv")
                summary["enrichment"] = reports.enrichment_summary(table)

    summary["_files"] = written
    return summary


def run_pipeline(config: PipelineConfig, threads: int = 1, force: bool = False,
                 show_progress: bool = False) -> str:
    """
    Run the configured variant and return the artifact directory

    An unchanged configuration whose artifacts are intact is not recomputed
    unless force is set.

    Raises:
        ValidationError: invalid configuration
        StageError: a stage failed; artifacts written so far are flagged stale
    """
    config.validate()
    os.makedirs(config.output_dir, exist_ok=True)
    run = PipelineRun(config, threads, show_progress)

    if not force and manifest_is_current(load_manifest(config.output_dir), run.config_hash,
                                         config.output_dir):
        logger.info(f"Artifacts in {config.output_dir} are up to date "
                    f"(config hash {run.config_hash[:12]}); nothing to do")
        return config.output_dir

    logger.info(f"Running variant '{config.variant}' into {config.output_dir} "
                f"(config hash {run.config_hash[:12]}, threads={run.threads})")
    try:
        run.execute()
    except EvolenError:
        run.write_manifest("failed")
        raise
    run.write_manifest("complete")
    logger.info(f"Pipeline complete: {len(run.artifacts)} artifacts in {config.output_dir}")
    return config.output_dir
