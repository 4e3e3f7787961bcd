"""Quality-control orchestration: reverse validation, bounded reflection
retries, confidence flagging and batch processing."""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .clients import GeneratorClient
from .errors import AlignmentError, CcsError, ClientError
from .metrics import ConfidenceTrack, LcsReport, lcs_ratio
from .model import CadSequence, parse_ccs, serialize_ccs, token_stream

DEFAULT_THRESHOLD = 0.9
DEFAULT_MAX_RETRIES = 2
CONFIDENCE_THRESHOLD = 0.98
HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of one reverse-validation round."""

    sample_id: str
    lcs: LcsReport
    accepted: bool
    threshold: float
    reply_text: str = ""
    parse_failure: Optional[str] = None

    def to_json_obj(self) -> dict:
        return {
            "id": self.sample_id,
            "lcs_length": self.lcs.lcs_length,
            "ground_truth_length": self.lcs.ground_truth_length,
            "ratio": self.lcs.ratio,
            "accepted": self.accepted,
            "threshold": self.threshold,
            "parse_failure": self.parse_failure,
        }


@dataclass(frozen=True)
class ReflectionRound:
    description: str
    regenerated_ccs: str
    lcs_ratio: float
    accepted: bool
    parse_failure: Optional[str] = None


@dataclass(frozen=True)
class ReflectionOutcome:
    rounds: tuple          # ReflectionRound; first entry is the initial check
    final_accepted: bool
    retries_used: int

    @property
    def ratios(self) -> list:
        return [r.lcs_ratio for r in self.rounds]


@dataclass(frozen=True)
class CorrectionRequest:
    description: str
    predicted: CadSequence
    confidence: ConfidenceTrack
    flagged_positions: tuple
    threshold: float


def _score_reply(gt: CadSequence, reply_text: str):
    """Parse a generated reply and score it against the ground truth.

    Unparseable replies score 0 with the failure recorded; the ratio is
    LCS(gt tokens, reply tokens) / |gt tokens|.
    """
    g = token_stream(gt)
    try:
        reply = parse_ccs(reply_text)
    except CcsError as exc:
        return LcsReport(0, len(g), 0.0), f"{exc.code}: {exc.message}"
    return lcs_ratio(g, token_stream(reply)), None


def reverse_validate(description: str, gt: CadSequence, client: GeneratorClient,
                     threshold: float = DEFAULT_THRESHOLD,
                     sample_id: str = "") -> ValidationReport:
    """Regenerate a CCS from its description and score it against the
    ground truth; accept when the ratio reaches the threshold (inclusive)."""
    reply_text = client.describe_to_ccs(description)
    report, failure = _score_reply(gt, reply_text)
    return ValidationReport(sample_id, report, report.ratio >= threshold,
                            threshold, reply_text, failure)


def describe_differences(gt: CadSequence, reply_text: str) -> str:
    """Deterministic diff between the ground truth and a regenerated CCS,
    handed to the client as the reflection issues text."""
    gt_lines = serialize_ccs(gt).splitlines()
    try:
        reply_lines = serialize_ccs(parse_ccs(reply_text)).splitlines()
    except CcsError as exc:
        return f"regenerated CCS did not parse ({exc.code}: {exc.message})"
    issues = []
    for i in range(max(len(gt_lines), len(reply_lines))):
        want = gt_lines[i] if i < len(gt_lines) else None
        got = reply_lines[i] if i < len(reply_lines) else None
        if want == got:
            continue
        if got is None:
            issues.append(f"position {i + 1}: missing command, expected {want}")
        elif want is None:
            issues.append(f"position {i + 1}: extra command {got}")
        else:
            issues.append(f"position {i + 1}: got {got}, expected {want}")
    if not issues:
        return "no command-level differences"
    return "\n".join(issues)


def reflect_optimize(description: str, gt: CadSequence, client: GeneratorClient,
                     threshold: float = DEFAULT_THRESHOLD,
                     max_retries: int = DEFAULT_MAX_RETRIES) -> ReflectionOutcome:
    """Bounded reflection loop over a failing description.

    Round 0 is the initial reverse validation.  While rejected and retries
    remain: diff the last regeneration against the ground truth, ask the
    client to reflect and produce a revised description, then re-validate.
    Never issues more than 1 + max_retries generation requests.  A client
    failure propagates with the partial outcome attached.
    """
    gt_text = serialize_ccs(gt)
    rounds = []
    retries = 0
    current = description

    def one_round(desc: str) -> ReflectionRound:
        reply = client.describe_to_ccs(desc)
        report, failure = _score_reply(gt, reply)
        return ReflectionRound(desc, reply, report.ratio,
                               report.ratio >= threshold, failure)

    try:
        rounds.append(one_round(current))
        while not rounds[-1].accepted and retries < max_retries:
            issues = describe_differences(gt, rounds[-1].regenerated_ccs)
            current = client.reflect(current, gt_text, issues)
            retries += 1
            rounds.append(one_round(current))
    except ClientError as exc:
        exc.partial = ReflectionOutcome(tuple(rounds), False, retries)
        raise
    return ReflectionOutcome(tuple(rounds), rounds[-1].accepted, retries)


def flag_low_confidence(predicted: CadSequence, conf: ConfidenceTrack,
                        threshold: float = CONFIDENCE_THRESHOLD,
                        description: str = "") -> CorrectionRequest:
    """Flag exactly the commands whose s_cmd or s_args falls below the
    threshold and package them for a correction request."""
    if len(conf) != len(predicted):
        raise AlignmentError(f"confidence length {len(conf)} != "
                             f"sequence length {len(predicted)}")
    flagged = tuple(i for i, (s_cmd, s_args) in enumerate(conf)
                    if s_cmd < threshold or s_args < threshold)
    return CorrectionRequest(description, predicted, conf, flagged, threshold)


def request_correction(req: CorrectionRequest, client: GeneratorClient) -> str:
    """Send a flagged prediction to the client's correction task."""
    return client.correct(req.description, serialize_ccs(req.predicted),
                          req.confidence)


# --- batch processing ---------------------------------------------------------------

@dataclass
class BatchConfig:
    client: GeneratorClient
    threshold: float = DEFAULT_THRESHOLD
    max_retries: int = DEFAULT_MAX_RETRIES
    workers: int = 1
    checkpoint_path: Optional[str] = None


@dataclass
class SampleResult:
    sample_id: str
    ratios: list = field(default_factory=list)
    final_ratio: float = 0.0
    accepted: bool = False
    retries_used: int = 0
    error: Optional[str] = None

    def to_json_obj(self) -> dict:
        return {"id": self.sample_id, "ratios": self.ratios,
                "final_ratio": self.final_ratio, "accepted": self.accepted,
                "retries_used": self.retries_used, "error": self.error}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SampleResult":
        return cls(obj["id"], list(obj.get("ratios", [])), obj.get("final_ratio", 0.0),
                   obj.get("accepted", False), obj.get("retries_used", 0),
                   obj.get("error"))


@dataclass
class BatchReport:
    samples: list                    # SampleResult, ordered by id
    threshold: float
    histogram_counts: list           # fixed 50 bins on [0, 1]
    acceptance_rate: float
    resumed: int = 0

    def to_json_obj(self) -> dict:
        return {
            "samples": [s.to_json_obj() for s in self.samples],
            "summary": {
                "count": len(self.samples),
                "accepted": sum(1 for s in self.samples if s.accepted),
                "acceptance_rate": self.acceptance_rate,
                "threshold": self.threshold,
                "errors": sum(1 for s in self.samples if s.error),
                "resumed": self.resumed,
                "histogram_bins": HISTOGRAM_BINS,
                "histogram_counts": self.histogram_counts,
            },
        }


def read_manifest(path) -> list:
    """JSON-lines manifest: one {id, description, gt_ccs_path} per line.
    Relative CCS paths resolve against the manifest's directory."""
    base = Path(path).parent
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            gt_path = Path(obj["gt_ccs_path"])
            if not gt_path.is_absolute():
                gt_path = base / gt_path
            samples.append({"id": str(obj["id"]), "description": obj["description"],
                            "gt_ccs_path": gt_path})
    return samples


def ratio_histogram(ratios: Sequence[float]) -> list:
    counts, _ = np.histogram(np.asarray(ratios, dtype=float),
                             bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return counts.astype(int).tolist()


def run_batch(manifest_path, config: BatchConfig) -> BatchReport:
    """Run the validation/reflection loop over a manifest.

    Per-sample failures are recorded and the batch continues; only an
    unreadable manifest is fatal.  Results are ordered by sample id, so the
    report is deterministic for a replay client at any worker count.  With a
    checkpoint path, completed sample results are appended as JSON lines and
    skipped on resume.
    """
    samples = read_manifest(manifest_path)

    done: dict = {}
    if config.checkpoint_path and Path(config.checkpoint_path).exists():
        with open(config.checkpoint_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    res = SampleResult.from_json_obj(json.loads(line))
                    done[res.sample_id] = res
    resumed = len(done)

    lock = threading.Lock()

    def append_checkpoint(result: SampleResult) -> None:
        if not config.checkpoint_path:
            return
        with lock:
            with open(config.checkpoint_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(result.to_json_obj()) + "\n")

    def process(sample: dict) -> SampleResult:
        sid = sample["id"]
        try:
            with open(sample["gt_ccs_path"], "r", encoding="utf-8") as fh:
                gt = parse_ccs(fh.read())
            outcome = reflect_optimize(sample["description"], gt, config.client,
                                       threshold=config.threshold,
                                       max_retries=config.max_retries)
            result = SampleResult(sid, outcome.ratios, outcome.ratios[-1],
                                  outcome.final_accepted, outcome.retries_used)
        except CcsError as exc:
            partial = getattr(exc, "partial", None)
            ratios = partial.ratios if partial is not None else []
            result = SampleResult(sid, ratios, ratios[-1] if ratios else 0.0,
                                  False, getattr(partial, "retries_used", 0),
                                  error=f"{exc.code}: {exc.message}")
        except OSError as exc:
            result = SampleResult(sid, error=f"IOError: {exc}")
        append_checkpoint(result)
        return result

    pending = [s for s in samples if s["id"] not in done]
    if config.workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            fresh = list(pool.map(process, pending))
    else:
        fresh = [process(s) for s in pending]
    for res in fresh:
        done[res.sample_id] = res

    ordered = [done[s["id"]] for s in sorted(samples, key=lambda s: s["id"])]
    scored = [s.final_ratio for s in ordered if s.error is None]
    accepted = sum(1 for s in ordered if s.accepted)
    rate = accepted / len(ordered) if ordered else 0.0
    return BatchReport(ordered, config.threshold, ratio_histogram(scored),
                       rate, resumed)
