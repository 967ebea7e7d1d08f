"""Batch attack campaigns and deterministic report export.

A batch run attacks every image in a dataset with one or more methods:

    de           DE over indices remapped to the PCA-sorted codebook
    de-unsorted  DE over the raw LBG codebook indices
    random       uniform random search against the raw codebook

Images the oracle already misclassifies after plain compression are
excluded from every arm (recorded with zero evaluations) because there
is nothing to attack. All arms share one evaluation budget so their
success rates are comparable. Reports serialize to canonical bytes:
two runs with the same seed produce byte-identical files.
"""

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attack import AttackContext, AttackResult, DEConfig, de_attack, random_search_attack
from .codec import Codebook, encode, decode
from .image_io import load_image, save_image, validate_image
from .oracle import Oracle
from .sorting import remap_indices, sort_codebook

METHODS = ("de", "de-unsorted", "random")


class ExperimentError(Exception):
    """Base class for batch failures."""


class BatchAbortedError(ExperimentError):
    """A worker failed; `report` holds the records completed before the abort."""

    def __init__(self, message: str, report: "BatchReport"):
        super().__init__(message)
        self.report = report


@dataclass
class AttackRecord:
    """One (image, method) cell of a batch run."""

    image_index: int
    method: str
    true_label: int
    excluded: bool
    success: bool
    best_fitness: float
    predicted_label: int
    confidence: float
    evaluations: int
    oracle_queries: int
    trajectory: np.ndarray | None = None


@dataclass
class BatchReport:
    """All records of a batch run plus the parameters that produced them."""

    methods: tuple[str, ...]
    num_images: int
    num_excluded: int
    num_classes: int
    seed: int
    budget: int
    records: list[AttackRecord]
    aborted: bool = False


def _record_from_result(i: int, method: str, label: int, res: AttackResult) -> AttackRecord:
    return AttackRecord(
        image_index=i,
        method=method,
        true_label=label,
        excluded=False,
        success=res.success,
        best_fitness=res.fitness,
        predicted_label=res.predicted_label,
        confidence=float(res.probs[res.predicted_label]),
        evaluations=res.evaluations,
        oracle_queries=res.oracle_queries,
        trajectory=res.trajectory,
    )


def run_batch(oracle: Oracle, images, labels, codebook: Codebook,
              methods=METHODS, config: DEConfig | None = None,
              budget: int | None = None, seed: int = 0,
              workers: int = 1) -> BatchReport:
    """Attack every image with every method and collect the records.

    Per-image randomness comes from SeedSequence([seed, image_index]),
    so results do not depend on worker count or completion order.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}, expected one of {METHODS}")
    if len(methods) != len(set(methods)):
        raise ValueError("duplicate methods")
    if len(images) != len(labels):
        raise ValueError(f"{len(images)} images but {len(labels)} labels")
    labels = [int(v) for v in labels]
    for lab in labels:
        if not 0 <= lab < oracle.num_classes:
            raise ValueError(f"label {lab} outside {oracle.num_classes} classes")
    if config is None:
        config = DEConfig()
    if budget is None:
        budget = config.population_size * (config.generations + 1)

    sorted_cb = None
    permutation = None
    if "de" in methods:
        sorted_cb, permutation = sort_codebook(codebook)

    def attack_image(i: int) -> list[AttackRecord]:
        img = validate_image(images[i])
        label = labels[i]
        idx = encode(img, codebook)
        base_probs = oracle.classify(decode(idx, codebook))
        base_pred = int(np.argmax(base_probs))
        if base_pred != label:
            # nothing to attack: compression alone already fools the oracle
            return [
                AttackRecord(
                    image_index=i, method=m, true_label=label, excluded=True,
                    success=False, best_fitness=float(base_probs[label]),
                    predicted_label=base_pred,
                    confidence=float(base_probs[base_pred]),
                    evaluations=0, oracle_queries=0,
                )
                for m in methods
            ]
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        out = []
        for m in methods:
            if m == "de":
                ctx = AttackContext(
                    oracle, sorted_cb,
                    remap_indices(idx, permutation, sorted_cb.content_id),
                    label, budget=budget,
                )
                res = de_attack(ctx, config, rng)
            elif m == "de-unsorted":
                ctx = AttackContext(oracle, codebook, idx, label, budget=budget)
                res = de_attack(ctx, config, rng)
            else:
                ctx = AttackContext(oracle, codebook, idx, label, budget=budget)
                res = random_search_attack(ctx, budget, rng)
            out.append(_record_from_result(i, m, label, res))
        return out

    collected: dict[int, list[AttackRecord]] = {}
    failure: BaseException | None = None
    if workers <= 1:
        for i in range(len(images)):
            try:
                collected[i] = attack_image(i)
            except Exception as exc:
                failure = exc
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(attack_image, i): i for i in range(len(images))}
            for fut in as_completed(futures):
                if fut.cancelled():
                    continue
                exc = fut.exception()
                if exc is not None:
                    if failure is None:
                        failure = exc
                        for other in futures:
                            other.cancel()
                else:
                    collected[futures[fut]] = fut.result()

    records: list[AttackRecord] = []
    for i in sorted(collected):
        records.extend(collected[i])
    num_excluded = sum(1 for r in records if r.excluded) // max(len(methods), 1)
    report = BatchReport(
        methods=methods,
        num_images=len(images),
        num_excluded=num_excluded,
        num_classes=oracle.num_classes,
        seed=seed,
        budget=budget,
        records=records,
        aborted=failure is not None,
    )
    if failure is not None:
        raise BatchAbortedError(f"batch aborted: {failure}", report) from failure
    return report


def summarize(report: BatchReport) -> list[dict]:
    """Per-method aggregates over the attacked (non-excluded) images."""
    out = []
    for m in report.methods:
        recs = [r for r in report.records if r.method == m and not r.excluded]
        successes = [r for r in recs if r.success]
        entry = {
            "method": m,
            "attacked": len(recs),
            "successes": len(successes),
            "success_rate": len(successes) / len(recs) if recs else 0.0,
            "mean_evaluations": float(np.mean([r.evaluations for r in recs])) if recs else 0.0,
            "mean_oracle_queries": float(np.mean([r.oracle_queries for r in recs])) if recs else 0.0,
        }
        # confidence is only meaningful when the attack actually flipped the label
        if successes:
            entry["mean_confidence"] = float(np.mean([r.confidence for r in successes]))
        out.append(entry)
    return out


def success_heatmap(report: BatchReport, method: str) -> np.ndarray:
    """K x K counts of true label vs adversarial label over successes.

    The diagonal is structurally zero: success requires the predicted
    label to differ from the true one.
    """
    if method not in report.methods:
        raise ValueError(f"method {method!r} not in report")
    k = report.num_classes
    heat = np.zeros((k, k), dtype=np.int64)
    for r in report.records:
        if r.method == method and r.success:
            heat[r.true_label, r.predicted_label] += 1
    return heat


def format_summary(report: BatchReport) -> str:
    """Plain-text table: success rate to 0.1%, mean confidence to 0.01%."""
    lines = [
        f"images {report.num_images}  excluded {report.num_excluded}"
        f"  budget {report.budget}  seed {report.seed}",
        f"{'method':<12} {'attacked':>8} {'success':>8} {'confidence':>11}",
    ]
    for entry in summarize(report):
        conf = entry.get("mean_confidence")
        conf_text = f"{conf * 100:.2f}%" if conf is not None else "-"
        lines.append(
            f"{entry['method']:<12} {entry['attacked']:>8}"
            f" {entry['success_rate'] * 100:>7.1f}% {conf_text:>11}"
        )
    return "\n".join(lines) + "\n"


def export_report_json(report: BatchReport) -> bytes:
    """Canonical JSON bytes for the whole report, trajectories omitted."""
    payload = {
        "methods": list(report.methods),
        "num_images": report.num_images,
        "num_excluded": report.num_excluded,
        "num_classes": report.num_classes,
        "seed": report.seed,
        "budget": report.budget,
        "aborted": report.aborted,
        "summary": summarize(report),
        "heatmaps": {
            m: success_heatmap(report, m).tolist() for m in report.methods
        },
        "records": [
            {
                "image": r.image_index,
                "method": r.method,
                "true_label": r.true_label,
                "excluded": r.excluded,
                "success": r.success,
                "best_fitness": r.best_fitness,
                "predicted_label": r.predicted_label,
                "confidence": r.confidence,
                "evaluations": r.evaluations,
                "oracle_queries": r.oracle_queries,
            }
            for r in report.records
        ],
    }
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("ascii")


def export_records_csv(report: BatchReport) -> bytes:
    """Per-record CSV; excluded rows are the ones with zero evaluations."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image", "method", "success", "best_fitness",
                     "evaluations", "oracle_queries"])
    for r in report.records:
        writer.writerow([r.image_index, r.method, int(r.success),
                         repr(r.best_fitness), r.evaluations, r.oracle_queries])
    return buf.getvalue().encode("ascii")


def export_heatmap_csv(report: BatchReport, method: str) -> bytes:
    """The success heatmap as a bare K x K integer grid."""
    heat = success_heatmap(report, method)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in heat:
        writer.writerow([int(v) for v in row])
    return buf.getvalue().encode("ascii")


def export_trajectory_csv(trajectory: np.ndarray) -> bytes:
    """Best fitness per generation as a two-column CSV."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["generation", "best_fitness"])
    for g, fit in enumerate(np.asarray(trajectory, dtype=np.float64)):
        writer.writerow([g, repr(float(fit))])
    return buf.getvalue().encode("ascii")


def save_dataset(directory, images, labels) -> None:
    """Write images as PGM/PPM plus a manifest.csv of filename,label."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if len(images) != len(labels):
        raise ValueError(f"{len(images)} images but {len(labels)} labels")
    rows = []
    for i, (img, label) in enumerate(zip(images, labels)):
        img = validate_image(img)
        ext = "pgm" if img.shape[2] == 1 else "ppm"
        name = f"img{i:05d}.{ext}"
        (directory / name).write_bytes(save_image(img))
        rows.append((name, int(label)))
    with open(directory / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["filename", "label"])
        writer.writerows(rows)


def load_dataset(directory) -> tuple[list[np.ndarray], list[int]]:
    """Read a manifest.csv dataset written by `save_dataset`."""
    directory = Path(directory)
    manifest = directory / "manifest.csv"
    if not manifest.is_file():
        raise ExperimentError(f"no manifest.csv in {directory}")
    images = []
    labels = []
    with open(manifest, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].strip().lower() == "filename":
        rows = rows[1:]
    for row in rows:
        if not row:
            continue
        if len(row) != 2:
            raise ExperimentError(f"manifest row {row!r} is not filename,label")
        name, label = row[0].strip(), row[1].strip()
        path = directory / name
        if not path.is_file():
            raise ExperimentError(f"manifest names missing file {name}")
        images.append(load_image(path.read_bytes()))
        labels.append(int(label))
    return images, labels
