"""Command line front end.

Exit codes: 0 on success, 1 for validation or usage problems, 2 when a
remote oracle cannot be reached or answers garbage. Diagnostics go to
stderr; data goes to the requested output files (or stdout for JSON).
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .attack import (
    AttackContext,
    AttackError,
    DEConfig,
    apply_perturbation,
    de_attack,
    random_search_attack,
)
from .codec import (
    CodecError,
    decode,
    encode,
    read_codebook,
    read_indices,
    train_codebook_lbg,
    write_codebook,
    write_indices,
)
from .experiment import (
    BatchAbortedError,
    ExperimentError,
    export_heatmap_csv,
    export_records_csv,
    export_report_json,
    export_trajectory_csv,
    format_summary,
    load_dataset,
    run_batch,
)
from .image_io import PnmError, load_image, save_image
from .oracle import (
    OracleConnectionError,
    OracleError,
    OracleProtocolError,
    OracleTimeoutError,
    connect_remote,
    load_fixture,
)
from .sorting import EigensolverError, distance_profile, sort_codebook

log = logging.getLogger("vqattack")

ORACLE_URL_ENV = "VQATTACK_ORACLE_URL"

_TRANSPORT_ERRORS = (OracleTimeoutError, OracleConnectionError, OracleProtocolError)


class CliError(Exception):
    """Bad arguments or inputs; maps to exit code 1."""


def _load_images_dir(path: str):
    directory = Path(path)
    if not directory.is_dir():
        raise CliError(f"{path} is not a directory")
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in (".pgm", ".ppm"))
    if not files:
        raise CliError(f"no .pgm or .ppm files in {path}")
    return [load_image(p.read_bytes()) for p in files]


def _add_oracle_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--oracle-url",
                        help=f"served classifier endpoint (default: ${ORACLE_URL_ENV})")
    parser.add_argument("--weights",
                        help="linear-softmax weight file for a builtin oracle")
    parser.add_argument("--timeout", type=float, default=10.0,
                        help="remote oracle timeout in seconds")


def _resolve_oracle(args):
    url = args.oracle_url or os.environ.get(ORACLE_URL_ENV)
    if args.weights and args.oracle_url:
        raise CliError("pass either --weights or --oracle-url, not both")
    if args.weights:
        return load_fixture(Path(args.weights).read_bytes())
    if url:
        log.info("connecting to oracle at %s", url)
        return connect_remote(url, timeout=args.timeout)
    raise CliError(f"no oracle: pass --weights or --oracle-url (or set ${ORACLE_URL_ENV})")


def _add_de_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--population", type=int, default=50)
    parser.add_argument("--generations", type=int, default=50)
    parser.add_argument("--scale-factor", type=float, default=0.5)
    parser.add_argument("--budget", type=int,
                        help="evaluation cap (default: population * (generations + 1))")
    parser.add_argument("--seed", type=int, default=0)


def _de_config(args, early_stop: bool = False) -> DEConfig:
    return DEConfig(population_size=args.population, generations=args.generations,
                    scale_factor=args.scale_factor, early_stop=early_stop)


def cmd_train_codebook(args) -> int:
    images = _load_images_dir(args.images)
    log.info("training codebook of %d codewords on %d images", args.length, len(images))
    cb = train_codebook_lbg(images, args.length, args.block_width, args.block_height,
                            epsilon=args.epsilon, max_iters=args.max_iters,
                            seed=args.seed)
    Path(args.output).write_bytes(write_codebook(cb))
    log.info("wrote %s", args.output)
    return 0


def cmd_sort_codebook(args) -> int:
    cb = read_codebook(Path(args.input).read_bytes())
    sorted_cb, _ = sort_codebook(cb)
    Path(args.output).write_bytes(write_codebook(sorted_cb))
    log.info("wrote %s", args.output)
    return 0


def cmd_encode(args) -> int:
    cb = read_codebook(Path(args.codebook).read_bytes())
    img = load_image(Path(args.image).read_bytes())
    Path(args.output).write_bytes(write_indices(encode(img, cb)))
    log.info("wrote %s", args.output)
    return 0


def cmd_decode(args) -> int:
    cb = read_codebook(Path(args.codebook).read_bytes())
    idx = read_indices(Path(args.indices).read_bytes())
    Path(args.output).write_bytes(save_image(decode(idx, cb)))
    log.info("wrote %s", args.output)
    return 0


def cmd_attack(args) -> int:
    cb = read_codebook(Path(args.codebook).read_bytes())
    img = load_image(Path(args.image).read_bytes())
    oracle = _resolve_oracle(args)
    idx = encode(img, cb)
    budget = args.budget
    if budget is None:
        budget = args.population * (args.generations + 1)
    ctx = AttackContext(oracle, cb, idx, args.true_label, budget=budget)
    rng = np.random.default_rng(args.seed)
    if args.method == "de":
        res = de_attack(ctx, _de_config(args, early_stop=args.early_stop), rng)
    else:
        res = random_search_attack(ctx, budget, rng)
    payload = {
        "method": args.method,
        "success": res.success,
        "fitness": res.fitness,
        "predicted_label": res.predicted_label,
        "true_label": args.true_label,
        "x": res.perturbation.x,
        "y": res.perturbation.y,
        "values": list(res.perturbation.values),
        "evaluations": res.evaluations,
        "oracle_queries": res.oracle_queries,
        "generations_completed": res.generations_completed,
        "early_stopped": res.early_stopped,
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.adversarial:
        adv = decode(apply_perturbation(ctx.indices, res.perturbation), cb)
        Path(args.adversarial).write_bytes(save_image(adv))
    if args.trajectory:
        Path(args.trajectory).write_bytes(export_trajectory_csv(res.trajectory))
    log.info("attack %s: fitness %.6f after %d evaluations",
             "succeeded" if res.success else "failed", res.fitness, res.evaluations)
    return 0


def _write_report(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_bytes(export_report_json(report))
    (out_dir / "records.csv").write_bytes(export_records_csv(report))
    for m in report.methods:
        (out_dir / f"heatmap-{m}.csv").write_bytes(export_heatmap_csv(report, m))


def cmd_batch(args) -> int:
    cb = read_codebook(Path(args.codebook).read_bytes())
    images, labels = load_dataset(args.dataset)
    oracle = _resolve_oracle(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    out_dir = Path(args.output_dir)
    try:
        report = run_batch(oracle, images, labels, cb, methods=methods,
                           config=_de_config(args, early_stop=args.early_stop),
                           budget=args.budget, seed=args.seed, workers=args.workers)
    except BatchAbortedError as exc:
        # keep whatever finished so the failure can be diagnosed
        _write_report(exc.report, out_dir)
        log.error("batch aborted after %d records: %s", len(exc.report.records), exc)
        if isinstance(exc.__cause__, _TRANSPORT_ERRORS):
            return 2
        return 1
    _write_report(report, out_dir)
    sys.stdout.write(format_summary(report))
    log.info("wrote report to %s", out_dir)
    return 0


def cmd_distance_profile(args) -> int:
    cb = read_codebook(Path(args.codebook).read_bytes())
    profile = distance_profile(cb, args.reference)
    lines = ["index,distance"]
    lines += [f"{i},{float(d)!r}" for i, d in enumerate(profile.distances)]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqattack",
        description="One-index adversarial attacks on VQ-compressed images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-codebook", help="train an LBG codebook on a directory of images")
    p.add_argument("--images", required=True, help="directory of .pgm/.ppm training images")
    p.add_argument("--length", type=int, required=True, help="codebook size L")
    p.add_argument("--block-width", type=int, default=4)
    p.add_argument("--block-height", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train_codebook)

    p = sub.add_parser("sort-codebook", help="order codewords along their first principal component")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_sort_codebook)

    p = sub.add_parser("encode", help="compress an image to an index file")
    p.add_argument("--codebook", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct an image from an index file")
    p.add_argument("--codebook", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("attack", help="attack one image through a probability oracle")
    p.add_argument("--codebook", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--true-label", type=int, required=True)
    p.add_argument("--method", choices=("de", "random"), default="de")
    p.add_argument("--early-stop", action="store_true",
                   help="stop as soon as the oracle is fooled")
    p.add_argument("--output", help="result JSON path (default: stdout)")
    p.add_argument("--adversarial", help="write the decoded adversarial image here")
    p.add_argument("--trajectory", help="write best fitness per generation as CSV")
    _add_de_args(p)
    _add_oracle_args(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("batch", help="attack a whole dataset and write a report")
    p.add_argument("--dataset", required=True,
                   help="directory with manifest.csv naming images and labels")
    p.add_argument("--codebook", required=True)
    p.add_argument("--methods", default=",".join(("de", "de-unsorted", "random")))
    p.add_argument("--early-stop", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir", required=True)
    _add_de_args(p)
    _add_oracle_args(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("distance-profile",
                       help="distances from one codeword to every other")
    p.add_argument("--codebook", required=True)
    p.add_argument("--reference", type=int, default=0)
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_distance_profile)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; keep 2 for oracle transport only
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except _TRANSPORT_ERRORS as exc:
        log.error("oracle failure: %s", exc)
        return 2
    except (CliError, PnmError, CodecError, EigensolverError, AttackError,
            ExperimentError, OracleError, ValueError, LookupError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
