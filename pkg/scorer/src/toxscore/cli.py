"""Command line front end: toxscore score --in --out --batch-size.

Exit codes: 0 success, 2 validation failure, 1 other errors including
any per-record scoring failures.
"""

import argparse
import sys

from . import __version__
from .adapter import ModelUnavailableError, ScoringJob, score_comments

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="toxscore",
        description="Score comment JSONL files with a pretrained toxicity classifier.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("score", help="batch-score a comment JSONL file")
    p.add_argument("--in", dest="infile", required=True, help="comment JSONL input")
    p.add_argument("--out", dest="outfile", required=True, help="scored JSONL output")
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.add_argument("--device", help="inference device hint, e.g. cpu or cuda")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        job = ScoringJob(input_path=args.infile, output_path=args.outfile,
                         batch_size=args.batch_size, device=args.device)
        stats = score_comments(job)
    except ModelUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"scored {stats.scored}/{stats.total} comments "
          f"({stats.empty_body} empty, {stats.failed} failed) -> {args.outfile}")
    if stats.failed:
        print(f"error: {stats.failed} record(s) could not be scored "
              "(flagged in the output)", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
