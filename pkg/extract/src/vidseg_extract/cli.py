"""Command line: extract --frames <dir> --out <dir> --k 5 [--backend auto]"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ExtractError, SetupError
from .extract import extract_all


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Extract ranked proposal masks and FEAT descriptors "
        "from a frame directory into the segmentation engine's ingest layout.",
    )
    parser.add_argument("--frames", required=True, help="directory of numbered frames")
    parser.add_argument("--out", required=True, help="output root (sequence directory)")
    parser.add_argument("--k", type=int, default=5, help="proposals per frame")
    parser.add_argument(
        "--backend",
        default="auto",
        choices=("auto", "torchvision", "classical"),
        help="model backend; auto prefers torchvision when weights exist",
    )
    args = parser.parse_args(argv)
    try:
        manifest = extract_all(args.frames, args.out, k=args.k, backend=args.backend)
    except SetupError as e:
        print(f"setup error: {e}", file=sys.stderr)
        return 2
    except ExtractError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    failures = sum(1 for f in manifest.frames if f["error"] is not None)
    print(
        json.dumps(
            {
                "model": manifest.model["name"],
                "frames": len(manifest.frames),
                "failures": failures,
                "k": manifest.k,
                "descriptor_dim": manifest.descriptor_dim,
            }
        )
    )
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
