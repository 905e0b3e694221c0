"""Command-line entry point.

    deformgeo <check-group|curvature|gauge|transport|verify> --manifest PATH
              [--format json|csv] [--out DIR] [--seed N] [--tolerance-scale F]

Exit status: 0 when every check is within tolerance, 1 when a check fails,
2 for manifest problems (including degenerate inputs found on the grid).
The JSON report is printed on stdout and written to ``DIR/report.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, suite
from .errors import DeformGeoError, ManifestError
from .grid import emit
from .manifest import load, verify_settings

log = logging.getLogger("deformgeo")

COMMANDS = {
    "check-group": suite.check_group,
    "curvature": suite.curvature,
    "gauge": suite.gauge,
    "transport": suite.transport,
    "verify": None,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deformgeo", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--manifest", required=True)
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--out", default="deformgeo-out")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--tolerance-scale", type=float, default=1.0)
    return p


def _diagnostic(exc: DeformGeoError) -> str:
    text = f"{type(exc).__name__}: {exc}"
    if exc.point is not None:
        text += f" (at point {exc.point})"
    return text


def _write_report(report: dict, out: Path):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = os.environ.get("DEFORMGEO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("ManifestError: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        m = load(args.manifest)
        settings = verify_settings(m, args.seed, args.tolerance_scale)
        suite.fd_config(m)
        log.info("manifest %s (task %s, sha256 %s)", m.path, m.task, m.sha256)
        obj = suite.build(m)
        if args.command == "verify":
            rep, grids = suite.verify(m, settings, obj), []
        else:
            rep, grids = COMMANDS[args.command](m, settings, obj)
    except ManifestError as exc:
        print(f"ManifestError: {exc}", file=sys.stderr)
        return 2
    except DeformGeoError as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for g in grids:
        path = emit(g, args.format, out / f"{g.name}.{args.format}")
        log.info("wrote %s", path)
    for c in rep.checks:
        log.info("%s: %.3e (tolerance %.1e) %s", c.name, c.max_residual, c.tolerance,
                 "ok" if c.passed else "FAIL")
    _write_report(rep.as_dict(), out)
    return 0 if rep.passed else 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
