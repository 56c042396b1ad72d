#!/usr/bin/env python3
"""Print a run's hits@1 beside the reference results.

Feed it one or more report JSON files produced by `kbqa e2e` (or
`kbqa evaluate`), each labeled with the reference row it corresponds to:

    python scripts/report_with_references.py webqsp-zh=report.json de=qald_de.json
"""

from __future__ import annotations

import json
import sys

from model_server.references import format_reference_report


def main(argv: list[str]) -> int:
    if not argv:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    measured = {}
    for arg in argv:
        if "=" not in arg:
            print(f"expected label=report.json, got {arg!r}", file=sys.stderr)
            return 2
        label, path = arg.split("=", 1)
        with open(path, "r", encoding="utf-8") as fh:
            report = json.load(fh)
        measured[label] = float(report["hits_at_1"])
    print(format_reference_report(measured))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
