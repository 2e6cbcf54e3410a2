"""Batch figure rendering for stablefield run directories.

    stablefield-plots <kind> --run DIR --out FIGURE.png [--title TEXT]

where <kind> is one of fields, modulus, convergence, energy-scan,
posterior.  Exit code 2 on schema problems.
"""

from __future__ import annotations

import argparse
import sys

from .figures import (
    FigureSpec,
    plot_convergence,
    plot_energy_scan,
    plot_fields,
    plot_modulus,
    plot_posterior,
)
from .io import SchemaError

_RENDERERS = {
    "fields": plot_fields,
    "modulus": plot_modulus,
    "convergence": plot_convergence,
    "energy-scan": plot_energy_scan,
    "posterior": plot_posterior,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stablefield-plots", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in _RENDERERS:
        sp = sub.add_parser(kind)
        sp.add_argument("--run", required=True, help="stablefield output directory")
        sp.add_argument("--out", required=True, help="image path (png or svg)")
        sp.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    spec = FigureSpec(output=args.out, title=args.title)
    try:
        path = _RENDERERS[args.kind](args.run, spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
