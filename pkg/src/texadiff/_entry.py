"""Console entry point.

Applies the TEXADIFF_THREADS cap before numpy's BLAS pools are configured,
then dispatches to the CLI. 0 or unset means automatic.
"""

import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_thread_cap() -> None:
    raw = os.environ.get("TEXADIFF_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        print(f"ignoring non-integer TEXADIFF_THREADS={raw!r}", file=sys.stderr)
        return
    if n > 0:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, str(n))


def main() -> int:
    _apply_thread_cap()
    from .cli import main as cli_main

    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
