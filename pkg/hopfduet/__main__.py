#!/usr/bin/env python
"""CLI entry point for hopfduet."""

import sys

from hopfduet.cli import EXIT_INTERRUPTED, run


def main():
    """Run one hopfduet command."""
    try:
        code = run()
    except KeyboardInterrupt:
        sys.exit(EXIT_INTERRUPTED)
    sys.exit(code)


if __name__ == "__main__":
    sys.exit(main())
