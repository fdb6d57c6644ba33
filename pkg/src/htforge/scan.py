"""Name-based identification of scan/test infrastructure nets."""

from __future__ import annotations

import fnmatch

DEFAULT_SCAN_PATTERNS = ("scan_en", "test_mode", "scan_in*", "scan_out*")


def make_matcher(patterns=DEFAULT_SCAN_PATTERNS):
    """Return a predicate matching net names against the glob patterns."""
    pats = tuple(patterns)

    def match(net: str) -> bool:
        return any(fnmatch.fnmatchcase(net, p) for p in pats)

    return match


def matching_nets(nets, patterns=DEFAULT_SCAN_PATTERNS) -> list[str]:
    match = make_matcher(patterns)
    return sorted(n for n in nets if match(n))
