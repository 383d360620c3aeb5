from __future__ import annotations


class AdapterError(Exception):
    """Data or model failure; maps to exit code 2."""

    exit_code = 2


class UsageError(AdapterError):
    """Bad invocation; maps to exit code 1."""

    exit_code = 1
