"""Base exception shared by every lab app."""


class OnsagerLabError(Exception):
    """Root of all errors raised by the lab apps.

    Subclasses that signal a bad argument also derive from ``ValueError`` so
    callers can treat them like ordinary validation failures.
    """
