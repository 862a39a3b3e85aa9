"""Token budgeting shared by prompt composition and file intake."""

from __future__ import annotations


def estimate_tokens(text: str) -> int:
    """Provider-independent token estimate: ceil(chars / 4).

    Monotone in text length, which is all budget enforcement needs.
    """
    return (len(text) + 3) // 4
