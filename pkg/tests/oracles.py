"""Independent brute-force oracles used to check the fast extraction path.

Kept deliberately naive: enumerate candidate substrings, validate each with
a counting loop, keep the longest (earliest on ties). O(n^2) over alphabet
runs; never shares code with the production extractor.
"""

from __future__ import annotations

from bloclaw.routing import TokenClass


def brute_force_validate(value: str, cls: TokenClass) -> bool:
    if cls.alphabet is not None:
        for ch in value:
            if ch not in cls.alphabet:
                return False
    if len(value) < cls.min_length:
        return False
    if cls.exact_length is not None and len(value) != cls.exact_length:
        return False
    if cls.leading_digit:
        if not value or value[0] not in "0123456789":
            return False
    if cls.balanced_brackets:
        round_depth = 0
        square_depth = 0
        for ch in value:
            if ch == "(":
                round_depth += 1
            if ch == ")":
                round_depth -= 1
            if ch == "[":
                square_depth += 1
            if ch == "]":
                square_depth -= 1
            if round_depth < 0 or square_depth < 0:
                return False
        if round_depth != 0 or square_depth != 0:
            return False
    return True


def brute_force_extract(text: str, cls: TokenClass) -> tuple[str, int, int] | None:
    """Longest valid substring, earliest start on ties; None if none."""
    assert cls.alphabet is not None, "oracle only covers charset classes"
    best: tuple[str, int, int] | None = None
    n = len(text)
    for start in range(n):
        if text[start] not in cls.alphabet:
            continue
        round_depth = 0
        square_depth = 0
        broken = False
        for end in range(start + 1, n + 1):
            ch = text[end - 1]
            if ch not in cls.alphabet:
                break
            if ch == "(":
                round_depth += 1
            elif ch == ")":
                round_depth -= 1
            elif ch == "[":
                square_depth += 1
            elif ch == "]":
                square_depth -= 1
            if round_depth < 0 or square_depth < 0:
                broken = True
            length = end - start
            if length < cls.min_length:
                continue
            if cls.exact_length is not None and length != cls.exact_length:
                continue
            if cls.leading_digit and text[start] not in "0123456789":
                continue
            if cls.balanced_brackets and (broken or round_depth != 0 or square_depth != 0):
                continue
            if best is None or length > len(best[0]):
                best = (text[start:end], start, end)
    return best
