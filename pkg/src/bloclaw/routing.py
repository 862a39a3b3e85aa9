"""Fault-tolerant parsing of raw model text into validated directives.

Two parse tracks. Track 1 is a tolerant tag scanner: it locates
``<thought>``, ``<action>`` and parameter tags, treating everything inside
a tag as opaque, so unescaped quotes, newlines and stray markup in the
content never abort a parse. Track 2 kicks in when a parameter tag is
damaged or missing: it extracts the longest run of characters valid for
the slot's token class from the remaining text, with tag tokens, bracketed
markup and action keywords masked out so protocol vocabulary cannot win.

Every function here is total: arbitrary input (including binary garbage
decoded to text) yields either a directive envelope or a classified
failure, never an exception.
"""

from __future__ import annotations

import re
import string
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "ActionKind",
    "TokenClass",
    "ExtractedToken",
    "DirectiveEnvelope",
    "ParseFailure",
    "FailureCategory",
    "SMILES",
    "AMINO_ACID_SEQ",
    "PDB_ID",
    "CODE_BLOCK",
    "FREE_TEXT",
    "TOKEN_CLASSES",
    "REQUIRED_SLOTS",
    "detect_action",
    "extract_maximal_token",
    "parse_directive",
]


class ActionKind(Enum):
    """Directive action keywords the runtime dispatches on."""

    CHAT = "CHAT"
    TWO_D_MOLECULE = "2D_MOLECULE"
    FOLD_PROTEIN = "FOLD_PROTEIN"
    FETCH_STRUCTURE = "FETCH_STRUCTURE"
    DOCKING = "DOCKING"
    RUN_CODE = "RUN_CODE"
    CREATE_TOOL = "CREATE_TOOL"
    RAG_ANSWER = "RAG_ANSWER"


@dataclass(frozen=True)
class TokenClass:
    """A character-class token definition.

    ``alphabet`` of None means the class is unconstrained (FREE_TEXT,
    CODE_BLOCK); those classes are handled by dedicated extraction paths
    rather than run scanning.
    """

    name: str
    alphabet: frozenset[str] | None
    min_length: int = 1
    balanced_brackets: bool = False
    exact_length: int | None = None
    leading_digit: bool = False

    def contains(self, ch: str) -> bool:
        return self.alphabet is None or ch in self.alphabet

    def admits(self, value: str) -> bool:
        """Full membership test: alphabet, length and structural checks."""
        if self.alphabet is not None and any(c not in self.alphabet for c in value):
            return False
        if len(value) < self.min_length:
            return False
        if self.exact_length is not None and len(value) != self.exact_length:
            return False
        if self.leading_digit and (not value or not value[0].isdigit()):
            return False
        if self.balanced_brackets and not _brackets_balanced(value):
            return False
        return True


_SMILES_PUNCT = "@+-=#$%/\\.:()[]"

SMILES = TokenClass(
    name="SMILES",
    alphabet=frozenset(string.ascii_letters + string.digits + _SMILES_PUNCT),
    min_length=3,
    balanced_brackets=True,
)

AMINO_ACID_SEQ = TokenClass(
    name="AMINO_ACID_SEQ",
    alphabet=frozenset("ACDEFGHIKLMNPQRSTVWY"),
    min_length=10,
)

PDB_ID = TokenClass(
    name="PDB_ID",
    alphabet=frozenset(string.ascii_letters + string.digits),
    min_length=4,
    exact_length=4,
    leading_digit=True,
)

CODE_BLOCK = TokenClass(name="CODE_BLOCK", alphabet=None)

FREE_TEXT = TokenClass(name="FREE_TEXT", alphabet=None)

TOKEN_CLASSES: dict[str, TokenClass] = {
    c.name: c for c in (SMILES, AMINO_ACID_SEQ, PDB_ID, CODE_BLOCK, FREE_TEXT)
}

# Slot name -> token class, per action. CHAT and RAG_ANSWER take no slots.
REQUIRED_SLOTS: dict[ActionKind, dict[str, TokenClass]] = {
    ActionKind.CHAT: {},
    ActionKind.TWO_D_MOLECULE: {"target": SMILES},
    ActionKind.FOLD_PROTEIN: {"target": AMINO_ACID_SEQ},
    ActionKind.FETCH_STRUCTURE: {"target": PDB_ID},
    ActionKind.DOCKING: {"target": PDB_ID, "ligand": SMILES},
    ActionKind.RUN_CODE: {"target": CODE_BLOCK},
    ActionKind.CREATE_TOOL: {"name": FREE_TEXT, "target": CODE_BLOCK},
    ActionKind.RAG_ANSWER: {},
}

# Scoped extraction (inside a located tag) relaxes minimum lengths: the
# surrounding context already disambiguates short payloads.
_SCOPED_MIN_LENGTH = 3

KNOWN_TAGS = ("thought", "action", "target", "ligand", "name")

# Charset classes resolved before less constrained ones during fallback, so
# a long SMILES run is claimed before a four-character id is searched for.
_FALLBACK_CLASS_ORDER = ("CODE_BLOCK", "AMINO_ACID_SEQ", "SMILES", "PDB_ID", "FREE_TEXT")

TRACK_TAG_CONTENT = "tag_content"
TRACK_REGEX_FALLBACK = "regex_fallback"
PARSE_TRACK_TAGS = "tags_well_formed"
PARSE_TRACK_FALLBACK = "regex_fallback"


@dataclass(frozen=True)
class ExtractedToken:
    """One parameter token recovered from model text.

    ``value`` always equals ``source[span[0]:span[1]]`` for the text it was
    extracted from, and every character is in the class alphabet for
    charset-constrained classes.
    """

    value: str
    token_class: str
    span: tuple[int, int]
    track: str


@dataclass(frozen=True)
class DirectiveEnvelope:
    """A parsed agent intent: thought, action and validated parameters."""

    raw_text: str
    thought: str
    action: ActionKind
    params: dict[str, ExtractedToken]
    parse_track: str
    downgrade_reason: str | None = None


class FailureCategory(Enum):
    CONVERSATIONAL_NOISE_UNRECOVERED = "conversational_noise_unrecovered"
    UNESCAPED_QUOTE_UNRECOVERED = "unescaped_quote_unrecovered"
    MULTILINE_PAYLOAD_UNRECOVERED = "multiline_payload_unrecovered"
    MISSING_END_TAG_UNRECOVERED = "missing_end_tag_unrecovered"
    NO_ACTION_KEYWORD = "no_action_keyword"


@dataclass(frozen=True)
class ParseFailure:
    """A classified parse failure, carrying a CHAT fallback envelope so the
    caller can still reply with the raw model text."""

    category: FailureCategory
    diagnostic: str
    fallback: DirectiveEnvelope


# ---------------------------------------------------------------------------
# Bracket balance
# ---------------------------------------------------------------------------


def _brackets_balanced(value: str) -> bool:
    """Round and square brackets each balance with non-negative prefixes.

    The two types are checked independently; cross-nesting is not policed.
    """
    r = s = 0
    for ch in value:
        if ch == "(":
            r += 1
        elif ch == ")":
            r -= 1
            if r < 0:
                return False
        elif ch == "[":
            s += 1
        elif ch == "]":
            s -= 1
            if s < 0:
                return False
    return r == 0 and s == 0


def _longest_balanced_span(seg: str) -> tuple[int, int] | None:
    """Longest substring of ``seg`` whose brackets balance, earliest on ties.

    Prefix-state search: a window (i, j] is balanced iff the depth pair at i
    equals the pair at j and no prefix in between dips below the start
    depth. For each j we binary-search the earliest matching prefix index at
    or after the last dip. O(n log n).
    """
    seen: dict[tuple[int, int], list[int]] = {(0, 0): [0]}
    last_at_r: dict[int, int] = {0: 0}
    last_at_s: dict[int, int] = {0: 0}
    r = s = 0
    best_start = best_len = -1
    for j, ch in enumerate(seg, start=1):
        if ch == "(":
            r += 1
        elif ch == ")":
            r -= 1
        elif ch == "[":
            s += 1
        elif ch == "]":
            s -= 1
        barrier = max(last_at_r.get(r - 1, 0), last_at_s.get(s - 1, 0))
        candidates = seen.get((r, s))
        if candidates is not None:
            k = bisect_left(candidates, barrier)
            if k < len(candidates):
                i = candidates[k]
                if j - i > best_len:
                    best_start, best_len = i, j - i
        seen.setdefault((r, s), []).append(j)
        last_at_r[r] = j
        last_at_s[s] = j
    if best_len <= 0:
        return None
    return best_start, best_start + best_len


# ---------------------------------------------------------------------------
# Maximal token extraction
# ---------------------------------------------------------------------------


def _iter_runs(text: str, alphabet: frozenset[str]):
    """Yield (start, end) spans of maximal runs of alphabet characters."""
    start = None
    for i, ch in enumerate(text):
        if ch in alphabet:
            if start is None:
                start = i
        elif start is not None:
            yield start, i
            start = None
    if start is not None:
        yield start, len(text)


def extract_maximal_token(
    search_text: str,
    token_class: TokenClass,
    min_length: int | None = None,
) -> ExtractedToken | None:
    """Extract the longest substring valid for ``token_class``.

    Validity is alphabet membership for every character plus the class's
    length and structural checks. Ties break to the earliest start. Returns
    None when nothing qualifies; absence is a value, not a fault.

    FREE_TEXT is not supported here (it takes whole trimmed regions via the
    directive parser); CODE_BLOCK is resolved from fenced blocks.
    """
    if token_class.name == "FREE_TEXT":
        raise ValueError("FREE_TEXT has no charset; extract it from a scoped region")
    if token_class.name == "CODE_BLOCK":
        return _extract_fenced_block(search_text)
    assert token_class.alphabet is not None
    need = token_class.min_length if min_length is None else min_length
    if token_class.exact_length is not None:
        need = token_class.exact_length

    best: tuple[int, int] | None = None  # (start, end)
    for run_start, run_end in _iter_runs(search_text, token_class.alphabet):
        cand: tuple[int, int] | None = None
        if token_class.exact_length is not None:
            cand = _first_exact_window(search_text, run_start, run_end, token_class)
        elif token_class.balanced_brackets:
            span = _longest_balanced_span(search_text[run_start:run_end])
            if span is not None:
                cand = (run_start + span[0], run_start + span[1])
        else:
            cand = (run_start, run_end)
        if cand is None or cand[1] - cand[0] < need:
            continue
        if best is None or cand[1] - cand[0] > best[1] - best[0]:
            best = cand
    if best is None:
        return None
    value = search_text[best[0] : best[1]]
    return ExtractedToken(
        value=value,
        token_class=token_class.name,
        span=best,
        track=TRACK_REGEX_FALLBACK,
    )


def _first_exact_window(
    text: str, run_start: int, run_end: int, token_class: TokenClass
) -> tuple[int, int] | None:
    """Earliest fixed-length window of a run passing the structural checks."""
    n = token_class.exact_length or 0
    for i in range(run_start, run_end - n + 1):
        if not token_class.leading_digit or text[i].isdigit():
            return i, i + n
    return None


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def _extract_fenced_block(text: str) -> ExtractedToken | None:
    """First fenced code block, with the fence markers stripped."""
    m = _FENCE_RE.search(text)
    if m is None:
        return None
    start, end = _trimmed_span(text, m.start(1), m.end(1))
    if start >= end:
        return None
    return ExtractedToken(
        value=text[start:end],
        token_class="CODE_BLOCK",
        span=(start, end),
        track=TRACK_REGEX_FALLBACK,
    )


def _trimmed_span(text: str, start: int, end: int) -> tuple[int, int]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return start, end


# ---------------------------------------------------------------------------
# Tolerant tag scanning
# ---------------------------------------------------------------------------


@dataclass
class _TagRegion:
    name: str
    open_start: int  # offset of '<'
    content_start: int  # offset just past '>'
    content_end: int
    close_end: int  # offset past '</name>' (== content_end when unclosed)
    closed: bool

    def content(self, text: str) -> str:
        return text[self.content_start : self.content_end]


_OPEN_TAG_RE = re.compile(
    r"<(" + "|".join(KNOWN_TAGS) + r")(?:\s[^<>\n]*)?>", re.IGNORECASE
)


def _scan_tag_regions(text: str) -> list[_TagRegion]:
    """Locate known tag regions, treating content as opaque.

    Content runs to the matching close tag (same-name nesting tracked, so
    the outermost span wins). A region missing its close tag ends at the
    next known open tag, or at end of input — the recovery bound for the
    fallback track.
    """
    regions: list[_TagRegion] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _OPEN_TAG_RE.search(text, pos)
        if m is None:
            break
        name = m.group(1).lower()
        content_start = m.end()
        close_re = re.compile(
            r"<(/?)" + re.escape(name) + r"(?:\s[^<>\n]*)?>", re.IGNORECASE
        )
        depth = 1
        scan = content_start
        content_end = close_end = -1
        while depth > 0:
            cm = close_re.search(text, scan)
            if cm is None:
                break
            depth += -1 if cm.group(1) else 1
            scan = cm.end()
            if depth == 0:
                content_end = cm.start()
                close_end = cm.end()
        if content_end >= 0:
            regions.append(
                _TagRegion(name, m.start(), content_start, content_end, close_end, True)
            )
            pos = close_end
        else:
            nm = _OPEN_TAG_RE.search(text, content_start)
            content_end = nm.start() if nm is not None else n
            regions.append(
                _TagRegion(name, m.start(), content_start, content_end, content_end, False)
            )
            pos = content_end
    return regions


_KEYWORDS: dict[str, ActionKind] = {kind.value: kind for kind in ActionKind}
_KEYWORD_RE = re.compile(
    "|".join(re.escape(k) for k in sorted(_KEYWORDS, key=len, reverse=True)),
    re.IGNORECASE,
)


def _find_keyword(text: str) -> tuple[ActionKind, int, int] | None:
    """First whole-token action keyword occurrence, case-insensitive."""
    for m in _KEYWORD_RE.finditer(text):
        before = text[m.start() - 1] if m.start() > 0 else ""
        after = text[m.end()] if m.end() < len(text) else ""
        if (before.isalnum() or before == "_") or (after.isalnum() or after == "_"):
            continue
        return _KEYWORDS[m.group(0).upper()], m.start(), m.end()
    return None


def detect_action(raw: str) -> ActionKind:
    """Resolve the action kind for raw model text; CHAT is the total sink.

    A keyword inside an ``<action>`` tag region wins; otherwise the first
    whole-token keyword occurrence anywhere; otherwise CHAT.
    """
    for region in _scan_tag_regions(raw):
        if region.name == "action":
            hit = _find_keyword(region.content(raw))
            if hit is not None:
                return hit[0]
    hit = _find_keyword(raw)
    return hit[0] if hit is not None else ActionKind.CHAT


# ---------------------------------------------------------------------------
# Directive parsing
# ---------------------------------------------------------------------------


@dataclass
class _SlotState:
    name: str
    token_class: TokenClass
    region: _TagRegion | None = None
    token: ExtractedToken | None = None
    used_fallback: bool = False


def parse_directive(raw: str) -> DirectiveEnvelope | ParseFailure:
    """Parse raw model text into a directive envelope or classified failure.

    Never raises on any input. When an action keyword is present but a
    required slot cannot be filled by either track, the result is a
    ParseFailure whose ``fallback`` is a CHAT envelope carrying the
    downgrade reason.
    """
    if not isinstance(raw, str):
        raw = str(raw)
    regions = _scan_tag_regions(raw)
    by_name: dict[str, _TagRegion] = {}
    for region in regions:
        prior = by_name.get(region.name)
        # First region per tag name wins, except a closed region beats an
        # unclosed one (recovery from truncated outer tags).
        if prior is None or (region.closed and not prior.closed):
            by_name[region.name] = region

    action = _resolve_action(raw, regions)
    thought = ""
    if "thought" in by_name:
        thought = by_name["thought"].content(raw).strip()

    if action is ActionKind.CHAT and any(
        name in by_name for name in ("target", "ligand")
    ):
        # Parameter tags with no action keyword anywhere: the model intended
        # a tool call we cannot route.
        fallback = DirectiveEnvelope(
            raw_text=raw,
            thought=thought,
            action=ActionKind.CHAT,
            params={},
            parse_track=PARSE_TRACK_FALLBACK,
            downgrade_reason="parameter tags present but no action keyword",
        )
        return ParseFailure(
            category=FailureCategory.NO_ACTION_KEYWORD,
            diagnostic="parameter tags present but no action keyword",
            fallback=fallback,
        )

    slots = [
        _SlotState(name=slot, token_class=cls)
        for slot, cls in REQUIRED_SLOTS[action].items()
    ]
    for slot in slots:
        slot.region = by_name.get(slot.name)

    # Pass 1: closed tag regions, content taken opaquely then cleaned.
    for slot in slots:
        if slot.region is not None and slot.region.closed:
            slot.token = _token_from_content(raw, slot.region, slot.token_class)

    # Pass 2: unclosed regions, then the globally masked search text.
    masked = None
    for cls_name in _FALLBACK_CLASS_ORDER:
        for slot in slots:
            if slot.token is not None or slot.token_class.name != cls_name:
                continue
            slot.used_fallback = True
            if slot.region is not None:
                slot.token = _token_from_open_region(raw, slot.region, slot.token_class)
            if slot.token is None and slot.token_class.name not in ("FREE_TEXT",):
                if masked is None:
                    masked = _masked_search_text(raw, regions)
                slot.token = extract_maximal_token(masked, slot.token_class)
            if slot.token is not None:
                # Claim the span so later classes cannot re-match it.
                if masked is None:
                    masked = _masked_search_text(raw, regions)
                masked = _void_span(masked, slot.token.span)

    missing = [slot for slot in slots if slot.token is None]
    if missing:
        return _classified_failure(raw, thought, action, slots, missing)

    any_fallback = any(slot.used_fallback for slot in slots)
    params = {slot.name: slot.token for slot in slots if slot.token is not None}
    return DirectiveEnvelope(
        raw_text=raw,
        thought=thought,
        action=action,
        params=params,
        parse_track=PARSE_TRACK_FALLBACK if any_fallback else PARSE_TRACK_TAGS,
    )


def _resolve_action(raw: str, regions: list[_TagRegion]) -> ActionKind:
    for region in regions:
        if region.name == "action":
            hit = _find_keyword(region.content(raw))
            if hit is not None:
                return hit[0]
    hit = _find_keyword(raw)
    return hit[0] if hit is not None else ActionKind.CHAT


def _token_from_content(
    raw: str, region: _TagRegion, token_class: TokenClass
) -> ExtractedToken | None:
    """Token from a properly closed tag region.

    Alphabet-pure trimmed content is taken verbatim; otherwise the scoped
    maximal extraction cleans decoration (quotes, prose) off the payload.
    """
    start, end = _trimmed_span(raw, region.content_start, region.content_end)
    value = raw[start:end]
    if token_class.name == "FREE_TEXT":
        if not value:
            return None
        return ExtractedToken(value, "FREE_TEXT", (start, end), TRACK_TAG_CONTENT)
    if token_class.name == "CODE_BLOCK":
        fenced = _extract_fenced_block(value)
        if fenced is not None:
            span = (start + fenced.span[0], start + fenced.span[1])
            return ExtractedToken(fenced.value, "CODE_BLOCK", span, TRACK_TAG_CONTENT)
        if not value:
            return None
        return ExtractedToken(value, "CODE_BLOCK", (start, end), TRACK_TAG_CONTENT)
    if token_class.admits(value):
        return ExtractedToken(value, token_class.name, (start, end), TRACK_TAG_CONTENT)
    scoped = extract_maximal_token(value, token_class, min_length=_SCOPED_MIN_LENGTH)
    if scoped is None:
        return None
    span = (start + scoped.span[0], start + scoped.span[1])
    return ExtractedToken(scoped.value, token_class.name, span, TRACK_TAG_CONTENT)


def _token_from_open_region(
    raw: str, region: _TagRegion, token_class: TokenClass
) -> ExtractedToken | None:
    """Token from an unclosed tag region (bounded at the next tag or EOF)."""
    start, end = _trimmed_span(raw, region.content_start, region.content_end)
    value = raw[start:end]
    if not value:
        return None
    if token_class.name == "FREE_TEXT":
        return ExtractedToken(value, "FREE_TEXT", (start, end), TRACK_REGEX_FALLBACK)
    if token_class.name == "CODE_BLOCK":
        fenced = _extract_fenced_block(value)
        if fenced is not None:
            span = (start + fenced.span[0], start + fenced.span[1])
            return ExtractedToken(fenced.value, "CODE_BLOCK", span, TRACK_REGEX_FALLBACK)
        return ExtractedToken(value, "CODE_BLOCK", (start, end), TRACK_REGEX_FALLBACK)
    scoped = extract_maximal_token(value, token_class, min_length=_SCOPED_MIN_LENGTH)
    if scoped is None:
        return None
    span = (start + scoped.span[0], start + scoped.span[1])
    return ExtractedToken(scoped.value, token_class.name, span, TRACK_REGEX_FALLBACK)


_ANGLE_RE = re.compile(r"<[^<>\n]*>")


def _masked_search_text(raw: str, regions: list[_TagRegion]) -> str:
    """Raw text with protocol vocabulary voided out for fallback search.

    Masks tag tokens, every located tag region's content, remaining
    angle-bracketed spans and action keywords, so none of them can win
    maximality. Offsets are preserved: masking voids characters in place.
    """
    buf = list(raw)

    def void(a: int, b: int) -> None:
        for i in range(a, b):
            buf[i] = "\n"

    for region in regions:
        void(region.open_start, region.close_end)
    masked = "".join(buf)
    for m in _ANGLE_RE.finditer(masked):
        void(m.start(), m.end())
    masked = "".join(buf)
    for m in _KEYWORD_RE.finditer(masked):
        void(m.start(), m.end())
    return "".join(buf)


def _void_span(masked: str, span: tuple[int, int]) -> str:
    return masked[: span[0]] + "\n" * (span[1] - span[0]) + masked[span[1] :]


def _classified_failure(
    raw: str,
    thought: str,
    action: ActionKind,
    slots: list[_SlotState],
    missing: list[_SlotState],
) -> ParseFailure:
    category = FailureCategory.CONVERSATIONAL_NOISE_UNRECOVERED
    if action is ActionKind.CHAT:
        category = FailureCategory.NO_ACTION_KEYWORD
    else:
        for slot in missing:
            region = slot.region
            if region is None:
                continue
            content = region.content(raw)
            if not region.closed:
                category = FailureCategory.MISSING_END_TAG_UNRECOVERED
                break
            if '"' in content:
                category = FailureCategory.UNESCAPED_QUOTE_UNRECOVERED
                break
            if "\n" in content.strip():
                category = FailureCategory.MULTILINE_PAYLOAD_UNRECOVERED
                break
    names = ", ".join(slot.name for slot in missing)
    diagnostic = f"required slot(s) {names} unfillable for {action.value}"
    fallback = DirectiveEnvelope(
        raw_text=raw,
        thought=thought,
        action=ActionKind.CHAT,
        params={},
        parse_track=PARSE_TRACK_FALLBACK,
        downgrade_reason=diagnostic,
    )
    return ParseFailure(category=category, diagnostic=diagnostic, fallback=fallback)
