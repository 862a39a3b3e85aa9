"""Noisy directive corpus: paired tagged/JSON renderings of one ground truth.

Each sample is a directive drawn from templates covering every action
kind, rendered twice — the tag format and the baseline single-object JSON
format — then mutated identically at the semantic level: conversational
filler around and between fields, literal quotes wrapping payloads,
payloads replaced by multi-line scripts rendered without escaping, or
closing delimiters deleted.

The baseline parser here is strict by design: ``json.loads`` on the whole
string with no repair heuristics, so the comparison measures format
fragility rather than parser effort.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum

from ..routing import ActionKind


class NoiseKind(Enum):
    CONVERSATIONAL_TEXT = "conversational_text"
    UNESCAPED_QUOTES = "unescaped_quotes"
    MULTILINE_CODE_STRINGS = "multiline_code_strings"
    MISSING_END_TAGS = "missing_end_tags"


@dataclass(frozen=True)
class Sample:
    kind: ActionKind
    noise: NoiseKind
    thought: str
    slots: dict[str, str]  # ground-truth payloads, slot name -> value
    tagged_text: str
    json_text: str


SMILES_POOL = [
    "CC(=O)Oc1ccccc1C(=O)O",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "CN1CCC[C@H]1c1cccnc1",
    "NCCc1c[nH]c2ccc(O)cc12",
    "OC[C@@H]1O[C@@H](O)[C@H](O)[C@@H](O)[C@@H]1O",
    "CC(C)NCC(O)c1ccc(O)c(O)c1",
]

PDB_ID_POOL = ["1CRN", "2HHB", "1TIM", "6LU7", "1UBQ", "5XNL", "3ETA", "4INS"]

RESIDUES = "ACDEFGHIKLMNPQRSTVWY"

CODE_SNIPPETS = [
    "import math\nvalues = [math.sqrt(i) for i in range(12)]\nprint(sum(values))",
    "totals = {}\nfor item in ['ala', 'gly', 'ala']:\n    totals[item] = totals.get(item, 0) + 1\nprint(totals)",
    "import statistics\nreadings = [2.5, 3.1, 2.8, 3.4]\nprint(statistics.mean(readings), statistics.stdev(readings))",
    "rows = []\nfor i in range(5):\n    rows.append(f'well {i}: {i * 0.25:.2f}')\nprint('\\n'.join(rows))",
]

TOOL_NAMES = ["melting_point_guess", "codon_usage", "buffer_recipe", "dilution_helper"]

THOUGHT_WORDS = (
    "render the compound now for review "
    "fetch entry and show chain detail "
    "user wants a quick visual check "
    "prepare the scene then report back"
).split()

FILLER_PHRASES = [
    "Sure thing!",
    "Of course, happy to help.",
    "Here is what I found for you.",
    "Let me handle that right away.",
    "Give me just a moment please.",
    "Great question, working on it now.",
]

QUOTED_ASIDES = [
    'the user said "make it quick" twice',
    'notes mention "high priority" here',
    'flag this as "draft" for now',
]

_PAYLOAD_KINDS = (
    ActionKind.TWO_D_MOLECULE,
    ActionKind.FOLD_PROTEIN,
    ActionKind.FETCH_STRUCTURE,
    ActionKind.DOCKING,
)
_CODE_KINDS = (ActionKind.RUN_CODE, ActionKind.CREATE_TOOL)

_KINDS_PER_NOISE = {
    NoiseKind.CONVERSATIONAL_TEXT: tuple(ActionKind),
    NoiseKind.UNESCAPED_QUOTES: _PAYLOAD_KINDS,
    NoiseKind.MULTILINE_CODE_STRINGS: _CODE_KINDS,
    NoiseKind.MISSING_END_TAGS: tuple(
        k for k in ActionKind if k is not ActionKind.RAG_ANSWER
    ),
}


def _truth(rng: random.Random, kind: ActionKind) -> tuple[str, dict[str, str]]:
    thought = " ".join(rng.sample(THOUGHT_WORDS, k=rng.randint(4, 7)))
    if kind is ActionKind.TWO_D_MOLECULE:
        return thought, {"target": rng.choice(SMILES_POOL)}
    if kind is ActionKind.FOLD_PROTEIN:
        seq = "".join(rng.choice(RESIDUES) for _ in range(rng.randint(25, 60)))
        return thought, {"target": seq}
    if kind is ActionKind.FETCH_STRUCTURE:
        return thought, {"target": rng.choice(PDB_ID_POOL)}
    if kind is ActionKind.DOCKING:
        return thought, {
            "target": rng.choice(PDB_ID_POOL),
            "ligand": rng.choice(SMILES_POOL),
        }
    if kind is ActionKind.RUN_CODE:
        return thought, {"target": rng.choice(CODE_SNIPPETS)}
    if kind is ActionKind.CREATE_TOOL:
        return thought, {
            "name": rng.choice(TOOL_NAMES),
            "target": rng.choice(CODE_SNIPPETS),
        }
    return thought, {}


_SLOT_ORDER = ("target", "ligand", "name")


def _render_pair(
    rng: random.Random, kind: ActionKind, noise: NoiseKind, thought: str, slots: dict[str, str]
) -> tuple[str, str]:
    filler = lambda: rng.choice(FILLER_PHRASES)  # noqa: E731
    quoting = noise is NoiseKind.UNESCAPED_QUOTES
    if quoting:
        thought = thought + ", " + rng.choice(QUOTED_ASIDES)

    def payload_text(value: str) -> str:
        return f'"{value}"' if quoting else value

    # Tagged rendering: fields as tag regions.
    tag_fields = [f"<thought>{thought}</thought>", f"<action>{kind.value}</action>"]
    ordered = sorted(slots.items(), key=lambda kv: _SLOT_ORDER.index(kv[0]))
    if kind is ActionKind.CREATE_TOOL:
        ordered = [("name", slots["name"]), ("target", slots["target"])]
    for slot, value in ordered:
        tag_fields.append(f"<{slot}>{payload_text(value)}</{slot}>")

    # JSON rendering built from parts so field-level mutations mirror the
    # tagged ones. Payload injection is raw, exactly the failure mode where
    # the emitter forgets escaping.
    json_fields = [
        f'"thought": "{thought}"' if quoting else f'"thought": {json.dumps(thought)}',
        f'"action": "{kind.value}"',
    ]
    for slot, value in ordered:
        if noise in (NoiseKind.UNESCAPED_QUOTES, NoiseKind.MULTILINE_CODE_STRINGS):
            json_fields.append(f'"{slot}": "{payload_text(value)}"')
        else:
            json_fields.append(f'"{slot}": {json.dumps(value)}')

    if noise is NoiseKind.CONVERSATIONAL_TEXT:
        tagged = filler() + " " + _join_with_filler(rng, tag_fields) + " " + filler()
        json_text = filler() + " {" + _join_with_filler(rng, json_fields, sep=", ") + "} " + filler()
        return tagged, json_text

    tagged = "".join(tag_fields)
    json_text = "{" + ", ".join(json_fields) + "}"

    if noise is NoiseKind.MISSING_END_TAGS:
        deleted_any = False
        for tag in ("thought", "action", *[s for s, _ in ordered]):
            if rng.random() < 0.7:
                tagged = tagged.replace(f"</{tag}>", "", 1)
                deleted_any = True
        if not deleted_any:
            tagged = tagged.replace("</action>", "", 1)
        json_text = json_text.rstrip("}")
        if rng.random() < 0.5:
            json_text = json_text.rstrip('"')
    return tagged, json_text


def _join_with_filler(rng: random.Random, fields: list[str], sep: str = " ") -> str:
    out = [fields[0]]
    for piece in fields[1:]:
        if rng.random() < 0.5:
            out.append(sep + rng.choice(FILLER_PHRASES) + sep + piece)
        else:
            out.append(sep + piece)
    return "".join(out)


def generate_noisy_corpus(
    n: int, kinds: tuple[NoiseKind, ...], seed: int
) -> list[Sample]:
    """Deterministic paired corpus: n samples per requested noise kind."""
    rng = random.Random(seed)
    samples: list[Sample] = []
    for noise in kinds:
        action_pool = _KINDS_PER_NOISE[noise]
        for _ in range(n):
            kind = rng.choice(action_pool)
            thought, slots = _truth(rng, kind)
            tagged, json_text = _render_pair(rng, kind, noise, thought, slots)
            samples.append(
                Sample(
                    kind=kind,
                    noise=noise,
                    thought=thought,
                    slots=slots,
                    tagged_text=tagged,
                    json_text=json_text,
                )
            )
    return samples


# ---------------------------------------------------------------------------
# Parsers under test
# ---------------------------------------------------------------------------


def baseline_json_parse(text: str) -> tuple[str, dict[str, str]] | None:
    """Strict standard-grammar JSON parse; no repair of any kind."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict) or "action" not in obj:
        return None
    action = str(obj["action"])
    slots = {
        key: str(value)
        for key, value in obj.items()
        if key in ("target", "ligand", "name")
    }
    return action, slots


def bloclaw_parse_succeeds(sample: Sample) -> bool:
    """Ground-truth check: right action and string-equal recovered payloads."""
    from ..routing import DirectiveEnvelope, parse_directive

    result = parse_directive(sample.tagged_text)
    if not isinstance(result, DirectiveEnvelope):
        return False
    if result.action is not sample.kind:
        return False
    for slot, value in sample.slots.items():
        token = result.params.get(slot)
        if token is None or token.value.strip() != value.strip():
            return False
    return True


def baseline_parse_succeeds(sample: Sample) -> bool:
    parsed = baseline_json_parse(sample.json_text)
    if parsed is None:
        return False
    action, slots = parsed
    if action.upper() != sample.kind.value:
        return False
    for slot, value in sample.slots.items():
        if slots.get(slot, "").strip() != value.strip():
            return False
    return True
