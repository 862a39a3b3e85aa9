"""Directive parsing: tag track, fallback track, and failure classification."""

from __future__ import annotations

import json

import pytest

from bloclaw.routing import (
    AMINO_ACID_SEQ,
    CODE_BLOCK,
    PDB_ID,
    SMILES,
    ActionKind,
    DirectiveEnvelope,
    FailureCategory,
    ParseFailure,
    detect_action,
    extract_maximal_token,
    parse_directive,
)

from .oracles import brute_force_extract


class TestDetectAction:
    def test_exact_tagged_keyword(self):
        assert detect_action("<action>2D_MOLECULE</action>") == ActionKind.TWO_D_MOLECULE

    def test_missing_end_tag_keyword_scan(self):
        raw = "I will now FOLD_PROTEIN. <action>FOLD_PROTEIN"
        assert detect_action(raw) == ActionKind.FOLD_PROTEIN

    def test_plain_prose_falls_to_chat(self):
        assert detect_action("hello there") == ActionKind.CHAT

    def test_tagged_keyword_beats_earlier_prose_keyword(self):
        raw = "thinking about RUN_CODE... <action>DOCKING</action>"
        assert detect_action(raw) == ActionKind.DOCKING

    def test_whole_token_match_only(self):
        assert detect_action("the 2D_MOLECULES are ready") == ActionKind.CHAT

    def test_case_insensitive(self):
        assert detect_action("<action>fetch_structure</action>") == ActionKind.FETCH_STRUCTURE


class TestExtractMaximalToken:
    def test_sequence_in_prose(self):
        # Expected value computed with the brute-force oracle in oracles.py.
        text = "Certainly, the sequence is MKTAYIAKQRQISFVKSHFSRQLEERLGLIEVQ thanks!"
        token = extract_maximal_token(text, AMINO_ACID_SEQ)
        assert token is not None
        assert token.value == "MKTAYIAKQRQISFVKSHFSRQLEERLGLIEVQ"
        assert token.span == (27, 60)
        assert text[token.span[0] : token.span[1]] == token.value
        assert brute_force_extract(text, AMINO_ACID_SEQ) == (
            token.value,
            *token.span,
        )

    def test_alphabet_pure_smiles_taken_whole(self):
        text = "CC(=O)Oc1ccccc1C(=O)O"
        token = extract_maximal_token(text, SMILES)
        assert token is not None and token.value == text

    def test_empty_input(self):
        assert extract_maximal_token("", SMILES) is None

    def test_unbalanced_brackets_shrink_to_balanced_core(self):
        # Oracle-derived: longest balanced substring inside the noisy run.
        text = "noise ((( CC(=O)Oc1ccccc1 ))) more"
        token = extract_maximal_token(text, SMILES)
        assert token is not None
        assert token.value == "CC(=O)Oc1ccccc1"
        assert brute_force_extract(text, SMILES) == (token.value, *token.span)

    def test_pdb_id_window(self):
        token = extract_maximal_token("I will fetch 1CRN for you now.", PDB_ID)
        assert token is not None and token.value == "1CRN"

    def test_pdb_id_requires_leading_digit(self):
        assert extract_maximal_token("fetch ABCD today", PDB_ID) is None

    def test_min_length_gate(self):
        assert extract_maximal_token("DNA and CRISPR", AMINO_ACID_SEQ) is None

    def test_code_block_from_fences(self):
        text = "run this:\n```python\nprint('hi')\n```\nthanks"
        token = extract_maximal_token(text, CODE_BLOCK)
        assert token is not None
        assert token.value == "print('hi')"


class TestParseDirective:
    def test_well_formed_envelope(self):
        raw = (
            "<thought>aspirin</thought><action>2D_MOLECULE</action>"
            "<target>CC(=O)Oc1ccccc1C(=O)O</target>"
        )
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        assert env.action == ActionKind.TWO_D_MOLECULE
        assert env.thought == "aspirin"
        assert env.params["target"].value == "CC(=O)Oc1ccccc1C(=O)O"
        assert env.parse_track == "tags_well_formed"

    def test_unescaped_quotes_in_content_recovered(self):
        payload = "CC(=O)Oc1ccccc1C(=O)O"
        raw = (
            f'<thought>he said "render it"</thought><action>2D_MOLECULE</action>'
            f'<target>"{payload}"</target>'
        )
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        assert env.params["target"].value == payload
        # The strict-JSON equivalent of the same payload fails outright.
        broken = '{"thought": "x", "action": "2D_MOLECULE", "target": ""%s""}' % payload
        with pytest.raises(json.JSONDecodeError):
            json.loads(broken)

    def test_both_end_tags_missing_recovers_via_fallback(self):
        env = parse_directive("<action>2D_MOLECULE<target>c1ccccc1O")
        assert isinstance(env, DirectiveEnvelope)
        assert env.action == ActionKind.TWO_D_MOLECULE
        assert env.params["target"].value == "c1ccccc1O"
        assert env.parse_track == "regex_fallback"

    def test_multiline_code_payload(self):
        code = "import math\nfor i in range(3):\n    print(math.sqrt(i))"
        raw = f"<action>RUN_CODE</action><target>{code}</target>"
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        assert env.params["target"].value == code

    def test_docking_two_slots(self):
        raw = (
            "<thought>dock it</thought><action>DOCKING</action>"
            "<target>1ABC</target><ligand>CC(=O)Oc1ccccc1C(=O)O</ligand>"
        )
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        assert env.params["target"].value == "1ABC"
        assert env.params["ligand"].value == "CC(=O)Oc1ccccc1C(=O)O"

    def test_docking_fallback_resolves_both_slots(self):
        raw = "<action>DOCKING<target>1ABC<ligand>CC(=O)Oc1ccccc1C(=O)O"
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        assert env.params["target"].value == "1ABC"
        assert env.params["ligand"].value == "CC(=O)Oc1ccccc1C(=O)O"

    def test_create_tool_slots(self):
        raw = (
            "<action>CREATE_TOOL</action><name>dna_gc_content</name>"
            "<target>```python\nprint('gc')\n```</target>"
        )
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        assert env.params["name"].value == "dna_gc_content"
        assert env.params["target"].value == "print('gc')"

    def test_plain_chat(self):
        env = parse_directive("hello, how are you?")
        assert isinstance(env, DirectiveEnvelope)
        assert env.action == ActionKind.CHAT
        assert env.params == {}

    def test_unfillable_slot_downgrades_with_classified_failure(self):
        result = parse_directive("<action>FOLD_PROTEIN</action> fold something for me")
        assert isinstance(result, ParseFailure)
        assert result.fallback.action == ActionKind.CHAT
        assert result.fallback.downgrade_reason

    def test_missing_tag_still_recovers_from_prose(self):
        # A maximal-extraction consequence: a plain word is a legal SMILES
        # run, so a missing target tag is filled from the prose itself.
        env = parse_directive("<action>2D_MOLECULE</action> depict c1ccccc1O please")
        assert isinstance(env, DirectiveEnvelope)
        assert env.params["target"].value == "c1ccccc1O"

    def test_param_tag_without_keyword_is_classified(self):
        result = parse_directive("<target>CC(=O)Oc1ccccc1C(=O)O</target>")
        assert isinstance(result, ParseFailure)
        assert result.category == FailureCategory.NO_ACTION_KEYWORD

    def test_thought_content_cannot_win_fallback(self):
        raw = "<thought>rendering molecules expertly</thought><action>2D_MOLECULE<target>c1ccccc1O"
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        assert env.params["target"].value == "c1ccccc1O"

    def test_span_fidelity(self):
        raw = "<action>FOLD_PROTEIN</action><target>MKTAYIAKQRQISFVKSHFSRQ</target>"
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        for token in env.params.values():
            assert raw[token.span[0] : token.span[1]] == token.value

    def test_determinism(self):
        raw = '<action>RUN_CODE</action><target>print("hi")\nprint("bye")</target>'
        assert parse_directive(raw) == parse_directive(raw)

    def test_binary_garbage_is_total(self):
        garbage = bytes(range(256)).decode("latin-1") * 4
        result = parse_directive(garbage)
        assert isinstance(result, (DirectiveEnvelope, ParseFailure))

    def test_track_agreement_on_pure_content(self):
        payload = "CC(=O)Oc1ccccc1C(=O)O"
        raw = f"<action>2D_MOLECULE</action><target>{payload}</target>"
        env = parse_directive(raw)
        assert isinstance(env, DirectiveEnvelope)
        fallback_token = extract_maximal_token(payload, SMILES)
        assert fallback_token is not None
        assert env.params["target"].value == fallback_token.value
