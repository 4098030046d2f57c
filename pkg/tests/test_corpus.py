"""Corpus model: parsing, CVE extraction, round trips, and ID validation."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from attack2cve.corpus import (
    DuplicateEntryError,
    EntryId,
    EntryKind,
    detect_kind,
    extract_cve_ids,
    parse_corpus,
    serialize_corpus,
)

from conftest import record


class TestParseCorpus:
    def test_empty_input(self):
        corpus = parse_corpus([])
        assert len(corpus) == 0
        assert all(v == 0 for v in corpus.counts().values())

    def test_chain_fixture_counts(self, chain_corpus):
        counts = chain_corpus.counts()
        assert counts[EntryKind.TECHNIQUE] == 1
        assert counts[EntryKind.ATTACK_PATTERN] == 1
        assert counts[EntryKind.WEAKNESS] == 1
        assert counts[EntryKind.VULNERABILITY] == 1

    def test_duplicate_id_rejects_load(self):
        lines = [record("Weakness", "CWE-1", "a"), record("Weakness", "CWE-1", "b")]
        with pytest.raises(DuplicateEntryError, match="CWE-1"):
            parse_corpus(lines)

    def test_unknown_kind_skipped_with_line_number(self):
        lines = [record("Weakness", "CWE-1", "a"), record("Gadget", "X-1", "b")]
        corpus = parse_corpus(lines)
        assert len(corpus) == 1
        assert corpus.issues and corpus.issues[0].line_no == 2

    def test_malformed_json_reported(self):
        corpus = parse_corpus(['{"kind": "Weakness"', record("Weakness", "CWE-2", "x")])
        assert len(corpus) == 1
        assert corpus.issues[0].line_no == 1
        assert "JSON" in corpus.issues[0].message

    def test_self_link_and_duplicate_links_dropped(self):
        lines = [record("Weakness", "CWE-3", "x", ["CWE-3", "CVE-2020-1000", "CVE-2020-1000"])]
        corpus = parse_corpus(lines)
        entry = next(iter(corpus.entries.values()))
        assert [l.raw_id for l in entry.explicit_links] == ["CVE-2020-1000"]

    def test_link_with_unknown_prefix_skipped(self):
        corpus = parse_corpus([record("Weakness", "CWE-4", "x", ["???"])])
        entry = next(iter(corpus.entries.values()))
        assert entry.explicit_links == []
        assert corpus.issues

    def test_mismatched_kind_prefix_is_record_error(self):
        corpus = parse_corpus([record("Technique", "CWE-5", "x")])
        assert len(corpus) == 0
        assert corpus.issues


class TestExtractCveIds:
    def test_table_chain_text(self):
        text = "The Simple Tooltips WordPress plugin before 2.1.4 ... CVE-2022-4826"
        assert [e.raw_id for e in extract_cve_ids(text)] == ["CVE-2022-4826"]

    def test_empty_text(self):
        assert extract_cve_ids("") == []

    def test_two_ids_in_order(self):
        text = "CVE-2008-1700 and CVE-2020-7218 are explicitly cited"
        assert [e.raw_id for e in extract_cve_ids(text)] == ["CVE-2008-1700", "CVE-2020-7218"]

    def test_case_insensitive_prefix_normalized(self):
        assert [e.raw_id for e in extract_cve_ids("cve-2019-0001 hit")] == ["CVE-2019-0001"]

    def test_duplicates_removed_first_occurrence(self):
        ids = extract_cve_ids("CVE-2020-7218, CVE-2008-1700, CVE-2020-7218")
        assert [e.raw_id for e in ids] == ["CVE-2020-7218", "CVE-2008-1700"]

    def test_digit_count_bounds(self):
        assert extract_cve_ids("CVE-2020-123") == []
        assert extract_cve_ids("CVE-2020-12345678") == []
        assert [e.raw_id for e in extract_cve_ids("CVE-2005-1205")] == ["CVE-2005-1205"]
        assert [e.raw_id for e in extract_cve_ids("CVE-2024-1234567")] == ["CVE-2024-1234567"]

    @given(st.text(), st.text())
    def test_concatenation_superset(self, a, b):
        combined = {e.raw_id for e in extract_cve_ids(a + " " + b)}
        parts = {e.raw_id for e in extract_cve_ids(a)} | {e.raw_id for e in extract_cve_ids(b)}
        assert parts <= combined


class TestEntryId:
    def test_empty_id_rejected(self):
        with pytest.raises(ValueError):
            EntryId(EntryKind.WEAKNESS, "")

    def test_bad_cve_grammar_rejected(self):
        with pytest.raises(ValueError):
            EntryId(EntryKind.VULNERABILITY, "CVE-123")

    def test_prefix_kind_consistency(self):
        with pytest.raises(ValueError):
            EntryId(EntryKind.TECHNIQUE, "CAPEC-38")

    def test_detect_kind_prefixes(self):
        assert detect_kind("T1574.007") is EntryKind.TECHNIQUE
        assert detect_kind("TA0001") is EntryKind.TACTIC
        assert detect_kind("CAPEC-38") is EntryKind.ATTACK_PATTERN
        assert detect_kind("CWE-427") is EntryKind.WEAKNESS
        assert detect_kind("CVE-2022-4826") is EntryKind.VULNERABILITY
        assert detect_kind("NEWS-0001") is EntryKind.NEWS_REPORT
        assert detect_kind("some procedure") is None


class TestRoundTrip:
    def test_chain_fixture_round_trip(self, chain_corpus):
        again = parse_corpus(serialize_corpus(chain_corpus))
        assert again == chain_corpus

    def test_round_trip_preserves_clean_text(self, chain_corpus):
        for entry in chain_corpus.entries.values():
            entry.clean_text = entry.raw_text.replace(",", "")
        again = parse_corpus(serialize_corpus(chain_corpus))
        assert again == chain_corpus

    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=9999),
                st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=80),
            ),
            max_size=10,
            unique_by=lambda t: t[0],
        )
    )
    def test_round_trip_random_weakness_corpora(self, rows):
        corpus = parse_corpus(
            record("Weakness", f"CWE-{i}", text) for i, text in rows
        )
        assert parse_corpus(serialize_corpus(corpus)) == corpus


class TestNewsReports:
    def test_mentions_derived_in_first_order(self):
        body = "Exploit of CVE-2020-7218 follows CVE-2008-1700 then CVE-2020-7218 again"
        corpus = parse_corpus([record("NewsReport", "NEWS-0001", body)])
        reports = corpus.news_reports()
        assert len(reports) == 1
        assert [c.raw_id for c in reports[0].mentioned_cves] == [
            "CVE-2020-7218",
            "CVE-2008-1700",
        ]

    def test_no_mentions(self):
        corpus = parse_corpus([record("NewsReport", "NEWS-0002", "no identifiers here")])
        assert corpus.news_reports()[0].mentioned_cves == []
