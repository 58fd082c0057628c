import random

import pytest

from fgrkit.datasets import starter_fg_vocab_path
from fgrkit.errors import EmptyCorpus, MalformedLine, VersionMismatch
from fgrkit.vocab import (
    load_fg_vocab,
    load_mfg_vocab,
    mine_mfg,
    save_vocab,
    scan_pair_frequencies,
)

from helpers import random_molecule_smiles
from oracles import oracle_merge_sequence


def synthetic_corpus(n: int, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    return [random_molecule_smiles(rng) for _ in range(n)]


class TestFGLoad:
    def test_small_file(self, tmp_path):
        p = tmp_path / "fg.tsv"
        p.write_text("hydroxyl\t[OX2H]\ncarbonyl\t[CX3]=[OX1]\nnitro\t[N+](=[OX1])[OX1-]\n")
        v = load_fg_vocab(p)
        assert v.size == 3
        assert v.names == ["hydroxyl", "carbonyl", "nitro"]

    def test_strict_mode_rejects_recursive(self, tmp_path):
        p = tmp_path / "fg.tsv"
        p.write_text("ok\t[OX2H]\nbad\t[$(C=O)]\n")
        with pytest.raises(MalformedLine) as exc:
            load_fg_vocab(p)
        assert exc.value.lineno == 2

    def test_skip_invalid_reports_line_numbers(self, tmp_path):
        p = tmp_path / "fg.tsv"
        p.write_text("ok\t[OX2H]\nbad\t[$(C=O)]\nalso_ok\tC=O\n")
        v = load_fg_vocab(p, skip_invalid=True)
        assert v.size == 2
        assert [lineno for lineno, _ in v.rejected] == [2]

    def test_comments_and_blanks_ignored(self, tmp_path):
        p = tmp_path / "fg.tsv"
        p.write_text("# comment\n\nhydroxyl\t[OX2H]\n")
        assert load_fg_vocab(p).size == 1

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_fg_vocab("/nonexistent/vocab.tsv")

    def test_starter_vocabulary_loads_clean(self):
        v = load_fg_vocab(starter_fg_vocab_path())
        assert v.size >= 120
        assert v.rejected == []

    def test_indices_stable(self, tmp_path):
        p = tmp_path / "fg.tsv"
        p.write_text("a\tC\nb\tN\nc\tO\n")
        v1, v2 = load_fg_vocab(p), load_fg_vocab(p)
        assert v1.names == v2.names
        assert v1.fingerprint == v2.fingerprint


class TestPairScan:
    def test_simple(self):
        assert scan_pair_frequencies([["C", "C", "O"]]) == {("C", "C"): 1, ("C", "O"): 1}

    def test_overlaps_counted(self):
        assert scan_pair_frequencies([["C", "C", "C"]]) == {("C", "C"): 2}

    def test_order_sensitive(self):
        counts = scan_pair_frequencies([["C", "O"], ["O", "C"]])
        assert counts == {("C", "O"): 1, ("O", "C"): 1}

    def test_empty_errors(self):
        with pytest.raises(EmptyCorpus):
            scan_pair_frequencies([])


class TestMineMFG:
    def test_spec_toy_trace(self):
        v = mine_mfg(["CCO", "CCO", "CCN"], eta=2, mvs=100)
        assert v.merge_log == [(("C", "C"), 3), (("CC", "O"), 2)]
        assert [(e.text, e.frequency) for e in v.merged_entries] == [("CC", 3), ("CCO", 2)]

    def test_unreachable_threshold_gives_initial_alphabet(self):
        corpus = synthetic_corpus(20)
        v = mine_mfg(corpus, eta=10 ** 9, mvs=1000)
        assert v.merged_entries == []
        assert v.n_initial == v.size > 0

    def test_boundary_frequency_equal_eta_merges(self):
        v = mine_mfg(["CC"] * 500, eta=500, mvs=100)
        assert v.merge_log == [(("C", "C"), 500)]

    def test_mvs_caps_size(self):
        corpus = synthetic_corpus(200, seed=3)
        unlimited = mine_mfg(corpus, eta=2, mvs=10 ** 6)
        cap = unlimited.n_initial + 5
        v = mine_mfg(corpus, eta=2, mvs=cap)
        assert v.size == cap
        assert len(v.merged_entries) == 5

    def test_merged_frequencies_at_least_eta(self):
        v = mine_mfg(synthetic_corpus(300, seed=5), eta=4, mvs=10 ** 6)
        assert all(e.frequency >= 4 for e in v.merged_entries)

    def test_initial_entries_precede_merged(self):
        v = mine_mfg(synthetic_corpus(100, seed=8), eta=3, mvs=10 ** 6)
        lengths = [len(e.tokens) for e in v.entries]
        first_merged = next((i for i, n in enumerate(lengths) if n > 1), len(lengths))
        assert all(n == 1 for n in lengths[:first_merged])
        assert all(n > 1 for n in lengths[first_merged:])

    def test_untokenizable_lines_skipped(self):
        v = mine_mfg(["CCO", "not smiles!!", "CCN"], eta=2, mvs=100)
        assert v.skipped_lines == 1

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            mine_mfg(["", "   "], eta=2, mvs=10)

    def test_determinism(self):
        corpus = synthetic_corpus(150, seed=11)
        v1 = mine_mfg(corpus, eta=3, mvs=10 ** 6)
        v2 = mine_mfg(corpus, eta=3, mvs=10 ** 6)
        assert v1 == v2 and v1.merge_log == v2.merge_log

    @pytest.mark.parametrize("eta", [2, 5, 50])
    def test_merge_sequence_matches_recount_oracle(self, eta):
        corpus = synthetic_corpus(250, seed=17)
        v = mine_mfg(corpus, eta=eta, mvs=10 ** 6)
        from fgrkit.chem import tokenize_smiles
        sequences = [tokenize_smiles(s) for s in corpus]
        want = oracle_merge_sequence(sequences, eta, 10 ** 6, v.n_initial)
        assert v.merge_log == want


class TestPersistence:
    def test_round_trip(self, tmp_path):
        v = mine_mfg(synthetic_corpus(50, seed=2), eta=2, mvs=500)
        p = tmp_path / "v.mfg"
        save_vocab(v, p)
        assert load_mfg_vocab(p) == v

    def test_provenance_preserved(self, tmp_path):
        v = mine_mfg(["CCO"] * 10, eta=5, mvs=30000)
        p = tmp_path / "v.mfg"
        save_vocab(v, p)
        loaded = load_mfg_vocab(p)
        assert (loaded.eta, loaded.mvs) == (5, 30000)
        assert loaded.corpus_fingerprint == v.corpus_fingerprint

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "bad.mfg"
        p.write_text("some other file\n")
        with pytest.raises(VersionMismatch):
            load_mfg_vocab(p)

    def test_saved_bytes_deterministic(self, tmp_path):
        corpus = synthetic_corpus(80, seed=4)
        p1, p2 = tmp_path / "a.mfg", tmp_path / "b.mfg"
        save_vocab(mine_mfg(corpus, eta=2, mvs=1000), p1)
        save_vocab(mine_mfg(corpus, eta=2, mvs=1000), p2)
        assert p1.read_bytes() == p2.read_bytes()
