import random

import pytest

from fgrkit.chem import (
    AROMATIC,
    SINGLE,
    Molecule,
    canonical_smiles,
    murcko_scaffold,
    parse_smiles,
    perceive_rings,
    scaffold_key,
    tokenize_smiles,
)
from fgrkit.errors import (
    ParseError,
    UnbalancedParenthesis,
    UnbalancedRingClosure,
    UnknownAtomSymbol,
    UnterminatedBracketAtom,
    ValenceOverflow,
)

from helpers import graph_summary, random_molecule_smiles, relabeled_copy
from oracles import oracle_isomorphic


class TestTokenizer:
    def test_simple_chain(self):
        assert tokenize_smiles("CCO") == ["C", "C", "O"]

    def test_two_letter_symbols(self):
        assert tokenize_smiles("CCl") == ["C", "Cl"]
        assert tokenize_smiles("BrCBr") == ["Br", "C", "Br"]

    def test_bracket_atom_single_token(self):
        assert tokenize_smiles("C(=O)[O-]") == ["C", "(", "=", "O", ")", "[O-]"]

    def test_percent_ring_closure(self):
        assert tokenize_smiles("C%12CC%12") == ["C", "%12", "C", "C", "%12"]

    def test_round_trip_identity(self):
        for s in ["CCO", "c1ccccc1", "C(=O)[O-]", "CC(C)(C)c1ccccc1",
                  "[Na+].[O-]S(=O)(=O)c1ccccc1", "C/C=C/C", "N#Cc1ccc(Cl)cc1"]:
            assert "".join(tokenize_smiles(s)) == s

    def test_unterminated_bracket(self):
        with pytest.raises(UnterminatedBracketAtom) as exc:
            tokenize_smiles("C[OH")
        assert exc.value.offset == 1

    def test_unknown_character(self):
        with pytest.raises(UnknownAtomSymbol):
            tokenize_smiles("CXC")


class TestParser:
    def test_ethanol(self):
        m = parse_smiles("CCO")
        assert m.num_atoms == 3
        assert m.num_bonds == 2
        assert all(b.order == SINGLE for b in m.bonds)
        assert m.atoms[2].element == "O"
        assert m.atoms[2].implicit_h == 1

    def test_cyclopropane_ring_closure(self):
        m = parse_smiles("C1CC1")
        assert m.num_atoms == 3
        assert m.num_bonds == 3

    def test_benzene(self):
        m = parse_smiles("c1ccccc1")
        assert m.num_atoms == 6
        assert all(a.aromatic for a in m.atoms)
        assert all(b.order == AROMATIC for b in m.bonds)
        assert all(a.implicit_h == 1 for a in m.atoms)

    def test_charge_and_explicit_h(self):
        m = parse_smiles("[NH4+]")
        atom = m.atoms[0]
        assert atom.formal_charge == 1
        assert atom.explicit_h == 4
        assert atom.implicit_h == 0

    def test_double_minus_charge(self):
        assert parse_smiles("[O--]").atoms[0].formal_charge == -2
        assert parse_smiles("[O-2]").atoms[0].formal_charge == -2

    def test_isotope_and_class_consumed(self):
        m = parse_smiles("[13CH4]")
        assert m.atoms[0].element == "C"
        assert m.atoms[0].explicit_h == 4

    def test_stereo_recorded_and_ignored(self):
        m = parse_smiles("C/C=C/C")
        assert m.num_bonds == 3
        assert len(m.stereo_markers) == 2
        assert {mk for _, mk in m.stereo_markers} == {"/"}

    def test_dot_components(self):
        m = parse_smiles("CC.O")
        assert m.num_atoms == 3
        assert m.num_bonds == 1
        assert len(m.components()) == 2

    def test_hypervalent_sulfur(self):
        m = parse_smiles("CS(=O)(=O)C")  # S uses valence 6
        s = m.atoms[1]
        assert s.element == "S"
        assert s.implicit_h == 0

    def test_errors_carry_offsets(self):
        with pytest.raises(UnbalancedRingClosure) as exc:
            parse_smiles("C1CC")
        assert exc.value.offset == 1
        with pytest.raises(UnbalancedParenthesis) as exc:
            parse_smiles("C(CC")
        assert exc.value.offset == 4
        with pytest.raises(UnbalancedParenthesis):
            parse_smiles("CC)C")
        with pytest.raises(UnknownAtomSymbol):
            parse_smiles("C[Xx]C")

    def test_valence_overflow(self):
        with pytest.raises(ValenceOverflow):
            parse_smiles("C(C)(C)(C)(C)C")
        with pytest.raises(ValenceOverflow):
            parse_smiles("O=C(=O)=O")
        # explicit aromatic bonds on an uppercase atom can push the H-fill
        # accounting past the valence table; that must be a named error
        with pytest.raises(ValenceOverflow):
            parse_smiles("C:O:C")

    def test_empty_and_oversize_rejected(self):
        with pytest.raises(ParseError):
            parse_smiles("")
        with pytest.raises(ParseError):
            parse_smiles("C" * 5000)

    def test_nitro_needs_charged_form(self):
        # N is pinned to valence 3, so the neutral pentavalent form overflows
        with pytest.raises(ValenceOverflow):
            parse_smiles("CN(=O)=O")
        m = parse_smiles("C[N+](=O)[O-]")
        assert m.num_atoms == 4


class TestRings:
    def test_benzene_one_ring(self):
        m = parse_smiles("c1ccccc1")
        cycles = perceive_rings(m)
        assert len(cycles) == 1
        assert len(cycles[0]) == 6

    def test_acyclic_no_rings(self):
        assert perceive_rings(parse_smiles("CCO")) == []

    def test_naphthalene_basis(self):
        m = parse_smiles("c1ccc2ccccc2c1")
        cycles = perceive_rings(m)
        assert len(cycles) == m.num_bonds - m.num_atoms + 1 == 2
        assert sum(a.in_ring for a in m.atoms) == 10

    def test_basis_size_formula_random(self):
        rng = random.Random(7)
        for _ in range(50):
            m = parse_smiles(random_molecule_smiles(rng))
            cycles = perceive_rings(m)
            assert len(cycles) == m.num_bonds - m.num_atoms + len(m.components())

    def test_spiro_and_disconnected(self):
        m = parse_smiles("C1CC12CC2.C1CC1")
        cycles = perceive_rings(m)
        assert len(cycles) == m.num_bonds - m.num_atoms + len(m.components()) == 3


class TestScaffold:
    def test_benzene_is_its_own_scaffold(self):
        m = parse_smiles("c1ccccc1")
        sc = murcko_scaffold(m)
        assert graph_summary(sc) == graph_summary(m)

    def test_toluene_prunes_to_benzene(self):
        sc = murcko_scaffold(parse_smiles("Cc1ccccc1"))
        benzene = parse_smiles("c1ccccc1")
        assert scaffold_key(sc) == scaffold_key(benzene)

    def test_acyclic_gives_empty_sentinel(self):
        sc = murcko_scaffold(parse_smiles("CCO"))
        assert sc.num_atoms == 0
        assert scaffold_key(sc) == ""

    def test_linker_between_rings_kept(self):
        sc = murcko_scaffold(parse_smiles("c1ccccc1CCc1ccccc1"))
        assert sc.num_atoms == 14

    def test_idempotent(self):
        rng = random.Random(13)
        for _ in range(30):
            m = parse_smiles(random_molecule_smiles(rng))
            sc = murcko_scaffold(m)
            sc2 = murcko_scaffold(sc) if sc.num_atoms else sc
            assert scaffold_key(sc) == scaffold_key(sc2)


class TestScaffoldKey:
    def test_benzene_orderings_identical(self):
        keys = {scaffold_key(parse_smiles(s))
                for s in ["c1ccccc1", "c1ccc(cc1)", "c1ccccc1"]}
        # middle form: benzene written with an empty-looking branch ordering
        assert len(keys) == 1

    def test_empty_scaffold_key(self):
        assert scaffold_key(Molecule()) == ""

    def test_relabeling_invariance(self):
        rng = random.Random(29)
        for _ in range(40):
            m = parse_smiles(random_molecule_smiles(rng, max_atoms=12))
            perm_mol = relabeled_copy(m, rng)
            assert scaffold_key(m) == scaffold_key(perm_mol)

    def test_distinct_graphs_distinct_keys(self):
        k1 = scaffold_key(parse_smiles("c1ccccc1"))
        k2 = scaffold_key(parse_smiles("C1CCCCC1"))
        k3 = scaffold_key(parse_smiles("c1ccncc1"))
        assert len({k1, k2, k3}) == 3

    def test_atom_cutoff_hash_fallback_is_invariant(self):
        big = "C" * 130  # above the canonical-emission atom cutoff
        key = scaffold_key(parse_smiles(big))
        assert key.startswith("invhash:")
        rng = random.Random(2)
        perm_key = scaffold_key(relabeled_copy(parse_smiles(big), rng))
        assert perm_key == key

    def test_budget_exhaustion_raises_named_error(self):
        from fgrkit.errors import CanonicalizationBudgetExceeded
        mol = parse_smiles("c1ccc2ccccc2c1")
        with pytest.raises(CanonicalizationBudgetExceeded):
            canonical_smiles(mol, walk_budget=3)

    def test_key_equality_iff_isomorphic(self):
        # soundness and completeness against a brute-force permutation
        # oracle: equal keys <=> isomorphic graphs (single-component, <= 9
        # atoms to keep the oracle tractable)
        pool = ["CCO", "OCC", "CC(=O)O", "OC(C)=O", "C1CC1", "C1CC1C",
                "CC1CC1", "c1ccccc1", "c1ccncc1", "Cc1ccncc1",
                "CCN", "NCC", "CCC", "CC(C)O", "OC(C)C", "CCOC", "COCC",
                "C1CCC1", "C=CC", "CC=C", "C#CC", "CNC", "CN(C)C"]
        mols = []
        for s in pool:
            mol = parse_smiles(s)
            if mol.num_atoms <= 9:
                mols.append(mol)
        for i, a in enumerate(mols):
            for b in mols[i:]:
                same_key = scaffold_key(a) == scaffold_key(b)
                assert same_key == oracle_isomorphic(a, b), (a.source, b.source)


class TestCanonicalEmission:
    ROUND_TRIP_CASES = [
        "CCO", "c1ccccc1", "Cc1ccccc1", "C1CC1", "c1ccc2ccccc2c1",
        "CC(C)(C)c1ccc(O)cc1", "[Na+].[O-]C(=O)C", "C[N+](=O)[O-]",
        "c1ccccc1-c1ccccc1", "O=C(O)c1ccccc1", "C/C=C/C", "N#Cc1ccncc1",
        "CS(=O)(=O)N", "c1cc[nH]c1", "c1ccoc1", "C%12CC%12",
    ]

    @pytest.mark.parametrize("smiles", ROUND_TRIP_CASES)
    def test_parse_emit_parse_isomorphic(self, smiles):
        m = parse_smiles(smiles)
        emitted = canonical_smiles(m)
        m2 = parse_smiles(emitted)
        assert scaffold_key(m) == scaffold_key(m2)
        assert graph_summary(m) == graph_summary(m2)

    def test_random_round_trips(self):
        rng = random.Random(41)
        for _ in range(60):
            m = parse_smiles(random_molecule_smiles(rng))
            m2 = parse_smiles(canonical_smiles(m))
            assert scaffold_key(m) == scaffold_key(m2)
            assert graph_summary(m) == graph_summary(m2)

    def test_emission_is_canonical_across_input_orderings(self):
        variants = ["OC(=O)c1ccccc1", "c1ccccc1C(O)=O", "C(=O)(O)c1ccccc1"]
        emissions = {canonical_smiles(parse_smiles(s)) for s in variants}
        assert len(emissions) == 1
