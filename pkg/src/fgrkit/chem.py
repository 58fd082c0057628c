"""Molecular graphs from SMILES: tokenizer, parser, rings, scaffolds.

The grammar subset is: organic-subset atoms (B C N O P S F Cl Br I and the
aromatic forms b c n o p s), bracket atoms with isotope / explicit H /
charge / atom class, ring closures 1-9 and %nn, branches, bond symbols
``- = # : / \\``, and dot-disconnected components. Stereo markers and
isotopes are consumed and recorded but ignored downstream. Aromaticity is
taken from the input (lowercase symbols); no perception or kekulization.

Implicit hydrogens follow a fixed valence table (see ``elements``); an
aromatic atom's available valence is reduced by one per aromatic bond pair.
Inputs whose sigma-bond count exceeds the table valence raise
``ValenceOverflow`` rather than being silently patched.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .elements import (
    AROMATIC_OK,
    ORGANIC_SUBSET,
    STANDARD_VALENCES,
    ATOMIC_NUMBERS,
)
from .errors import (
    CanonicalizationBudgetExceeded,
    ParseError,
    UnbalancedParenthesis,
    UnbalancedRingClosure,
    UnknownAtomSymbol,
    UnterminatedBracketAtom,
    ValenceOverflow,
)

MAX_SMILES_LENGTH = 4096

SINGLE = "single"
DOUBLE = "double"
TRIPLE = "triple"
AROMATIC = "aromatic"

BOND_ORDER_VALUE = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, AROMATIC: 1.5}
_BOND_FROM_CHAR = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC,
                   "/": SINGLE, "\\": SINGLE}
_CHAR_FROM_BOND = {SINGLE: "-", DOUBLE: "=", TRIPLE: "#", AROMATIC: ":"}

# Two-letter organic-subset symbols must be matched before one-letter ones.
_ORGANIC_TOKENS = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I",
                   "b", "c", "n", "o", "p", "s", "*")


@dataclass
class Atom:
    """One heavy atom (or explicit [H]) of a molecular graph."""

    element: str
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int = 0
    implicit_h: int = 0
    in_ring: bool = False
    index: int = -1
    from_bracket: bool = False

    @property
    def total_h(self) -> int:
        return self.explicit_h + self.implicit_h


@dataclass
class Bond:
    """Undirected edge between two atom indices."""

    a: int
    b: int
    order: str = SINGLE
    in_ring: bool = False

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a

    @property
    def pair(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass
class Molecule:
    """Attributed graph parsed from SMILES; the unit all matching works on."""

    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)
    source: str = ""
    stereo_markers: list[tuple[int, str]] = field(default_factory=list)
    _adjacency: list[list[tuple[int, int]]] | None = None
    _rings: list[list[int]] | None = None

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-atom list of (neighbor index, bond index), ascending."""
        if self._adjacency is None:
            adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
            for bi, bond in enumerate(self.bonds):
                adj[bond.a].append((bond.b, bi))
                adj[bond.b].append((bond.a, bi))
            for row in adj:
                row.sort()
            self._adjacency = adj
        return self._adjacency

    def degree(self, idx: int) -> int:
        return len(self.adjacency()[idx])

    def bond_between(self, i: int, j: int) -> Bond | None:
        for nbr, bi in self.adjacency()[i]:
            if nbr == j:
                return self.bonds[bi]
        return None

    def rings(self) -> list[list[int]]:
        """Cached cycle basis; computes in_ring flags on first use."""
        if self._rings is None:
            self._rings = perceive_rings(self)
        return self._rings

    def components(self) -> list[list[int]]:
        """Connected components as sorted atom-index lists."""
        seen = [False] * self.num_atoms
        comps = []
        adj = self.adjacency()
        for start in range(self.num_atoms):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v, _ in adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps


# ---------------------------------------------------------------------------
# scanning / tokenizing
# ---------------------------------------------------------------------------

_KIND_ATOM = "atom"
_KIND_BRACKET = "bracket"
_KIND_BOND = "bond"
_KIND_OPEN = "open"
_KIND_CLOSE = "close"
_KIND_RING = "ring"
_KIND_DOT = "dot"


def _scan(text: str) -> list[tuple[str, str, int]]:
    """Lossless scan into (kind, token, offset) triples."""
    out: list[tuple[str, str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            j = text.find("]", i + 1)
            if j < 0:
                raise UnterminatedBracketAtom("unterminated bracket atom", i, text)
            out.append((_KIND_BRACKET, text[i:j + 1], i))
            i = j + 1
        elif ch == "%":
            if i + 2 >= n or not (text[i + 1].isdigit() and text[i + 2].isdigit()):
                raise UnbalancedRingClosure("malformed %nn ring closure", i, text)
            out.append((_KIND_RING, text[i:i + 3], i))
            i += 3
        elif ch.isdigit():
            out.append((_KIND_RING, ch, i))
            i += 1
        elif ch in "-=#:/\\":
            out.append((_KIND_BOND, ch, i))
            i += 1
        elif ch == "(":
            out.append((_KIND_OPEN, ch, i))
            i += 1
        elif ch == ")":
            out.append((_KIND_CLOSE, ch, i))
            i += 1
        elif ch == ".":
            out.append((_KIND_DOT, ch, i))
            i += 1
        else:
            for sym in _ORGANIC_TOKENS:
                if text.startswith(sym, i):
                    out.append((_KIND_ATOM, sym, i))
                    i += len(sym)
                    break
            else:
                raise UnknownAtomSymbol(f"unrecognized character {ch!r}", i, text)
    return out


def tokenize_smiles(text: str) -> list[str]:
    """Lossless token list: ``"".join(tokens) == text``.

    Cl/Br come out as single tokens, bracket atoms come out whole.
    """
    if not text:
        raise ParseError("empty SMILES", 0, text)
    return [tok for _, tok, _ in _scan(text)]


# ---------------------------------------------------------------------------
# bracket atom parsing
# ---------------------------------------------------------------------------

def _parse_bracket(token: str, offset: int, text: str) -> tuple[Atom, list[tuple[int, str]]]:
    """Parse one ``[...]`` token into an Atom plus stereo records."""
    body = token[1:-1]
    if not body:
        raise UnknownAtomSymbol("empty bracket atom", offset, text)
    i = 0
    stereo: list[tuple[int, str]] = []
    # isotope: parsed and discarded (Atom carries no isotope field)
    while i < len(body) and body[i].isdigit():
        i += 1
    if i >= len(body):
        raise UnknownAtomSymbol("bracket atom without element", offset, text)
    # element symbol
    aromatic = False
    if body[i] == "*":
        element = "*"
        i += 1
    elif body[i].islower():
        element = body[i].upper()
        if element not in AROMATIC_OK:
            raise UnknownAtomSymbol(f"aromatic form not allowed for {body[i]!r}",
                                    offset, text)
        aromatic = True
        i += 1
    else:
        if i + 1 < len(body) and body[i + 1].islower() and body[i:i + 2] in ATOMIC_NUMBERS:
            element = body[i:i + 2]
            i += 2
        else:
            element = body[i]
            i += 1
        if element not in ATOMIC_NUMBERS:
            raise UnknownAtomSymbol(f"unknown element {element!r}", offset, text)
    # chirality: consumed, recorded, ignored downstream
    while i < len(body) and body[i] == "@":
        mark = "@@" if body[i:i + 2] == "@@" else "@"
        stereo.append((offset + 1 + i, mark))
        i += len(mark)
    # explicit hydrogen count
    hcount = 0
    if i < len(body) and body[i] == "H":
        i += 1
        num = ""
        while i < len(body) and body[i].isdigit():
            num += body[i]
            i += 1
        hcount = int(num) if num else 1
    # formal charge
    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        symbol = body[i]
        i += 1
        num = ""
        while i < len(body) and body[i].isdigit():
            num += body[i]
            i += 1
        if num:
            charge = sign * int(num)
        else:
            charge = sign
            while i < len(body) and body[i] == symbol:
                charge += sign
                i += 1
    # atom class: parsed and discarded
    if i < len(body) and body[i] == ":":
        i += 1
        if i >= len(body) or not body[i].isdigit():
            raise UnknownAtomSymbol("malformed atom class", offset, text)
        while i < len(body) and body[i].isdigit():
            i += 1
    if i != len(body):
        raise UnknownAtomSymbol(f"trailing bracket content {body[i:]!r}", offset, text)
    atom = Atom(element=element, aromatic=aromatic, formal_charge=charge,
                explicit_h=hcount, from_bracket=True)
    return atom, stereo


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_smiles(text: str, max_length: int = MAX_SMILES_LENGTH) -> Molecule:
    """Parse a SMILES string into a Molecule with implicit hydrogens assigned.

    Raises UnbalancedRingClosure, UnbalancedParenthesis, UnknownAtomSymbol,
    ValenceOverflow or UnterminatedBracketAtom, each carrying the 0-based
    byte offset of the offending character.
    """
    if not text:
        raise ParseError("empty SMILES", 0, text)
    if len(text) > max_length:
        raise ParseError(f"SMILES longer than {max_length} characters", max_length, text)

    mol = Molecule(source=text)
    anchor: int | None = None
    pending_bond: str | None = None
    pending_offset = 0
    branch_stack: list[int] = []
    open_rings: dict[str, tuple[int, str | None, int]] = {}
    bond_pairs: set[tuple[int, int]] = set()

    def add_bond(i: int, j: int, order: str | None, offset: int) -> None:
        if i == j:
            raise UnbalancedRingClosure("ring bond to the same atom", offset, text)
        pair = (i, j) if i < j else (j, i)
        if pair in bond_pairs:
            raise UnbalancedRingClosure("duplicate bond between atoms", offset, text)
        if order is None:
            both_aromatic = mol.atoms[i].aromatic and mol.atoms[j].aromatic
            order = AROMATIC if both_aromatic else SINGLE
        bond_pairs.add(pair)
        mol.bonds.append(Bond(a=i, b=j, order=order))

    for kind, token, offset in _scan(text):
        if kind in (_KIND_ATOM, _KIND_BRACKET):
            if kind == _KIND_BRACKET:
                atom, stereo = _parse_bracket(token, offset, text)
                mol.stereo_markers.extend(stereo)
            else:
                if token == "*":
                    atom = Atom(element="*")
                else:
                    element = token.upper() if token.islower() else token
                    if token.islower() and element not in AROMATIC_OK:
                        raise UnknownAtomSymbol(
                            f"aromatic form not allowed for {token!r}", offset, text)
                    atom = Atom(element=element, aromatic=token.islower())
            atom.index = len(mol.atoms)
            mol.atoms.append(atom)
            if anchor is not None:
                add_bond(anchor, atom.index, pending_bond, offset)
            elif pending_bond is not None:
                raise ParseError("bond symbol with no preceding atom",
                                 pending_offset, text)
            pending_bond = None
            anchor = atom.index
        elif kind == _KIND_BOND:
            if pending_bond is not None:
                raise ParseError("two consecutive bond symbols", offset, text)
            if token in "/\\":
                mol.stereo_markers.append((offset, token))
            pending_bond = _BOND_FROM_CHAR[token]
            pending_offset = offset
        elif kind == _KIND_RING:
            if anchor is None:
                raise UnbalancedRingClosure("ring closure before any atom", offset, text)
            if token in open_rings:
                partner, opened_bond, opened_at = open_rings.pop(token)
                if pending_bond is not None and opened_bond is not None \
                        and pending_bond != opened_bond:
                    raise UnbalancedRingClosure(
                        "conflicting bond orders on ring closure", offset, text)
                add_bond(partner, anchor, pending_bond or opened_bond, offset)
                pending_bond = None
            else:
                open_rings[token] = (anchor, pending_bond, offset)
                pending_bond = None
        elif kind == _KIND_OPEN:
            if anchor is None:
                raise UnbalancedParenthesis("branch before any atom", offset, text)
            if pending_bond is not None:
                raise ParseError("bond symbol before branch open", offset, text)
            branch_stack.append(anchor)
        elif kind == _KIND_CLOSE:
            if not branch_stack:
                raise UnbalancedParenthesis("unmatched ')'", offset, text)
            if pending_bond is not None:
                raise ParseError("dangling bond before ')'", offset, text)
            anchor = branch_stack.pop()
        elif kind == _KIND_DOT:
            if pending_bond is not None:
                raise ParseError("bond symbol before '.'", pending_offset, text)
            anchor = None

    if open_rings:
        first = min(off for (_, _, off) in open_rings.values())
        raise UnbalancedRingClosure("unclosed ring closure", first, text)
    if branch_stack:
        raise UnbalancedParenthesis("unclosed '('", len(text), text)
    if pending_bond is not None:
        raise ParseError("dangling bond at end of input", pending_offset, text)

    _assign_implicit_hydrogens(mol, text)
    return mol


def _sigma_and_fill(mol: Molecule, idx: int) -> tuple[int, int]:
    """(sigma bond count, H-fill bond count) for one atom.

    Sigma counts aromatic bonds as 1 and is checked against the largest
    table valence. The fill count charges an extra valence per aromatic
    bond pair and is subtracted from the smallest table valence.
    """
    n_arom = 0
    others = 0
    for _, bi in mol.adjacency()[idx]:
        order = mol.bonds[bi].order
        if order == AROMATIC:
            n_arom += 1
        else:
            others += int(BOND_ORDER_VALUE[order])
    sigma = n_arom + others
    fill = n_arom + n_arom // 2 + others
    return sigma, fill


def _assign_implicit_hydrogens(mol: Molecule, text: str) -> None:
    for atom in mol.atoms:
        valences = STANDARD_VALENCES.get(atom.element)
        sigma, fill = _sigma_and_fill(mol, atom.index)
        if atom.from_bracket or atom.element == "*":
            atom.implicit_h = 0
            if (valences is not None and atom.formal_charge == 0
                    and sigma + atom.explicit_h > max(valences)):
                raise ValenceOverflow(
                    f"{atom.element} with {sigma} bonds + {atom.explicit_h}H "
                    f"exceeds valence {max(valences)}", _atom_offset(atom, mol), text)
            continue
        assert valences is not None  # organic subset is always in the table
        if sigma > max(valences):
            raise ValenceOverflow(
                f"{atom.element} with bond order sum {sigma} exceeds valence "
                f"{max(valences)}", _atom_offset(atom, mol), text)
        if atom.aromatic:
            atom.implicit_h = max(0, min(valences) - fill)
        else:
            # fill can exceed sigma only via explicit aromatic bonds on an
            # uppercase atom; surface that as an overflow, never a crash
            chosen = next((v for v in valences if v >= fill), None)
            if chosen is None:
                raise ValenceOverflow(
                    f"{atom.element} with effective bond order {fill} exceeds "
                    f"valence {max(valences)}", _atom_offset(atom, mol), text)
            atom.implicit_h = chosen - fill


def _atom_offset(atom: Atom, mol: Molecule) -> int:
    """Best-effort offset of an atom in the source text (token re-scan)."""
    try:
        count = -1
        for kind, _tok, off in _scan(mol.source):
            if kind in (_KIND_ATOM, _KIND_BRACKET):
                count += 1
                if count == atom.index:
                    return off
    except ParseError:
        pass
    return 0


# ---------------------------------------------------------------------------
# rings
# ---------------------------------------------------------------------------

def perceive_rings(mol: Molecule) -> list[list[int]]:
    """Cycle basis via DFS back edges; sets in_ring flags as a side effect.

    Basis size equals bonds - atoms + components.
    """
    adj = mol.adjacency()
    n = mol.num_atoms
    parent_atom = [-1] * n
    parent_bond = [-1] * n
    visited = [False] * n
    cycles: list[list[int]] = []
    ring_bond_idx: set[int] = set()

    for root in range(n):
        if visited[root]:
            continue
        visited[root] = True
        stack = [(root, iter(adj[root]))]
        order = {root: 0}
        while stack:
            u, it = stack[-1]
            advanced = False
            for v, bi in it:
                if bi == parent_bond[u]:
                    continue
                if not visited[v]:
                    visited[v] = True
                    parent_atom[v] = u
                    parent_bond[v] = bi
                    order[v] = len(order)
                    stack.append((v, iter(adj[v])))
                    advanced = True
                    break
                if order.get(v, -1) <= order[u] and bi not in ring_bond_idx:
                    # back edge u -> v: cycle = v .. u tree path + (u, v)
                    path = [u]
                    w = u
                    while w != v:
                        w = parent_atom[w]
                        path.append(w)
                    cycles.append(list(reversed(path)))
                    ring_bond_idx.add(bi)
            if not advanced:
                stack.pop()

    ring_bonds: set[tuple[int, int]] = set()
    for cyc in cycles:
        for k in range(len(cyc)):
            i, j = cyc[k], cyc[(k + 1) % len(cyc)]
            ring_bonds.add((i, j) if i < j else (j, i))
    for bond in mol.bonds:
        bond.in_ring = bond.pair in ring_bonds
    for atom in mol.atoms:
        atom.in_ring = False
    for bond in mol.bonds:
        if bond.in_ring:
            mol.atoms[bond.a].in_ring = True
            mol.atoms[bond.b].in_ring = True
    mol._rings = cycles
    return cycles


# ---------------------------------------------------------------------------
# scaffolds
# ---------------------------------------------------------------------------

def murcko_scaffold(mol: Molecule) -> Molecule:
    """Ring systems plus inter-ring linkers; side chains pruned.

    Iteratively removes non-ring atoms of degree <= 1. Acyclic molecules
    come back as the empty sentinel (a molecule with no atoms). Implicit
    hydrogens of surviving non-bracket atoms are recomputed for the pruned
    environment so that e.g. toluene's scaffold equals benzene.
    """
    mol.rings()  # ensure in_ring flags
    alive = [True] * mol.num_atoms
    adj = mol.adjacency()
    changed = True
    while changed:
        changed = False
        for i, atom in enumerate(mol.atoms):
            if not alive[i] or atom.in_ring:
                continue
            deg = sum(1 for v, _ in adj[i] if alive[v])
            if deg <= 1:
                alive[i] = False
                changed = True

    keep = [i for i in range(mol.num_atoms) if alive[i]]
    return _induced_subgraph(mol, keep)


def _induced_subgraph(mol: Molecule, keep: list[int]) -> Molecule:
    remap = {old: new for new, old in enumerate(keep)}
    sub = Molecule(source="")
    for old in keep:
        a = mol.atoms[old]
        sub.atoms.append(Atom(element=a.element, aromatic=a.aromatic,
                              formal_charge=a.formal_charge,
                              explicit_h=a.explicit_h, index=remap[old],
                              from_bracket=a.from_bracket))
    for bond in mol.bonds:
        if bond.a in remap and bond.b in remap:
            sub.bonds.append(Bond(a=remap[bond.a], b=remap[bond.b], order=bond.order))
    if sub.atoms:
        for atom in sub.atoms:
            if atom.from_bracket or atom.element == "*":
                atom.implicit_h = 0
                continue
            valences = STANDARD_VALENCES[atom.element]
            _, fill = _sigma_and_fill(sub, atom.index)
            if atom.aromatic:
                atom.implicit_h = max(0, min(valences) - fill)
            else:
                chosen = next((v for v in valences if v >= fill), max(valences))
                atom.implicit_h = max(0, chosen - fill)
        sub.rings()
    return sub


# ---------------------------------------------------------------------------
# canonical emission and scaffold keys
# ---------------------------------------------------------------------------

SCAFFOLD_KEY_ATOM_CUTOFF = 128
_WALK_BUDGET = 20000


def _refined_ranks(mol: Molecule, atoms: list[int]) -> dict[int, int]:
    """Iterative neighborhood refinement (Morgan-style) ranks, 0-based."""
    adj = mol.adjacency()
    atom_set = set(atoms)
    inv = {i: (mol.atoms[i].element, mol.atoms[i].aromatic,
               mol.atoms[i].formal_charge, mol.atoms[i].total_h,
               sum(1 for v, _ in adj[i] if v in atom_set))
           for i in atoms}
    ranks = _ranks_from_keys(inv)
    while True:
        new_keys = {}
        for i in atoms:
            nbr = sorted((mol.bonds[bi].order, ranks[v])
                         for v, bi in adj[i] if v in atom_set)
            new_keys[i] = (ranks[i], tuple(nbr))
        new_ranks = _ranks_from_keys(new_keys)
        if len(set(new_ranks.values())) == len(set(ranks.values())):
            return new_ranks
        ranks = new_ranks


def _ranks_from_keys(keys: dict[int, object]) -> dict[int, int]:
    ordered = sorted(set(keys.values()))  # type: ignore[type-var]
    pos = {k: r for r, k in enumerate(ordered)}
    return {i: pos[k] for i, k in keys.items()}


def _atom_token(mol: Molecule, idx: int) -> str:
    """Emission token for one atom, bare when re-parsing reproduces it."""
    atom = mol.atoms[idx]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    if atom.element == "*":
        return "*"
    bare_ok = (atom.element in ORGANIC_SUBSET and atom.formal_charge == 0
               and (not atom.aromatic or atom.element in AROMATIC_OK))
    if bare_ok:
        valences = STANDARD_VALENCES[atom.element]
        _, fill = _sigma_and_fill(mol, idx)
        if atom.aromatic:
            would_get = max(0, min(valences) - fill)
        else:
            chosen = next((v for v in valences if v >= fill), None)
            would_get = None if chosen is None else chosen - fill
        if would_get == atom.total_h:
            return symbol
    h = atom.total_h
    hpart = "" if h == 0 else ("H" if h == 1 else f"H{h}")
    q = atom.formal_charge
    if q == 0:
        qpart = ""
    elif q == 1:
        qpart = "+"
    elif q == -1:
        qpart = "-"
    else:
        qpart = f"{'+' if q > 0 else '-'}{abs(q)}"
    return f"[{symbol}{hpart}{qpart}]"


def _bond_char(mol: Molecule, bond: Bond) -> str:
    """Emitted bond symbol; empty for defaults."""
    a_arom = mol.atoms[bond.a].aromatic and mol.atoms[bond.b].aromatic
    if bond.order == AROMATIC:
        return "" if a_arom else ":"
    if bond.order == SINGLE:
        return "-" if a_arom else ""
    return _CHAR_FROM_BOND[bond.order]


def _tie_orderings(cands: list[int], ranks: dict[int, int]):
    """All orderings of candidate atoms that respect ascending refined rank,
    branching over permutations within equal-rank groups only."""
    if not cands:
        yield []
        return
    groups: list[list[int]] = []
    for v in sorted(cands, key=lambda v: (ranks[v], v)):
        if groups and ranks[groups[-1][0]] == ranks[v]:
            groups[-1].append(v)
        else:
            groups.append([v])
    from itertools import permutations, product
    for combo in product(*(permutations(g) for g in groups)):
        yield [v for g in combo for v in g]


def _component_walks(mol: Molecule, comp_set: set[int], ranks: dict[int, int],
                     start: int, budget: list[int]):
    """Enumerate DFS walks of one component from a fixed start atom.

    Yields (visit_order, tree_children, ring_edges) per walk. Walk state is
    mutated in place and undone by backtracking, so consumers must copy.
    The budget counts atom visits across the whole enumeration; it depends
    only on the graph, never on results so far, which keeps exhaustion (and
    therefore the hash fallback) isomorphism-invariant.
    """
    adj = mol.adjacency()
    visit_order: list[int] = []
    visit_pos: dict[int, int] = {}
    children: dict[int, list[int]] = {}
    ring_edges: list[tuple[int, int]] = []

    def explore_atom(v: int, parent: int, cont):
        budget[0] -= 1
        if budget[0] < 0:
            raise CanonicalizationBudgetExceeded(
                "walk budget exhausted")
        visit_pos[v] = len(visit_order)
        visit_order.append(v)
        children[v] = []
        added = []
        for w, _ in adj[v]:
            if w in comp_set and w in visit_pos and w != parent:
                edge = (w, v)
                ring_edges.append(edge)
                added.append(edge)
        cands = [w for w, _ in adj[v] if w in comp_set and w not in visit_pos]
        for ordering in _tie_orderings(cands, ranks):
            yield from _process(v, ordering, 0, cont)
        for edge in added:
            ring_edges.remove(edge)
        del children[v]
        visit_order.pop()
        del visit_pos[v]

    def _process(u: int, ordering: list[int], k: int, cont):
        if k == len(ordering):
            yield from cont()
            return
        v = ordering[k]
        if v in visit_pos:
            # already reached through an earlier sibling subtree; the edge
            # was recorded as a ring edge when v was visited
            yield from _process(u, ordering, k + 1, cont)
            return
        children[u].append(v)
        yield from explore_atom(v, u, lambda: _process(u, ordering, k + 1, cont))
        children[u].pop()

    def finish():
        if len(visit_order) == len(comp_set):
            yield (list(visit_order),
                   {k: list(v) for k, v in children.items()},
                   list(ring_edges))

    yield from explore_atom(start, -1, finish)


def _emit(mol: Molecule, visit_order: list[int], tree_children: dict[int, list[int]],
          ring_edges: list[tuple[int, int]], tokens: dict[int, str]) -> str:
    """Render one completed walk as a SMILES string."""
    visit_pos = {a: i for i, a in enumerate(visit_order)}
    # ring digits open at the first-visited endpoint, ordered by partner visit
    opens: dict[int, list[int]] = {}
    for a, b in ring_edges:
        first, second = (a, b) if visit_pos[a] < visit_pos[b] else (b, a)
        opens.setdefault(first, []).append(second)
    for first in opens:
        opens[first].sort(key=lambda p: visit_pos[p])

    pending_close: dict[int, list[int]] = {}
    in_use: set[int] = set()

    def next_digit() -> int:
        d = 1
        while d in in_use:
            d += 1
        return d

    def digit_str(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    out: list[str] = []

    def emit_atom(u: int) -> None:
        out.append(tokens[u])
        for partner in opens.get(u, ()):
            d = next_digit()
            in_use.add(d)
            bond = mol.bond_between(u, partner)
            assert bond is not None
            out.append(_bond_char(mol, bond) + digit_str(d))
            pending_close.setdefault(partner, []).append(d)
        for d in pending_close.pop(u, ()):
            out.append(digit_str(d))
            in_use.discard(d)
        kids = tree_children.get(u, [])
        for ci, c in enumerate(kids):
            bond = mol.bond_between(u, c)
            assert bond is not None
            piece = _bond_char(mol, bond)
            if ci < len(kids) - 1:
                out.append("(" + piece)
                emit_atom(c)
                out.append(")")
            else:
                out.append(piece)
                emit_atom(c)

    emit_atom(visit_order[0])
    return "".join(out)


def _best_component_emission(mol: Molecule, comp: list[int],
                             budget: list[int]) -> str:
    """Lexicographically minimal emission of one connected component."""
    comp_set = set(comp)
    ranks = _refined_ranks(mol, comp)
    tokens = {i: _atom_token(mol, i) for i in comp}
    min_token = min(tokens[i] for i in comp)
    starts = [i for _, i in sorted((ranks[i], i) for i in comp
                                   if tokens[i] == min_token)]
    best: str | None = None
    for start in starts:
        for walk in _component_walks(mol, comp_set, ranks, start, budget):
            cand = _emit(mol, *walk, tokens)
            if best is None or cand < best:
                best = cand
    assert best is not None
    return best


def canonical_smiles(mol: Molecule, walk_budget: int = _WALK_BUDGET) -> str:
    """Lexicographically minimal DFS emission over all start atoms.

    Components are canonicalized independently and joined sorted with '.'.
    Raises CanonicalizationBudgetExceeded when the tie-branch search
    would exceed its deterministic budget; scaffold_key falls back to a
    hash key then.
    """
    if mol.num_atoms == 0:
        return ""
    budget = [walk_budget]
    pieces = [_best_component_emission(mol, comp, budget)
              for comp in mol.components()]
    return ".".join(sorted(pieces))


def _invariant_hash_key(mol: Molecule) -> str:
    """Isomorphism-invariant fallback key for over-budget molecules."""
    parts = []
    for comp in sorted(mol.components(), key=len):
        ranks = _refined_ranks(mol, comp)
        adj = mol.adjacency()
        rows = sorted(
            (mol.atoms[i].element, mol.atoms[i].aromatic, mol.atoms[i].formal_charge,
             mol.atoms[i].total_h, ranks[i],
             tuple(sorted((mol.bonds[bi].order, ranks[v]) for v, bi in adj[i]
                          if v in set(comp))))
            for i in comp)
        parts.append(repr(rows))
    digest = hashlib.sha256("|".join(sorted(parts)).encode()).hexdigest()
    return f"invhash:{digest}"


def scaffold_key(mol: Molecule) -> str:
    """Deterministic isomorphism-invariant key (canonical emission).

    Empty molecules map to "". Molecules above the atom cutoff, or whose
    canonical search exceeds its budget, fall back to an invariant hash.
    """
    if mol.num_atoms == 0:
        return ""
    if mol.num_atoms > SCAFFOLD_KEY_ATOM_CUTOFF:
        return _invariant_hash_key(mol)
    try:
        return canonical_smiles(mol)
    except CanonicalizationBudgetExceeded:
        return _invariant_hash_key(mol)
