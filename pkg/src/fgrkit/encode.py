"""Multi-hot molecule encodings and 2D descriptors.

FG bits come from SMARTS matches, MFG bits from contiguous token
subsequences (token-level, not raw bytes, so patterns never match inside a
bracket atom). The combined encoding is the concatenation [FG | MFG]. The
descriptor vector implements a documented 14-slot subset padded with zeros
to a fixed length so downstream shapes stay compatible with larger
descriptor sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .chem import SINGLE, Molecule
from .elements import HALOGENS, MONOISOTOPIC_MASS, atomic_number
from .errors import NonFiniteInput, ShapeMismatch
from .smarts import match_exists
from .vocab import FGVocabulary, MFGVocabulary

DESCRIPTOR_LENGTH = 211

DESCRIPTOR_NAMES = [
    "mol_weight", "heavy_atoms", "heteroatoms", "halogens", "rings",
    "aromatic_rings", "hbond_donors", "hbond_acceptors", "rotatable_bonds",
    "net_charge", "electrons", "fraction_csp3", "longest_aliphatic_chain",
    "components",
]


@dataclass
class MultiHotVector:
    bits: np.ndarray  # uint8 {0,1}
    kind: str  # "FG" | "MFG" | "FGR"
    fingerprint: str

    def __len__(self) -> int:
        return int(self.bits.shape[0])


@dataclass
class DescriptorVector:
    values: np.ndarray  # float64, fixed length
    names: list[str]


def encode_fg(mol: Molecule, vocab: FGVocabulary) -> MultiHotVector:
    """Presence bit per curated pattern (matches, not counts)."""
    bits = np.zeros(vocab.size, dtype=np.uint8)
    for i, entry in enumerate(vocab.entries):
        if match_exists(entry.pattern, mol):
            bits[i] = 1
    return MultiHotVector(bits=bits, kind="FG", fingerprint=vocab.fingerprint)


def _subsequence_index(tokens: list[str], max_len: int) -> set[tuple[str, ...]]:
    found: set[tuple[str, ...]] = set()
    n = len(tokens)
    for length in range(1, min(max_len, n) + 1):
        for start in range(n - length + 1):
            found.add(tuple(tokens[start:start + length]))
    return found


def encode_mfg(tokens: list[str], vocab: MFGVocabulary) -> MultiHotVector:
    """Bit i set iff entry i occurs as a contiguous token subsequence."""
    bits = np.zeros(vocab.size, dtype=np.uint8)
    if vocab.size:
        max_len = max(len(e.tokens) for e in vocab.entries)
        present = _subsequence_index(tokens, max_len)
        for i, entry in enumerate(vocab.entries):
            if entry.tokens in present:
                bits[i] = 1
    return MultiHotVector(bits=bits, kind="MFG", fingerprint=vocab.fingerprint)


def encode_combined(mol: Molecule, tokens: list[str], fg_vocab: FGVocabulary,
                    mfg_vocab: MFGVocabulary) -> MultiHotVector:
    """[FG bits | MFG bits]; FG and MFG may overlap (bit clash accepted)."""
    fg = encode_fg(mol, fg_vocab)
    mfg = encode_mfg(tokens, mfg_vocab)
    return MultiHotVector(
        bits=np.concatenate([fg.bits, mfg.bits]),
        kind="FGR",
        fingerprint=f"{fg_vocab.fingerprint}:{mfg_vocab.fingerprint}")


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------

def _longest_aliphatic_chain(mol: Molecule) -> int:
    """Longest path over non-aromatic, non-ring carbons (a forest)."""
    from collections import deque

    mol.rings()
    keep = {i for i, a in enumerate(mol.atoms)
            if a.element == "C" and not a.aromatic and not a.in_ring}
    if not keep:
        return 0
    adj = {i: [v for v, _ in mol.adjacency()[i] if v in keep] for i in keep}

    def farthest(start: int) -> tuple[int, int, set[int]]:
        dist = {start: 0}
        queue = deque([start])
        best = (0, start)
        while queue:
            u = queue.popleft()
            best = max(best, (dist[u], u))
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return best[0], best[1], set(dist)

    longest = 1
    seen: set[int] = set()
    for root in sorted(keep):
        if root in seen:
            continue
        _, u, comp = farthest(root)
        d, _, _ = farthest(u)
        longest = max(longest, d + 1)  # tree diameter, as an atom count
        seen |= comp
    return longest


def compute_descriptors(mol: Molecule, length: int = DESCRIPTOR_LENGTH) -> DescriptorVector:
    """Raw (unnormalized) descriptor subset; slots beyond it stay zero."""
    if length < len(DESCRIPTOR_NAMES):
        raise ShapeMismatch(f"descriptor length {length} < implemented subset")
    values = np.zeros(length, dtype=np.float64)
    cycles = mol.rings()

    mw = 0.0
    electrons = 0
    donors = acceptors = heteroatoms = halogens = heavy = 0
    carbons = sp3_carbons = 0
    for atom in mol.atoms:
        mw += MONOISOTOPIC_MASS.get(atom.element, 0.0)
        mw += atom.total_h * MONOISOTOPIC_MASS["H"]
        electrons += atomic_number(atom.element) + atom.total_h
        if atom.element not in ("H", "*"):
            heavy += 1
        if atom.element not in ("C", "H", "*"):
            heteroatoms += 1
        if atom.element in HALOGENS:
            halogens += 1
        if atom.element in ("N", "O"):
            acceptors += 1
            if atom.total_h >= 1:
                donors += 1
        if atom.element == "C":
            carbons += 1
            orders = {mol.bonds[bi].order for _, bi in mol.adjacency()[atom.index]}
            if orders <= {SINGLE}:
                sp3_carbons += 1
    electrons -= sum(a.formal_charge for a in mol.atoms)

    aromatic_rings = sum(1 for cyc in cycles
                         if all(mol.atoms[i].aromatic for i in cyc))
    rotatable = sum(
        1 for b in mol.bonds
        if b.order == SINGLE and not b.in_ring
        and mol.degree(b.a) >= 2 and mol.degree(b.b) >= 2)

    values[0] = mw
    values[1] = heavy
    values[2] = heteroatoms
    values[3] = halogens
    values[4] = len(cycles)
    values[5] = aromatic_rings
    values[6] = donors
    values[7] = acceptors
    values[8] = rotatable
    values[9] = sum(a.formal_charge for a in mol.atoms)
    values[10] = electrons
    values[11] = sp3_carbons / carbons if carbons else 0.0
    values[12] = _longest_aliphatic_chain(mol)
    values[13] = len(mol.components())

    names = DESCRIPTOR_NAMES + [f"pad_{i}" for i in range(len(DESCRIPTOR_NAMES), length)]
    return DescriptorVector(values=values, names=names)


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||2 over the feature dimension; zero vectors pass through."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("non-finite entries in vector")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return v.copy()
    return v / norm


# ---------------------------------------------------------------------------
# matrix export
# ---------------------------------------------------------------------------

_MATRIX_MAGIC = b"fgr-matrix v1\n"


def save_matrix(X: np.ndarray, path, fingerprints: dict[str, str]) -> None:
    """Dense binary export: magic, JSON header, row-major payload."""
    X = np.ascontiguousarray(X)
    header = {
        "rows": int(X.shape[0]),
        "cols": int(X.shape[1]),
        "dtype": str(X.dtype),
        "fingerprints": dict(sorted(fingerprints.items())),
    }
    with open(path, "wb") as fh:
        fh.write(_MATRIX_MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(X.tobytes())


def load_matrix(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MATRIX_MAGIC))
        if magic != _MATRIX_MAGIC:
            from .errors import VersionMismatch
            raise VersionMismatch(f"not an fgr-matrix file: {magic!r}")
        header = json.loads(fh.readline().decode())
        data = np.frombuffer(fh.read(), dtype=np.dtype(header["dtype"]))
    return data.reshape(header["rows"], header["cols"]).copy(), header


def save_matrix_tsv(X: np.ndarray, path, column_labels: list[str]) -> None:
    """Debug-friendly TSV form of an encoded matrix."""
    if X.shape[1] != len(column_labels):
        raise ShapeMismatch("column label count != matrix width")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(column_labels) + "\n")
        for row in X:
            fh.write("\t".join(format(v, "g") for v in row) + "\n")
