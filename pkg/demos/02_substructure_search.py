"""SMARTS substructure queries against molecular graphs.

Shows the supported primitive set, match decisions, and embedding
enumeration order.
"""

from fgrkit import find_embeddings, match_exists, parse_smarts, parse_smiles
from fgrkit.errors import UnsupportedPrimitive

# A query is a small graph of atom predicates. [OX2H] reads: oxygen with
# two total connections and exactly one hydrogen -- a hydroxyl oxygen.
hydroxyl = parse_smarts("[OX2H]")
for smiles in ["CCO", "CC(=O)OC", "c1ccccc1O", "CCN"]:
    print(f"hydroxyl in {smiles:>10}: {match_exists(hydroxyl, parse_smiles(smiles))}")

# Embeddings are injective atom maps, enumerated in lexicographic order of
# the mapped index tuple; both orientations of a symmetric query count.
pattern = parse_smarts("CC")
print("\nC-C embeddings in propane:", find_embeddings(pattern, parse_smiles("CCC")))

# Aromaticity is part of the predicate: lowercase matches aromatic atoms
# only, and the unspecified bond between two aromatic query atoms means
# single-or-aromatic (so `cc` spans the biphenyl bridge).
benzene_query = parse_smarts("c1ccccc1")
print("aromatic ring in cyclohexane:",
      match_exists(benzene_query, parse_smiles("C1CCCCC1")))
print("cc spans biphenyl bridge:",
      match_exists(parse_smarts("cc"), parse_smiles("c1ccccc1-c1ccccc1")))

# Ring predicates: [R] in-ring atoms, r6 six-membered rings, @ ring bonds.
print("[R] in cyclopropane:", match_exists(parse_smarts("[R]"), parse_smiles("C1CC1")))
print("[r6] in cyclopentane:", match_exists(parse_smarts("[r6]"), parse_smiles("C1CCCC1")))

# Out-of-subset constructs fail loudly instead of silently matching wrong.
try:
    parse_smarts("[$(C=O)]")
except UnsupportedPrimitive as exc:
    print(f"\nrecursive SMARTS rejected as expected: {exc}")
