"""Building the two vocabularies: curated SMARTS and mined token patterns.

The mined side follows iterative most-frequent-pair merging over tokenized
SMILES; the trace below shows each merge and its corpus frequency.
"""

from fgrkit import load_fg_vocab, mine_mfg, scan_pair_frequencies, tokenize_smiles
from fgrkit.datasets import load_bundled_corpus, starter_fg_vocab_path

# The curated vocabulary ships ~130 classic functional groups, all
# validated against the query engine at load time.
fg = load_fg_vocab(starter_fg_vocab_path())
print(f"curated vocabulary: {fg.size} groups, {len(fg.rejected)} rejects")
print("first entries:", fg.names[:6])

# Pair counting is the scan step of the miner: order-sensitive adjacency
# counts, overlaps included.
sequences = [tokenize_smiles(s) for s in ["CCO", "CCO", "CCN"]]
print("\npair frequencies over {CCO, CCO, CCN}:")
for pair, count in sorted(scan_pair_frequencies(sequences).items()):
    print(f"  {pair}: {count}")

# Mining merges the best pair, rewrites the corpus, and repeats until the
# best frequency drops below eta or the vocabulary hits its cap.
toy = mine_mfg(["CCO", "CCO", "CCN"], eta=2, mvs=100)
print("\ntoy merge trace:")
for (left, right), freq in toy.merge_log:
    print(f"  ({left!r}, {right!r}) merged at frequency {freq}")

# On the bundled 500-molecule corpus a low threshold grows a few hundred
# patterns; each entry records the token sequence and merge-time frequency.
corpus = load_bundled_corpus()
mined = mine_mfg(corpus, eta=5, mvs=30000)
print(f"\nbundled corpus: {mined.size} entries "
      f"({mined.n_initial} single tokens + {len(mined.merged_entries)} merged)")
print("most frequent merged patterns:")
for entry in sorted(mined.merged_entries, key=lambda e: -e.frequency)[:8]:
    print(f"  {entry.text!r:>14} frequency {entry.frequency}")
