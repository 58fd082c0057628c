"""Dataset ingestion, scaffold/random splits, training loop and evaluation.

Training is deterministic for a fixed (seed, config, data) triple: epoch
shuffles come from one seeded generator, batches are contiguous slices of
the shuffled order, and the best-validation parameters are checkpointed.
Wall-clock entries appear in log records only; artifact files contain no
timing, so repeated runs are byte-identical.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .chem import Molecule, murcko_scaffold, parse_smiles, scaffold_key, tokenize_smiles
from .config import resolve_config, validate_for_training
from .datasets import starter_fg_vocab_path
from .encode import (
    compute_descriptors,
    encode_combined,
    encode_fg,
    encode_mfg,
    l2_normalize,
)
from .errors import (
    DatasetError,
    DegenerateTask,
    FgrError,
    MissingSmilesColumn,
    NonFiniteGradient,
    NoUsableRows,
    VocabMismatch,
)
from .metrics import mae, r_squared, rmse, roc_auc
from .nn import (
    Batch,
    CLASSIFICATION,
    ModelHyper,
    ModelState,
    REGRESSION,
    forward_encoder,
    init_model,
    predict_head,
    sam_step,
    sgd_step,
    total_loss,
)
from .vocab import FGVocabulary, MFGVocabulary, load_fg_vocab, load_mfg_vocab

TRAIN, VALID, TEST = "train", "valid", "test"
_SPLIT_ID = {TRAIN: 0, VALID: 1, TEST: 2}


@dataclass
class DataRecord:
    smiles: str
    mol: Molecule
    tokens: list[str]
    targets: list[float | None]


@dataclass
class Dataset:
    records: list[DataRecord]
    task_names: list[str]
    task_kind: str
    report: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.task_names)

    def __len__(self) -> int:
        return len(self.records)

    def target_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(Y, M): targets with zeros at gaps, and the presence mask."""
        n, k = len(self.records), self.k
        Y = np.zeros((n, k))
        M = np.zeros((n, k))
        for i, rec in enumerate(self.records):
            for j, value in enumerate(rec.targets):
                if value is not None:
                    Y[i, j] = value
                    M[i, j] = 1.0
        return Y, M


def load_dataset(path, task_kind: str) -> Dataset:
    """CSV with a `smiles` column; remaining columns are tasks, empty cells
    are missing labels. Unusable rows are dropped and counted."""
    import csv

    if task_kind not in (CLASSIFICATION, REGRESSION):
        raise DatasetError(f"unknown task kind {task_kind!r}")
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise NoUsableRows("empty file") from None
        header = [h.strip() for h in header]
        lowered = [h.lower() for h in header]
        if "smiles" not in lowered:
            raise MissingSmilesColumn(f"no `smiles` column in {header}")
        smiles_col = lowered.index("smiles")
        task_names = [h for i, h in enumerate(header) if i != smiles_col]
        if not task_names:
            raise DatasetError("no task columns")
        records: list[DataRecord] = []
        dropped: dict[str, int] = {}
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            smiles = row[smiles_col].strip()
            targets: list[float | None] = []
            bad_cell = False
            for i, cell in enumerate(row):
                if i == smiles_col:
                    continue
                cell = cell.strip()
                if not cell:
                    targets.append(None)
                    continue
                try:
                    targets.append(float(cell))
                except ValueError:
                    bad_cell = True
                    break
            if bad_cell:
                dropped["bad_label"] = dropped.get("bad_label", 0) + 1
                continue
            targets += [None] * (len(task_names) - len(targets))
            try:
                mol = parse_smiles(smiles)
                tokens = tokenize_smiles(smiles)
            except FgrError:
                dropped["bad_smiles"] = dropped.get("bad_smiles", 0) + 1
                continue
            records.append(DataRecord(smiles=smiles, mol=mol, tokens=tokens,
                                      targets=targets))
    if not records:
        raise NoUsableRows(f"no usable rows in {path}")
    report = {"rows_kept": len(records),
              "rows_dropped": sum(dropped.values()),
              "drop_reasons": dropped}
    return Dataset(records=records, task_names=task_names, task_kind=task_kind,
                   report=report)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

@dataclass
class SplitAssignment:
    assignment: np.ndarray  # record index -> {0 train, 1 valid, 2 test}
    method: str
    seed: int
    ratios: tuple[float, float, float]

    def indices(self, split: str) -> list[int]:
        sid = _SPLIT_ID[split]
        return [int(i) for i in np.nonzero(self.assignment == sid)[0]]


def _check_ratios(ratios) -> tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    return ratios


def scaffold_groups(ds: Dataset) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, rec in enumerate(ds.records):
        key = scaffold_key(murcko_scaffold(rec.mol))
        groups.setdefault(key, []).append(i)
    return groups


def scaffold_split(ds: Dataset, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitAssignment:
    """Whole scaffold groups go to the first split still under capacity,
    in train -> valid -> test order; groups are taken largest first.

    The seed is part of the interface but the assignment is deterministic
    (greedy); it is recorded for provenance only.
    """
    ratios = _check_ratios(ratios)
    n = len(ds)
    caps = [int(np.floor(ratios[0] * n)), int(np.floor(ratios[1] * n))]
    caps.append(n - caps[0] - caps[1])
    groups = sorted(scaffold_groups(ds).items(), key=lambda kv: (-len(kv[1]), kv[0]))
    assignment = np.full(n, 2, dtype=np.int8)
    sizes = [0, 0, 0]
    for _, members in groups:
        for sid in range(3):
            if sizes[sid] < caps[sid]:
                break
        else:
            sid = 2
        assignment[members] = sid
        sizes[sid] += len(members)
    if sizes[1] == 0 or sizes[2] == 0:
        warnings.warn("scaffold split left an empty valid or test set "
                      f"(sizes {sizes}); scaffolds are too concentrated")
    return SplitAssignment(assignment=assignment, method="scaffold", seed=seed,
                           ratios=ratios)


def random_split(ds: Dataset, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitAssignment:
    """Seeded shuffle then contiguous slicing (floor sizes, remainder to train)."""
    ratios = _check_ratios(ratios)
    n = len(ds)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_valid = int(np.floor(ratios[1] * n))
    n_test = int(np.floor(ratios[2] * n))
    n_train = n - n_valid - n_test
    assignment = np.empty(n, dtype=np.int8)
    assignment[order[:n_train]] = 0
    assignment[order[n_train:n_train + n_valid]] = 1
    assignment[order[n_train + n_valid:]] = 2
    return SplitAssignment(assignment=assignment, method="random", seed=seed,
                           ratios=ratios)


def make_split(ds: Dataset, method: str, ratios, seed: int) -> SplitAssignment:
    if method == "scaffold":
        return scaffold_split(ds, ratios, seed)
    if method == "random":
        return random_split(ds, ratios, seed)
    raise ValueError(f"unknown split method {method!r}")


# ---------------------------------------------------------------------------
# encoding cache
# ---------------------------------------------------------------------------

@dataclass
class EncodedDataset:
    X: np.ndarray                  # (n, p) float64 multi-hot
    D: np.ndarray | None           # (n, d) L2-normalized descriptors
    Y: np.ndarray
    M: np.ndarray
    feature_labels: list[str]
    feature_kinds: list[str]       # FG | MFG | DESC per model input column
    fingerprints: dict[str, str]


def load_vocabularies(cfg: dict) -> tuple[FGVocabulary | None, MFGVocabulary | None]:
    rep = cfg["vocab"]["representation"]
    fg = mfg = None
    if rep in ("fg", "fgr"):
        path = cfg["vocab"]["fg"] or starter_fg_vocab_path()
        fg = load_fg_vocab(path, skip_invalid=cfg["vocab"]["skip_invalid"])
    if rep in ("mfg", "fgr"):
        mfg = load_mfg_vocab(cfg["vocab"]["mfg"])
    return fg, mfg


def encode_dataset(ds: Dataset, fg: FGVocabulary | None, mfg: MFGVocabulary | None,
                   use_descriptors: bool, descriptor_length: int) -> EncodedDataset:
    """Multi-hot (and descriptor) cache computed once per record."""
    rows = []
    for rec in ds.records:
        if fg is not None and mfg is not None:
            rows.append(encode_combined(rec.mol, rec.tokens, fg, mfg).bits)
        elif fg is not None:
            rows.append(encode_fg(rec.mol, fg).bits)
        elif mfg is not None:
            rows.append(encode_mfg(rec.tokens, mfg).bits)
        else:
            raise ValueError("need at least one vocabulary")
    X = np.asarray(rows, dtype=np.float64)
    labels: list[str] = []
    kinds: list[str] = []
    fingerprints: dict[str, str] = {}
    if fg is not None:
        labels += fg.names
        kinds += ["FG"] * fg.size
        fingerprints["fg"] = fg.fingerprint
    if mfg is not None:
        labels += [e.text for e in mfg.entries]
        kinds += ["MFG"] * mfg.size
        fingerprints["mfg"] = mfg.fingerprint
    D = None
    if use_descriptors:
        desc_rows = []
        names = None
        for rec in ds.records:
            desc = compute_descriptors(rec.mol, length=descriptor_length)
            desc_rows.append(l2_normalize(desc.values))
            names = desc.names
        D = np.asarray(desc_rows, dtype=np.float64)
        labels += names
        kinds += ["DESC"] * descriptor_length
    Y, M = ds.target_arrays()
    return EncodedDataset(X=X, D=D, Y=Y, M=M, feature_labels=labels,
                          feature_kinds=kinds, fingerprints=fingerprints)


# ---------------------------------------------------------------------------
# metrics over splits
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    split: str
    kind: str
    per_task: dict[str, dict[str, float]]
    macro: dict[str, float]
    skipped_tasks: list[str]
    seed: int = 0

    def primary(self) -> float:
        return self.macro["roc_auc"] if self.kind == CLASSIFICATION else self.macro["rmse"]


def compute_metrics(Yhat: np.ndarray, Y: np.ndarray, M: np.ndarray,
                    task_names: list[str], kind: str, split: str = "",
                    seed: int = 0) -> MetricsReport:
    per_task: dict[str, dict[str, float]] = {}
    skipped: list[str] = []
    for j, name in enumerate(task_names):
        mask = M[:, j] == 1.0
        if mask.sum() == 0:
            skipped.append(name)
            continue
        y, yhat = Y[mask, j], Yhat[mask, j]
        if kind == CLASSIFICATION:
            if len(set(y.tolist())) < 2:
                skipped.append(name)
                continue
            per_task[name] = {"roc_auc": roc_auc(yhat, y)}
        else:
            entry = {"rmse": rmse(yhat, y), "mae": mae(yhat, y)}
            try:
                entry["r2"] = r_squared(yhat, y)
            except DegenerateTask:
                pass
            per_task[name] = entry
    if not per_task:
        raise DegenerateTask(f"no evaluable tasks on split {split!r}")
    keys = sorted({k for v in per_task.values() for k in v})
    macro = {k: float(np.mean([v[k] for v in per_task.values() if k in v]))
             for k in keys}
    return MetricsReport(split=split, kind=kind, per_task=per_task, macro=macro,
                         skipped_tasks=skipped, seed=seed)


def evaluate_state(state: ModelState, enc: EncodedDataset, indices: list[int],
                   task_names: list[str], split: str, seed: int = 0) -> MetricsReport:
    if not indices:
        raise DegenerateTask(f"split {split!r} is empty")
    X = enc.X[indices]
    D = enc.D[indices] if enc.D is not None and state.hyper.use_descriptors else None
    Z = forward_encoder(X, state)
    Yhat = predict_head(Z, D, state)
    return compute_metrics(Yhat, enc.Y[indices], enc.M[indices], task_names,
                           state.hyper.task, split=split, seed=seed)


def check_fingerprints(state: ModelState, enc: EncodedDataset) -> None:
    for key, want in enc.fingerprints.items():
        have = state.fingerprints.get(key)
        if have is not None and have != want:
            raise VocabMismatch(f"{key} vocabulary fingerprint mismatch")


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    state: ModelState            # best-validation parameters
    final_state: ModelState
    log: list[dict]
    best_epoch: int
    split: SplitAssignment
    enc: EncodedDataset
    dataset: Dataset
    seed: int
    config: dict


def _batches(order: np.ndarray, size: int):
    for start in range(0, len(order), size):
        yield order[start:start + size]


def _dump_divergence(state: ModelState, batch: Batch, batch_idx: np.ndarray,
                     epoch: int) -> None:
    """Diagnostics to stderr before a NonFiniteGradient abort."""
    import sys

    print(f"fgrkit: training diverged at epoch {epoch}, "
          f"batch records {batch_idx.tolist()}", file=sys.stderr)
    for name, value in state.params().items():
        finite = bool(np.all(np.isfinite(value)))
        peak = float(np.max(np.abs(value[np.isfinite(value)]))) \
            if np.any(np.isfinite(value)) else float("nan")
        print(f"fgrkit:   {name}: finite={finite} max|theta|={peak:.3e}",
              file=sys.stderr)
    print(f"fgrkit:   batch X sum={float(batch.X.sum())} "
          f"mask sum={float(batch.M.sum())}", file=sys.stderr)


def train(config: dict) -> TrainResult:
    """End-to-end training per the resolved config; see config.DEFAULT_CONFIG."""
    cfg = resolve_config(config)
    validate_for_training(cfg)
    ds = load_dataset(cfg["data"]["path"], cfg["data"]["task"])
    fg, mfg = load_vocabularies(cfg)
    enc = encode_dataset(ds, fg, mfg, cfg["model"]["use_descriptors"],
                         cfg["model"]["descriptor_length"])
    seed = int(cfg["training"]["seed"])
    split = make_split(ds, cfg["data"]["split"], tuple(cfg["data"]["ratios"]), seed)
    return train_encoded(cfg, ds, enc, split, seed)


def train_encoded(cfg: dict, ds: Dataset, enc: EncodedDataset,
                  split: SplitAssignment, seed: int,
                  train_indices: list[int] | None = None,
                  valid_indices: list[int] | None = None) -> TrainResult:
    """Training loop over a pre-encoded dataset (shared by train and CV)."""
    hyper = ModelHyper(
        l=int(cfg["model"]["latent"]),
        tied=bool(cfg["model"]["tied"]),
        alpha_t=float(cfg["model"]["alpha_t"]),
        gamma=float(cfg["model"]["gamma"]),
        alpha=float(cfg["model"]["alpha"]),
        beta=float(cfg["model"]["beta"]),
        task=cfg["data"]["task"],
        use_descriptors=bool(cfg["model"]["use_descriptors"]),
        descriptor_dim=(int(cfg["model"]["descriptor_length"])
                        if cfg["model"]["use_descriptors"] else 0),
    )
    train_idx = np.array(train_indices if train_indices is not None
                         else split.indices(TRAIN), dtype=int)
    valid_idx = list(valid_indices if valid_indices is not None
                     else split.indices(VALID))
    if len(train_idx) == 0:
        raise DatasetError("empty training split")

    p = enc.X.shape[1]
    k = enc.Y.shape[1]
    state = init_model(p, k, hyper, seed=seed, fingerprints=enc.fingerprints)
    rng = np.random.default_rng(seed + 1)
    velocities: dict[str, np.ndarray] = {}

    opt = cfg["optimizer"]
    epochs = int(cfg["training"]["epochs"])
    batch_size = int(cfg["training"]["batch_size"])
    task_names = ds.task_names

    def subset_batch(idx: np.ndarray) -> Batch:
        D = enc.D[idx] if enc.D is not None and hyper.use_descriptors else None
        return Batch(X=enc.X[idx], Y=enc.Y[idx], M=enc.M[idx], D=D)

    log: list[dict] = []
    best_metric: float | None = None
    best_epoch = 0
    best_params = {n: v.copy() for n, v in state.params().items()}
    higher_better = hyper.task == CLASSIFICATION

    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        order = train_idx[rng.permutation(len(train_idx))]
        for batch_idx in _batches(order, batch_size):
            batch = subset_batch(batch_idx)
            try:
                if opt["kind"] == "sam":
                    state = sam_step(state, batch, lr=float(opt["lr"]),
                                     rho=float(opt["rho"]),
                                     momentum=float(opt["momentum"]),
                                     velocities=velocities)
                else:
                    from .nn import compute_gradients
                    grads = compute_gradients(batch, state)
                    state = sgd_step(state, grads, lr=float(opt["lr"]),
                                     momentum=float(opt["momentum"]),
                                     velocities=velocities)
            except NonFiniteGradient:
                _dump_divergence(state, batch, batch_idx, epoch)
                raise
        _, parts = total_loss(subset_batch(train_idx), state)
        record = {"epoch": epoch, **{k_: float(v) for k_, v in parts.items()}}
        try:
            watch_idx = valid_idx if valid_idx else list(train_idx)
            metric = evaluate_state(state, enc, watch_idx, task_names,
                                    VALID if valid_idx else TRAIN, seed).primary()
        except DegenerateTask:
            metric = float("nan")
        record["valid_metric"] = float(metric)
        record["wall_time"] = time.perf_counter() - t0
        log.append(record)
        if not np.isnan(metric):
            better = (best_metric is None
                      or (metric > best_metric if higher_better else metric < best_metric))
            if better:
                best_metric = metric
                best_epoch = epoch
                best_params = {n: v.copy() for n, v in state.params().items()}

    if best_metric is None:
        # no epoch produced an evaluable watch metric; keep the final state
        best_state, best_epoch = state, epochs
    else:
        best_state = state.with_params(best_params)
    return TrainResult(state=best_state, final_state=state, log=log,
                       best_epoch=best_epoch, split=split, enc=enc, dataset=ds,
                       seed=seed, config=cfg)


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

def scaffold_fold_assignment(ds: Dataset, folds: int) -> list[list[int]]:
    """Scaffold-grouped folds: each group lands in the currently smallest
    fold (ties to the lowest index); no scaffold key spans folds."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    groups = sorted(scaffold_groups(ds).items(), key=lambda kv: (-len(kv[1]), kv[0]))
    assignment: list[list[int]] = [[] for _ in range(folds)]
    for _, members in groups:
        target = min(range(folds), key=lambda f: (len(assignment[f]), f))
        assignment[target].extend(members)
    return [sorted(fold) for fold in assignment]


@dataclass
class CrossValidationResult:
    fold_results: list[TrainResult]
    fold_metrics: list[MetricsReport]
    aggregate: dict[str, dict[str, float]]  # metric -> {mean, std}
    folds: list[list[int]]


def crossvalidate(config: dict, folds: int) -> CrossValidationResult:
    """Scaffold-grouped K-fold: fold i tests, fold (i+1) % K validates,
    the rest trains; reports mean±std of the test metrics."""
    cfg = resolve_config(config)
    validate_for_training(cfg)
    ds = load_dataset(cfg["data"]["path"], cfg["data"]["task"])
    fg, mfg = load_vocabularies(cfg)
    enc = encode_dataset(ds, fg, mfg, cfg["model"]["use_descriptors"],
                         cfg["model"]["descriptor_length"])
    fold_sets = scaffold_fold_assignment(ds, folds)
    seed = int(cfg["training"]["seed"])
    split = make_split(ds, cfg["data"]["split"], tuple(cfg["data"]["ratios"]), seed)

    results: list[TrainResult] = []
    reports: list[MetricsReport] = []
    for i in range(folds):
        test_idx = fold_sets[i]
        valid_idx = fold_sets[(i + 1) % folds]
        train_idx = sorted(j for f, fold in enumerate(fold_sets)
                           if f not in (i, (i + 1) % folds) for j in fold)
        result = train_encoded(cfg, ds, enc, split, seed=seed + i,
                               train_indices=train_idx, valid_indices=valid_idx)
        report = evaluate_state(result.state, enc, test_idx, ds.task_names,
                                TEST, seed=seed + i)
        results.append(result)
        reports.append(report)

    keys = sorted({k for r in reports for k in r.macro})
    aggregate = {}
    for key in keys:
        values = [r.macro[key] for r in reports if key in r.macro]
        aggregate[key] = {"mean": float(np.mean(values)),
                          "std": float(np.std(values))}
    return CrossValidationResult(fold_results=results, fold_metrics=reports,
                                 aggregate=aggregate, folds=fold_sets)
