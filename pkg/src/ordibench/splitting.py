"""Train/val/test splitting with identity hygiene, plus split audits.

Two modes are supported. "random" scatters individual samples across folds,
which is exactly the protocol that lets identity information leak between
training and evaluation. "subject-exclusive" keeps every identity inside a
single fold and stratifies by age, so the evaluation measures generalization
to unseen people.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DatasetTable, ParseError, ValidationError
from .util import rng_from_seed

__all__ = [
    "MODE_SUBJECT_EXCLUSIVE",
    "MODE_RANDOM",
    "FOLD_NAMES",
    "SplitSpec",
    "AuditReport",
    "make_split",
    "make_split_series",
    "audit_split",
    "save_split",
    "load_split",
    "age_bin_edges",
]

MODE_SUBJECT_EXCLUSIVE = "subject-exclusive"
MODE_RANDOM = "random"
_MODES = (MODE_SUBJECT_EXCLUSIVE, MODE_RANDOM)
FOLD_NAMES = ("train", "val", "test")

# One bin per distinct label while the label set is small; coarse fixed-width
# binning beyond that so stratification targets stay estimable.
_MAX_EXACT_BINS = 32
_COARSE_BINS = 10
_FRACTION_WARN_TOL = 0.02


def _check_fractions(fractions) -> tuple[float, float, float]:
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3:
        raise ValidationError("fractions must have exactly three entries")
    if any(not (0.0 < f < 1.0) for f in fr):
        raise ValidationError("each fraction must lie strictly between 0 and 1")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ValidationError("fractions must sum to 1")
    return fr  # type: ignore[return-value]


@dataclass(frozen=True)
class SplitSpec:
    """A concrete three-way partition of sample ids."""

    mode: str
    seed: int
    fractions: tuple[float, float, float]
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValidationError(f"unknown split mode {self.mode!r}")
        object.__setattr__(self, "fractions", _check_fractions(self.fractions))
        folds = [tuple(self.train), tuple(self.val), tuple(self.test)]
        for name, fold in zip(FOLD_NAMES, folds):
            if len(set(fold)) != len(fold):
                raise ValidationError(f"fold {name!r} contains duplicate sample ids")
        object.__setattr__(self, "train", folds[0])
        object.__setattr__(self, "val", folds[1])
        object.__setattr__(self, "test", folds[2])
        for i in range(3):
            for j in range(i + 1, 3):
                both = set(folds[i]) & set(folds[j])
                if both:
                    raise ValidationError(
                        f"folds {FOLD_NAMES[i]!r} and {FOLD_NAMES[j]!r} share sample ids: "
                        f"{sorted(both)[:5]}"
                    )

    def folds(self) -> dict[str, tuple[str, ...]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def __len__(self) -> int:
        return len(self.train) + len(self.val) + len(self.test)


def age_bin_edges(label_values: tuple[int, ...]) -> np.ndarray | None:
    """Edges for age histograms; None means one bin per distinct label."""
    if len(label_values) <= _MAX_EXACT_BINS:
        return None
    return np.linspace(label_values[0], label_values[-1], _COARSE_BINS + 1)


def _bin_index_of_ages(table: DatasetTable, ages: np.ndarray) -> tuple[np.ndarray, int]:
    """Assign a bin index to each age; returns (indices, n_bins)."""
    edges = age_bin_edges(table.label_set.values)
    if edges is None:
        idx = np.asarray([table.label_set.index_of(int(a)) for a in ages], dtype=int)
        return idx, len(table.label_set)
    idx = np.clip(np.searchsorted(edges, ages, side="right") - 1, 0, len(edges) - 2)
    return idx.astype(int), len(edges) - 1


def _target_counts(n: int, fractions: tuple[float, float, float]) -> list[int]:
    """Integer fold sizes by largest-remainder apportionment."""
    raw = [n * f for f in fractions]
    base = [int(np.floor(r)) for r in raw]
    remainder = n - sum(base)
    order = sorted(range(3), key=lambda i: (raw[i] - base[i]), reverse=True)
    for i in order[:remainder]:
        base[i] += 1
    return base


def make_split(table: DatasetTable, mode: str, fractions, seed: int) -> SplitSpec:
    """Partition a table into train/val/test folds.

    In subject-exclusive mode whole identities are assigned greedily, largest
    first, to the fold where they least overshoot the target sample count and
    most improve the fold's age histogram match. Ties in identity size are
    broken by a seeded shuffle and cost ties by fold order, so equal seeds
    give equal splits.
    """
    if mode not in _MODES:
        raise ValidationError(f"unknown split mode {mode!r}")
    fr = _check_fractions(fractions)
    n = len(table)
    if n == 0:
        raise ValidationError("cannot split an empty table")
    targets = _target_counts(n, fr)
    if min(targets) < 1:
        raise ValidationError("degenerate fractions: a fold would receive zero samples")
    rng = rng_from_seed(seed)

    if mode == MODE_RANDOM:
        order = rng.permutation(n)
        bounds = np.cumsum(targets)[:-1]
        parts = np.split(order, bounds)
        folds = [sorted(int(i) for i in part) for part in parts]
        ids = table.sample_ids
        return SplitSpec(
            mode=mode,
            seed=int(seed),
            fractions=fr,
            train=tuple(ids[i] for i in folds[0]),
            val=tuple(ids[i] for i in folds[1]),
            test=tuple(ids[i] for i in folds[2]),
        )

    groups = table.by_identity()
    if len(groups) < 3:
        raise ValidationError(
            f"subject-exclusive split needs at least 3 identities, got {len(groups)}"
        )
    bin_idx, n_bins = _bin_index_of_ages(table, table.ages)
    global_hist = np.bincount(bin_idx, minlength=n_bins).astype(float)

    idents = list(groups)
    rng.shuffle(idents)
    idents.sort(key=lambda k: -len(groups[k]))  # stable: seeded order breaks ties

    ident_hist = {
        k: np.bincount(bin_idx[list(rows)], minlength=n_bins).astype(float)
        for k, rows in groups.items()
    }
    fold_counts = np.zeros(3)
    fold_hists = np.zeros((3, n_bins))
    hist_targets = np.outer(fr, global_hist)
    assignment: dict[str, int] = {}
    for ident in idents:
        c = len(groups[ident])
        h = ident_hist[ident]
        costs = np.empty(3)
        for f in range(3):
            # marginal change of the fold's count gap: -c while below target,
            # +c once the identity would overshoot it
            count_now = abs(fold_counts[f] - targets[f])
            count_next = abs(fold_counts[f] + c - targets[f])
            # marginal change of the fold's histogram gap: negative while the
            # identity's age bins still have room under the fold's target
            gap_now = np.abs(fold_hists[f] - hist_targets[f]).sum()
            gap_next = np.abs(fold_hists[f] + h - hist_targets[f]).sum()
            costs[f] = (count_next - count_now) + (gap_next - gap_now)
        f = int(np.argmin(costs))
        assignment[ident] = f
        fold_counts[f] += c
        fold_hists[f] += h

    _repair_assignment(
        assignment, idents, groups, ident_hist, fold_counts, fold_hists,
        np.asarray(targets, dtype=float), hist_targets,
    )

    fold_ids: list[list[str]] = [[], [], []]
    for s in table.samples:
        fold_ids[assignment[s.identity_id]].append(s.sample_id)

    achieved = [len(f) / n for f in fold_ids]
    worst = max(abs(a - f) for a, f in zip(achieved, fr))
    if worst > _FRACTION_WARN_TOL:
        warnings.warn(
            f"subject-exclusive split deviates from requested fractions by {worst:.3f} "
            "(identity sizes may not permit a closer fit)",
            stacklevel=2,
        )
    return SplitSpec(
        mode=mode,
        seed=int(seed),
        fractions=fr,
        train=tuple(fold_ids[0]),
        val=tuple(fold_ids[1]),
        test=tuple(fold_ids[2]),
    )


def _repair_assignment(assignment: dict[str, int], idents: list[str], groups,
                       ident_hist, fold_counts: np.ndarray, fold_hists: np.ndarray,
                       targets: np.ndarray, hist_targets: np.ndarray,
                       max_passes: int = 200) -> None:
    """Hill-climb the greedy assignment with moves and swaps, in place.

    A step is accepted when it lexicographically improves (total count gap,
    worst normalized bin deviation, total histogram gap); equal-size swaps
    leave counts untouched and exist purely to trade ages between folds.
    Deterministic: identities are visited in their given order and the first
    improving step is taken.
    """
    total = float(fold_counts.sum())
    global_norm = hist_targets.sum(axis=0) / total

    def objective() -> tuple[float, float, float]:
        count_gap = float(np.abs(fold_counts - targets).sum())
        safe = np.maximum(fold_counts, 1.0)
        max_dev = float(np.abs(fold_hists / safe[:, None] - global_norm).max())
        hist_gap = float(np.abs(fold_hists - hist_targets).sum())
        return count_gap, max_dev, hist_gap

    def better(new: tuple[float, float, float], old: tuple[float, float, float]) -> bool:
        for a, b in zip(new, old):
            if a < b - 1e-9:
                return True
            if a > b + 1e-9:
                return False
        return False

    fold_members = [sum(1 for f in assignment.values() if f == k) for k in range(3)]

    def apply_move(ident: str, f1: int) -> None:
        f0 = assignment[ident]
        c, h = len(groups[ident]), ident_hist[ident]
        fold_counts[f0] -= c
        fold_counts[f1] += c
        fold_hists[f0] -= h
        fold_hists[f1] += h
        assignment[ident] = f1
        fold_members[f0] -= 1
        fold_members[f1] += 1

    def apply_swap(a: str, b: str) -> None:
        fa, fb = assignment[a], assignment[b]
        ca, ha = len(groups[a]), ident_hist[a]
        cb, hb = len(groups[b]), ident_hist[b]
        fold_counts[fa] += cb - ca
        fold_counts[fb] += ca - cb
        fold_hists[fa] += hb - ha
        fold_hists[fb] += ha - hb
        assignment[a], assignment[b] = fb, fa

    for _ in range(max_passes):
        current = objective()
        best_step = None
        best_obj = current
        for ident in idents:
            f0 = assignment[ident]
            if fold_members[f0] <= 1:
                continue  # never empty a fold
            c = len(groups[ident])
            h = ident_hist[ident]
            for f1 in range(3):
                if f1 == f0:
                    continue
                fold_counts[f0] -= c
                fold_counts[f1] += c
                fold_hists[f0] -= h
                fold_hists[f1] += h
                cand = objective()
                fold_counts[f0] += c
                fold_counts[f1] -= c
                fold_hists[f0] += h
                fold_hists[f1] -= h
                if better(cand, best_obj):
                    best_obj = cand
                    best_step = ("move", ident, f1)
        for i, a in enumerate(idents):
            fa = assignment[a]
            ca, ha = len(groups[a]), ident_hist[a]
            for b in idents[i + 1:]:
                fb = assignment[b]
                if fa == fb:
                    continue
                cb, hb = len(groups[b]), ident_hist[b]
                fold_counts[fa] += cb - ca
                fold_counts[fb] += ca - cb
                fold_hists[fa] += hb - ha
                fold_hists[fb] += ha - hb
                cand = objective()
                fold_counts[fa] -= cb - ca
                fold_counts[fb] -= ca - cb
                fold_hists[fa] -= hb - ha
                fold_hists[fb] -= ha - hb
                if better(cand, best_obj):
                    best_obj = cand
                    best_step = ("swap", a, b)
        if best_step is None:
            break
        if best_step[0] == "move":
            apply_move(best_step[1], best_step[2])
        else:
            apply_swap(best_step[1], best_step[2])


def make_split_series(table: DatasetTable, mode: str, fractions, base_seed: int, n: int) -> list[SplitSpec]:
    """n independent splits with seeds base_seed .. base_seed + n - 1."""
    if n < 1:
        raise ValidationError("series length must be >= 1")
    return [make_split(table, mode, fractions, base_seed + i) for i in range(n)]


@dataclass(frozen=True)
class AuditReport:
    """Leakage and stratification diagnostics for one split of one table."""

    fold_sizes: dict[str, int]
    achieved_fractions: tuple[float, float, float]
    overlap_counts: dict[str, int]
    overlap_identities: dict[str, tuple[str, ...]]
    age_histograms: dict[str, tuple[float, ...]]
    global_histogram: tuple[float, ...]
    max_bin_deviation: float

    @property
    def total_overlap(self) -> int:
        return sum(self.overlap_counts.values())

    @property
    def is_subject_exclusive(self) -> bool:
        return self.total_overlap == 0

    def to_dict(self) -> dict:
        return {
            "fold_sizes": dict(self.fold_sizes),
            "achieved_fractions": list(self.achieved_fractions),
            "overlap_counts": dict(self.overlap_counts),
            "overlap_identities": {k: list(v) for k, v in self.overlap_identities.items()},
            "age_histograms": {k: list(v) for k, v in self.age_histograms.items()},
            "global_histogram": list(self.global_histogram),
            "max_bin_deviation": self.max_bin_deviation,
            "is_subject_exclusive": self.is_subject_exclusive,
        }

    def to_text(self) -> str:
        lines = ["split audit"]
        lines.append(
            "  fold sizes: "
            + ", ".join(f"{k}={self.fold_sizes[k]}" for k in FOLD_NAMES)
        )
        lines.append(
            "  achieved fractions: "
            + ", ".join(f"{f:.4f}" for f in self.achieved_fractions)
        )
        for pair, count in self.overlap_counts.items():
            detail = ""
            if count:
                names = ", ".join(self.overlap_identities[pair][:8])
                detail = f" ({names})"
            lines.append(f"  identity overlap {pair}: {count}{detail}")
        lines.append(f"  max age-bin deviation: {self.max_bin_deviation:.4f}")
        verdict = "subject-exclusive" if self.is_subject_exclusive else "LEAKY"
        lines.append(f"  verdict: {verdict}")
        return "\n".join(lines)


def audit_split(table: DatasetTable, split: SplitSpec) -> AuditReport:
    """Measure identity overlap between folds and age-histogram fidelity.

    Raises ValidationError when the split references sample ids the table
    does not contain.
    """
    folds = split.folds()
    rows = {name: table.rows_for(ids) for name, ids in folds.items()}

    ident_sets = {
        name: {table.samples[i].identity_id for i in rows[name]} for name in FOLD_NAMES
    }
    overlap_counts: dict[str, int] = {}
    overlap_identities: dict[str, tuple[str, ...]] = {}
    for i in range(3):
        for j in range(i + 1, 3):
            a, b = FOLD_NAMES[i], FOLD_NAMES[j]
            shared = sorted(ident_sets[a] & ident_sets[b])
            key = f"{a}/{b}"
            overlap_counts[key] = len(shared)
            overlap_identities[key] = tuple(shared)

    bin_idx, n_bins = _bin_index_of_ages(table, table.ages)
    global_counts = np.bincount(bin_idx, minlength=n_bins).astype(float)
    global_hist = global_counts / max(len(table), 1)

    histograms: dict[str, tuple[float, ...]] = {}
    max_dev = 0.0
    n_split = max(len(split), 1)
    for name in FOLD_NAMES:
        idx = rows[name]
        if len(idx) == 0:
            hist = np.zeros(n_bins)
        else:
            hist = np.bincount(bin_idx[idx], minlength=n_bins).astype(float) / len(idx)
        histograms[name] = tuple(float(h) for h in hist)
        if len(idx) > 0:
            max_dev = max(max_dev, float(np.max(np.abs(hist - global_hist))))

    sizes = {name: int(len(rows[name])) for name in FOLD_NAMES}
    achieved = tuple(sizes[name] / n_split for name in FOLD_NAMES)
    return AuditReport(
        fold_sizes=sizes,
        achieved_fractions=achieved,  # type: ignore[arg-type]
        overlap_counts=overlap_counts,
        overlap_identities=overlap_identities,
        age_histograms=histograms,
        global_histogram=tuple(float(h) for h in global_hist),
        max_bin_deviation=max_dev,
    )


def save_split(split: SplitSpec, path) -> Path:
    path = Path(path)
    payload = {
        "mode": split.mode,
        "seed": split.seed,
        "fractions": list(split.fractions),
        "train": list(split.train),
        "val": list(split.val),
        "test": list(split.test),
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def load_split(path, table: DatasetTable | None = None) -> SplitSpec:
    """Read a split file; with a table, also enforce membership and, for
    subject-exclusive splits, identity disjointness (the offending identity
    is named in the error)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    for key in ("mode", "seed", "fractions", "train", "val", "test"):
        if key not in payload:
            raise ParseError(f"{path}: missing key {key!r}")
    split = SplitSpec(
        mode=str(payload["mode"]),
        seed=int(payload["seed"]),
        fractions=tuple(payload["fractions"]),
        train=tuple(payload["train"]),
        val=tuple(payload["val"]),
        test=tuple(payload["test"]),
    )
    if table is not None:
        report = audit_split(table, split)
        if split.mode == MODE_SUBJECT_EXCLUSIVE and not report.is_subject_exclusive:
            for pair, names in report.overlap_identities.items():
                if names:
                    raise ValidationError(
                        f"{path}: split is labelled subject-exclusive but identity "
                        f"{names[0]!r} appears in folds {pair}"
                    )
    return split
