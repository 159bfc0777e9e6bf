"""Panel containers and construction of the stacked ARX regression problem.

The model is an ARX(p): the response regressed on its own lags 1..p and on
lags 1..p of every predictor series.  ``build_design`` turns raw panels into
the stacked pair (y, X) with a fixed column ordering: own lags first, then
for each lag the k predictor columns in panel order.  The ordering is part
of the contract; restriction matrices and serialized coefficients depend
on it being reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, StructureError

OWN = "own"
PREDICTOR = "predictor"


@dataclass(frozen=True)
class TimeSeriesPanel:
    """A T x k block of observed series, oldest row first.

    values: float matrix, one row per time point.
    labels: unique column names.
    frequency: free-form tag, metadata only.
    """

    values: np.ndarray
    labels: tuple[str, ...]
    frequency: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"panel values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1:
            raise DimensionError("panel needs at least one row")
        if not np.isfinite(values).all():
            raise StructureError("panel contains NaN or infinite entries")
        labels = tuple(str(l) for l in self.labels)
        if len(labels) != values.shape[1]:
            raise StructureError(
                f"{len(labels)} labels for {values.shape[1]} columns")
        if len(set(labels)) != len(labels):
            raise StructureError("panel labels are not unique")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BlockStructure:
    """Ordered partition of predictor columns into named blocks.

    blocks: tuple of (name, tuple of column indices).  Indices are disjoint
    across blocks; whether they cover a given panel is checked when a design
    is built against that panel.
    """

    blocks: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        norm = []
        seen_names: set[str] = set()
        seen_idx: set[int] = set()
        for entry in self.blocks:
            name, idx = entry
            name = str(name)
            idx = tuple(int(i) for i in idx)
            if name in seen_names:
                raise StructureError(f"duplicate block name {name!r}")
            seen_names.add(name)
            if len(idx) == 0:
                raise StructureError(f"block {name!r} is empty")
            for i in idx:
                if i < 0:
                    raise StructureError(f"block {name!r} has negative index {i}")
                if i in seen_idx:
                    raise StructureError(f"column {i} appears in two blocks")
                seen_idx.add(i)
            norm.append((name, idx))
        object.__setattr__(self, "blocks", tuple(norm))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.blocks)

    def indices(self, name: str) -> tuple[int, ...]:
        for bname, idx in self.blocks:
            if bname == name:
                return idx
        raise StructureError(f"unknown block {name!r}")

    def covered(self) -> set[int]:
        return {i for _, idx in self.blocks for i in idx}

    def validate_against(self, k: int) -> None:
        """Check the blocks partition exactly the columns 0..k-1."""
        cov = self.covered()
        if any(i >= k for i in cov):
            raise StructureError(f"block index out of range for a {k}-column panel")
        if cov != set(range(k)):
            missing = sorted(set(range(k)) - cov)
            raise StructureError(f"columns not covered by any block: {missing}")

    @staticmethod
    def from_sizes(sizes, names=None) -> "BlockStructure":
        """Consecutive blocks of the given sizes, named b1, b2, ... by default."""
        sizes = [int(s) for s in sizes]
        if names is None:
            names = [f"b{i + 1}" for i in range(len(sizes))]
        blocks = []
        start = 0
        for name, size in zip(names, sizes):
            blocks.append((name, tuple(range(start, start + size))))
            start += size
        return BlockStructure(tuple(blocks))


@dataclass(frozen=True)
class Column:
    """Provenance of one design-matrix column: what it lags, from where."""

    kind: str                 # OWN or PREDICTOR
    lag: int                  # 1..p
    source: int               # column index in the source panel
    block: str | None = None  # block name, None for own lags


@dataclass(frozen=True)
class ArxDesign:
    """The stacked regression y = X beta + e for an ARX(p) model.

    y has T-p rows; X is (T-p) x p(1+k) ordered as (own lags 1..p, then for
    each lag j=1..p the k predictor columns in panel order).  Row t of X
    holds only values dated strictly before y[t].
    """

    y: np.ndarray
    X: np.ndarray
    p: int
    colmap: tuple[Column, ...]
    centered: bool = False

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionError("y and X row counts disagree")
        if len(self.colmap) != X.shape[1]:
            raise StructureError("colmap length does not match X columns")
        y = y.copy()
        X = X.copy()
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "colmap", tuple(self.colmap))

    @property
    def n(self) -> int:
        """Effective sample size (rows of the stacked system)."""
        return self.y.shape[0]

    @property
    def n_coef(self) -> int:
        return self.X.shape[1]

    def block_columns(self, block: str) -> tuple[int, ...]:
        """Design-column indices of `block`, lag-major then panel order."""
        cols = tuple(i for i, c in enumerate(self.colmap) if c.block == block)
        if not cols:
            raise StructureError(f"unknown block {block!r}")
        return cols

    @property
    def block_names(self) -> tuple[str, ...]:
        seen: list[str] = []
        for c in self.colmap:
            if c.block is not None and c.block not in seen:
                seen.append(c.block)
        return tuple(seen)


def difference(panel: TimeSeriesPanel, order: int = 1) -> TimeSeriesPanel:
    """Take the order-th difference of every column, dropping `order` rows."""
    if order < 1:
        raise DimensionError(f"difference order must be >= 1, got {order}")
    if panel.T <= order:
        raise DimensionError(
            f"cannot take {order} differences of a {panel.T}-row panel")
    return TimeSeriesPanel(np.diff(panel.values, n=order, axis=0),
                           panel.labels, panel.frequency)


def center(panel: TimeSeriesPanel) -> tuple[TimeSeriesPanel, np.ndarray]:
    """Subtract each column's mean; return the centered panel and the means."""
    means = panel.values.mean(axis=0)
    return TimeSeriesPanel(panel.values - means, panel.labels, panel.frequency), means


def build_design(y: TimeSeriesPanel, x: TimeSeriesPanel, p: int,
                 blocks: BlockStructure, centered: bool = False) -> ArxDesign:
    """Stack an ARX(p) regression from aligned response and predictor panels.

    y must have exactly one column; x and y share the time axis row for row.
    `blocks` must partition x's columns.  When `centered` is set the input
    panels are required to have (numerically) zero column means; the design
    columns then inherit near-zero means up to end effects.
    """
    if y.k != 1:
        raise StructureError(f"response panel must have one column, got {y.k}")
    if y.T != x.T:
        raise DimensionError(f"response has {y.T} rows but predictors have {x.T}")
    if p < 1:
        raise DimensionError(f"lag order must be >= 1, got {p}")
    if y.T <= p:
        raise DimensionError(f"need more than p={p} rows, got {y.T}")
    blocks.validate_against(x.k)

    T, k = y.T, x.k
    yv = y.values[:, 0]
    n = T - p
    cols: list[np.ndarray] = []
    colmap: list[Column] = []
    for j in range(1, p + 1):
        cols.append(yv[p - j:T - j])
        colmap.append(Column(OWN, j, 0))
    block_of = {}
    for name, idx in blocks.blocks:
        for i in idx:
            block_of[i] = name
    for j in range(1, p + 1):
        for i in range(k):
            cols.append(x.values[p - j:T - j, i])
            colmap.append(Column(PREDICTOR, j, i, block_of[i]))
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    design = ArxDesign(yv[p:], X, p, tuple(colmap), centered)

    if centered:
        for panel in (y, x):
            if panel.values.size and np.abs(panel.values.mean(axis=0)).max() > 1e-10:
                raise StructureError("centered=True but panel means are not zero")
        _check_centered_columns(design)
    return design


def _check_centered_columns(design: ArxDesign) -> None:
    # Lagged slices of a centered series keep only approximately zero means;
    # allow an edge-effect budget of 10% of the column scale.
    for name, arr in (("y", design.y[:, None]), ("X", design.X)):
        if arr.size == 0:
            continue
        means = np.abs(arr.mean(axis=0))
        stds = arr.std(axis=0)
        if np.any(means > 0.1 * stds + 1e-12):
            raise StructureError(f"design {name} columns are far from centered")


def drop_block(design: ArxDesign, block: str) -> ArxDesign:
    """Remove every column of `block` (all lags); reindex sources compactly.

    The result equals building the design from a predictor panel with the
    block's columns deleted, so source indices refer to that reduced panel.
    """
    if block not in design.block_names:
        raise StructureError(f"unknown block {block!r}")
    keep = [i for i, c in enumerate(design.colmap) if c.block != block]
    kept_sources = sorted({c.source for c in design.colmap
                           if c.kind == PREDICTOR and c.block != block})
    remap = {src: i for i, src in enumerate(kept_sources)}
    colmap = []
    for i in keep:
        c = design.colmap[i]
        if c.kind == PREDICTOR:
            c = replace(c, source=remap[c.source])
        colmap.append(c)
    return ArxDesign(design.y, design.X[:, keep], design.p, tuple(colmap),
                     design.centered)


def split_panel(panel: TimeSeriesPanel, target: str) -> tuple[TimeSeriesPanel,
                                                              TimeSeriesPanel]:
    """Split one panel into a 1-column response and the remaining predictors."""
    if target not in panel.labels:
        raise StructureError(f"target column {target!r} not found in panel")
    ti = panel.labels.index(target)
    rest = [i for i in range(panel.k) if i != ti]
    y = TimeSeriesPanel(panel.values[:, [ti]], (target,), panel.frequency)
    x = TimeSeriesPanel(panel.values[:, rest],
                        tuple(panel.labels[i] for i in rest), panel.frequency)
    return y, x


def read_panel_csv(path) -> TimeSeriesPanel:
    """Read a panel from CSV: first row labels, one row per time, oldest first."""
    path = str(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            labels = next(reader)
        except StopIteration:
            raise StructureError(f"{path}: empty file") from None
        labels = [l.strip() for l in labels]
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(labels):
                raise StructureError(
                    f"{path}, line {lineno}: {len(row)} fields, expected {len(labels)}")
            parsed = []
            for col, cell in zip(labels, row):
                try:
                    val = float(cell)
                except ValueError:
                    raise StructureError(
                        f"{path}, line {lineno}: cannot parse {cell!r} "
                        f"in column {col!r}") from None
                if not np.isfinite(val):
                    raise StructureError(
                        f"{path}, line {lineno}: missing or non-finite value "
                        f"in column {col!r}")
                parsed.append(val)
            rows.append(parsed)
    if len(rows) < 2:
        raise StructureError(f"{path}: need at least 2 data rows, got {len(rows)}")
    return TimeSeriesPanel(np.array(rows, dtype=float), tuple(labels))


def read_block_map(path, labels) -> BlockStructure:
    """Read `block_name: label1,label2,...` lines into a BlockStructure.

    Every label in `labels` must be claimed by exactly one block.
    """
    path = str(path)
    index = {label: i for i, label in enumerate(labels)}
    blocks: list[tuple[str, tuple[int, ...]]] = []
    claimed: dict[str, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise StructureError(
                    f"{path}, line {lineno}: expected 'block_name: label,...'")
            name, _, rhs = line.partition(":")
            name = name.strip()
            if not name:
                raise StructureError(f"{path}, line {lineno}: empty block name")
            members = [m.strip() for m in rhs.split(",") if m.strip()]
            if not members:
                raise StructureError(f"{path}, line {lineno}: block {name!r} "
                                     "lists no series")
            idx = []
            for m in members:
                if m not in index:
                    raise StructureError(
                        f"{path}, line {lineno}: unknown series {m!r}")
                if m in claimed:
                    raise StructureError(
                        f"{path}, line {lineno}: series {m!r} already in a block "
                        f"(line {claimed[m]})")
                claimed[m] = lineno
                idx.append(index[m])
            blocks.append((name, tuple(idx)))
    missing = [l for l in labels if l not in claimed]
    if missing:
        raise StructureError(f"{path}: series not assigned to any block: {missing}")
    return BlockStructure(tuple(blocks))


def write_panel_csv(path, panel: TimeSeriesPanel) -> None:
    """Inverse of read_panel_csv (full float precision)."""
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(panel.labels)
        for row in panel.values:
            writer.writerow([repr(float(v)) for v in row])
