"""Per-layer cosine similarity between checkpoints and alpha/beta sweeps."""
from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import InvalidArgumentError
from .arithmetic import MergeRecipe, merge
from .checkpoint import Checkpoint

LAYER_TYPES = ("conv", "query", "key", "value", "out", "ffn")
REGIONS = ("down", "mid", "up")

# first match wins; projections are tested before the generic conv rule
DEFAULT_TYPE_RULES: tuple[tuple[str, str], ...] = (
    (r"(^|\.)to_q(\.|$)", "query"),
    (r"(^|\.)to_k(\.|$)", "key"),
    (r"(^|\.)to_v(\.|$)", "value"),
    (r"(^|\.)to_out(\.|$)", "out"),
    (r"(^|\.)(ff|ffn|mlp)(\.|$)", "ffn"),
    (r"conv", "conv"),
)
DEFAULT_REGION_RULES: tuple[tuple[str, str], ...] = (
    (r"(^|\.)down_blocks?(\.|$)", "down"),
    (r"(^|\.)mid_block(\.|$)", "mid"),
    (r"(^|\.)up_blocks?(\.|$)", "up"),
)


@dataclass(frozen=True)
class LayerClassifier:
    type_rules: Sequence[tuple[str, str]] = DEFAULT_TYPE_RULES
    region_rules: Sequence[tuple[str, str]] = DEFAULT_REGION_RULES

    @staticmethod
    def _first(rules, name):
        for pattern, label in rules:
            if re.search(pattern, name):
                return label
        return None

    def classify(self, name: str) -> tuple[str | None, str | None]:
        return self._first(self.type_rules, name), self._first(self.region_rules, name)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float | None:
    """Cosine of the flattened tensors, accumulated in float64.

    ``None`` when either side has zero norm.
    """
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    nx, ny = math.sqrt(math.fsum(x * x)), math.sqrt(math.fsum(y * y))
    if nx == 0.0 or ny == 0.0:
        return None
    return max(-1.0, min(1.0, math.fsum(x * y) / (nx * ny)))


@dataclass(frozen=True)
class SimilarityRow:
    name: str
    layer_type: str | None
    region: str | None
    similarity: float | None


def _fmt(v: float | None) -> str:
    return "undefined" if v is None else repr(v)


@dataclass(frozen=True)
class SimilarityReport:
    rows: tuple[SimilarityRow, ...]
    unmatched: tuple[str, ...] = ()

    def grid(self) -> dict[tuple[str, str], float | None]:
        """Mean similarity per (layer type, region); ``None`` for empty or
        all-undefined cells. Always 6 x 3 entries."""
        cells: dict[tuple[str, str], list[float]] = {(t, r): [] for t in LAYER_TYPES for r in REGIONS}
        for row in self.rows:
            if (row.layer_type, row.region) in cells and row.similarity is not None:
                cells[(row.layer_type, row.region)].append(row.similarity)
        return {k: (math.fsum(v) / len(v) if v else None) for k, v in cells.items()}

    def counts(self) -> dict[tuple[str, str], int]:
        out = {(t, r): 0 for t in LAYER_TYPES for r in REGIONS}
        for row in self.rows:
            if (row.layer_type, row.region) in out:
                out[(row.layer_type, row.region)] += 1
        return out

    def grid_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer_type", *REGIONS])
        g = self.grid()
        for t in LAYER_TYPES:
            w.writerow([t, *(_fmt(g[(t, r)]) for r in REGIONS)])
        return buf.getvalue()

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "layer_type", "region", "similarity"])
        for r in self.rows:
            w.writerow([r.name, r.layer_type or "", r.region or "", _fmt(r.similarity)])
        return buf.getvalue()


def layer_similarity_report(a: Mapping[str, np.ndarray], b: Mapping[str, np.ndarray],
                            classifier: LayerClassifier | None = None) -> SimilarityReport:
    classifier = classifier or LayerClassifier()
    shared = [k for k in a if k in b]
    if not shared:
        raise InvalidArgumentError("checkpoints share no tensor names")
    rows = []
    for k in shared:
        if np.shape(a[k]) != np.shape(b[k]):
            sim = None
        else:
            sim = cosine_similarity(a[k], b[k])
        rows.append(SimilarityRow(k, *classifier.classify(k), sim))
    unmatched = tuple(k for k in a if k not in b) + tuple(k for k in b if k not in a)
    return SimilarityReport(tuple(rows), unmatched)


def default_grid(lo: float = 0.8, hi: float = 1.2, step: float = 0.1) -> tuple[float, ...]:
    n = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(n + 1))


@dataclass(frozen=True)
class SweepCell:
    alpha: float
    beta: float
    metrics: dict = field(default_factory=dict)
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    cells: tuple[SweepCell, ...]

    def cell(self, alpha: float, beta: float) -> SweepCell:
        for c in self.cells:
            if c.alpha == alpha and c.beta == beta:
                return c
        raise KeyError((alpha, beta))

    def to_csv(self) -> str:
        keys = sorted({k for c in self.cells for k in c.metrics})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "beta", *keys, "error"])
        for c in self.cells:
            w.writerow([c.alpha, c.beta, *(repr(c.metrics[k]) if k in c.metrics else "" for k in keys), c.error or ""])
        return buf.getvalue()


Evaluator = Callable[[Checkpoint], Mapping[str, float]]


def sensitivity_sweep(base: Checkpoint, tau_ip, tau_p, alphas: Sequence[float] | None = None,
                      betas: Sequence[float] | None = None, evaluator: Evaluator | None = None) -> SweepResult:
    """Merge and evaluate every (alpha, beta) cell; a failing cell records its
    error and the sweep moves on."""
    alphas = tuple(alphas) if alphas is not None else default_grid()
    betas = tuple(betas) if betas is not None else default_grid()
    if not alphas or not betas:
        raise InvalidArgumentError("alpha and beta grids must be non-empty")
    evaluator = evaluator or frobenius_evaluator
    cells = []
    for a in alphas:
        for b in betas:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    merged = merge(base, tau_ip, tau_p, MergeRecipe(a, b)).checkpoint
                metrics = {k: float(v) for k, v in evaluator(merged).items()}
                cells.append(SweepCell(a, b, metrics))
            except Exception as exc:  # noqa: BLE001 - per-cell isolation is the contract
                cells.append(SweepCell(a, b, {}, f"{type(exc).__name__}: {exc}"))
    return SweepResult(tuple(cells))


def frobenius_evaluator(ckpt: Checkpoint) -> dict[str, float]:
    return {"frobenius": math.sqrt(math.fsum(float(np.sum(np.square(v, dtype=np.float64))) for v in ckpt.values()))}
