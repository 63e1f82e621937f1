"""One-class decision tree over a feature dataset.

Each node owns an axis-aligned box; a split narrows one dimension to a set
of intervals, one child per interval. Leaves imply hyper-rectangles whose
union is the learned safe set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import density
from .errors import DomainError, ParseError, SchemaError
from .features import Dataset, FeatureBounds, feature_bounds


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 4
    min_samples: int = 10
    grid_size: int = 256
    rel_floor: float = 0.05
    min_gain: float = 0.05
    bandwidth: float | None = None  # None = Silverman per node/dimension

    def __post_init__(self):
        if self.max_depth < 0:
            raise DomainError("max_depth must be >= 0")
        if self.min_samples < 1 or self.grid_size < 16:
            raise DomainError("min_samples >= 1 and grid_size >= 16 required")
        if not (0.0 < self.rel_floor < 1.0) or not (0.0 < self.min_gain < 1.0):
            raise DomainError("rel_floor and min_gain must lie in (0, 1)")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise DomainError("bandwidth override must be positive")


@dataclass
class TreeNode:
    box_lo: np.ndarray
    box_hi: np.ndarray
    sample_count: int
    split_dim: int | None = None
    children: list[tuple[tuple[float, float], "TreeNode"]] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.split_dim is None

    def validate(self) -> None:
        if self.is_leaf != (not self.children):
            raise SchemaError("leaf nodes must have no children and vice versa")
        if self.split_dim is not None:
            j = self.split_dim
            prev_r = None
            for (l, r), child in self.children:
                if l > r:
                    raise SchemaError("child interval with L > R")
                if l < self.box_lo[j] - 1e-12 or r > self.box_hi[j] + 1e-12:
                    raise SchemaError("child interval outside parent box")
                if prev_r is not None and l < prev_r:
                    raise SchemaError("child intervals overlap or are unsorted")
                prev_r = r
                child.validate()


@dataclass
class Tree:
    root: TreeNode
    dim: int
    config: TreeConfig
    bounds: FeatureBounds


def best_split(points: np.ndarray, box_lo, box_hi, config: TreeConfig):
    """Pick the dimension whose mode-based partition covers the least width.

    Returns (dim, IntervalSet) or None when no dimension clears the
    min-gain bar. The returned intervals are tree-ready: adjacent intervals
    meet at the density cut between them so child boxes tile the parent,
    while the outer edges stay snapped to the observed samples. The
    impurity gate is scored on the sample-snapped intervals.
    """
    points = np.asarray(points, dtype=float)
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)
    if len(points) < 1:
        raise DomainError("best_split needs at least one point")
    best = None  # (impurity, dim, tiled IntervalSet)
    for j in range(points.shape[1]):
        width = box_hi[j] - box_lo[j]
        if width <= 0:
            continue
        samples = points[:, j]
        if config.bandwidth is not None:
            h = config.bandwidth
        elif samples.size >= 2:
            h = density.bandwidth_silverman(samples)
        else:
            continue
        curve = density.kde_estimate(samples, h, config.grid_size)
        modes = density.detect_modes(curve, config.rel_floor)
        snapped, cuts = density.partition_with_cuts(samples, curve, modes, j)
        score = density.impurity(snapped, box_lo[j], box_hi[j])
        if score > 1.0 - config.min_gain:
            continue
        if best is None or score < best[0]:
            tiled = _tile_intervals(snapped, cuts)
            best = (score, j, tiled)
    if best is None:
        return None
    return best[1], best[2]


def _tile_intervals(snapped: density.IntervalSet, cuts) -> density.IntervalSet:
    """Move interior interval edges to the density cuts between them."""
    ivs = list(snapped.intervals)
    if len(ivs) > 1:
        tiled = []
        for i, (lo, hi) in enumerate(ivs):
            new_lo = cuts[i - 1] if i > 0 else lo
            new_hi = cuts[i] if i < len(ivs) - 1 else hi
            tiled.append((new_lo, new_hi))
        ivs = tiled
    return density.IntervalSet(intervals=tuple(ivs), dim=snapped.dim)


def build_tree(dataset: Dataset, config: TreeConfig | None = None) -> Tree:
    """Depth-first recursive construction; deterministic for fixed inputs."""
    config = config or TreeConfig()
    if dataset.size < config.min_samples:
        raise DomainError(
            f"dataset has {dataset.size} points, fewer than min_samples={config.min_samples}"
        )
    bounds = feature_bounds(dataset)
    root = _grow(dataset.points, bounds.lo.copy(), bounds.hi.copy(), 0, config)
    tree = Tree(root=root, dim=dataset.dim, config=config, bounds=bounds)
    tree.root.validate()
    return tree


def _grow(points, box_lo, box_hi, depth, config) -> TreeNode:
    node = TreeNode(box_lo=box_lo, box_hi=box_hi, sample_count=len(points))
    if depth >= config.max_depth or len(points) < config.min_samples:
        return node
    found = best_split(points, box_lo, box_hi, config)
    if found is None:
        return node
    j, intervals = found
    node.split_dim = j
    for lo, hi in intervals.intervals:
        mask = (points[:, j] >= lo) & (points[:, j] <= hi)
        child_lo = box_lo.copy()
        child_hi = box_hi.copy()
        child_lo[j], child_hi[j] = lo, hi
        child = _grow(points[mask], child_lo, child_hi, depth + 1, config)
        node.children.append(((lo, hi), child))
    return node


def contains(tree: Tree, point) -> bool:
    """True iff the point lies in at least one leaf box (closed intervals)."""
    p = np.asarray(point, dtype=float)
    if p.shape != (tree.dim,):
        raise DomainError(f"point has shape {p.shape}, expected ({tree.dim},)")
    return _node_contains(tree.root, p)


def _node_contains(node: TreeNode, p: np.ndarray) -> bool:
    if np.any(p < node.box_lo) or np.any(p > node.box_hi):
        return False
    if node.is_leaf:
        return True
    j = node.split_dim
    for (lo, hi), child in node.children:
        if lo <= p[j] <= hi and _node_contains(child, p):
            return True
    return False


def leaf_boxes(tree: Tree) -> list[tuple[np.ndarray, np.ndarray]]:
    """(lo, hi) pairs of every leaf box in depth-first order."""
    out: list[tuple[np.ndarray, np.ndarray]] = []
    _collect_leaves(tree.root, out)
    return out


def _collect_leaves(node: TreeNode, out) -> None:
    if node.is_leaf:
        out.append((node.box_lo.copy(), node.box_hi.copy()))
        return
    for _, child in node.children:
        _collect_leaves(child, out)


def _node_to_dict(node: TreeNode) -> dict:
    return {
        "box": {"lo": node.box_lo.tolist(), "hi": node.box_hi.tolist()},
        "split_dim": node.split_dim,
        "children": [
            {"L": l, "R": r, "node": _node_to_dict(child)}
            for (l, r), child in node.children
        ],
        "sample_count": node.sample_count,
    }


def _node_from_dict(data: dict) -> TreeNode:
    try:
        node = TreeNode(
            box_lo=np.asarray(data["box"]["lo"], dtype=float),
            box_hi=np.asarray(data["box"]["hi"], dtype=float),
            sample_count=int(data["sample_count"]),
            split_dim=data["split_dim"],
        )
        for entry in data["children"]:
            node.children.append(
                ((float(entry["L"]), float(entry["R"])), _node_from_dict(entry["node"]))
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed tree node: {exc}") from exc
    return node


def tree_to_json(tree: Tree) -> str:
    doc = {
        "k": tree.dim,
        "config": {
            "max_depth": tree.config.max_depth,
            "min_samples": tree.config.min_samples,
            "grid_size": tree.config.grid_size,
            "rel_floor": tree.config.rel_floor,
            "min_gain": tree.config.min_gain,
            "bandwidth": tree.config.bandwidth,
        },
        "bounds": {"lo": tree.bounds.lo.tolist(), "hi": tree.bounds.hi.tolist()},
        "root": _node_to_dict(tree.root),
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def tree_from_json(text: str) -> Tree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid tree JSON: {exc.msg} at position {exc.pos}") from exc
    try:
        config = TreeConfig(**doc["config"])
        bounds = FeatureBounds(
            lo=np.asarray(doc["bounds"]["lo"], dtype=float),
            hi=np.asarray(doc["bounds"]["hi"], dtype=float),
        )
        tree = Tree(
            root=_node_from_dict(doc["root"]),
            dim=int(doc["k"]),
            config=config,
            bounds=bounds,
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed tree document: {exc}") from exc
    tree.root.validate()
    return tree
