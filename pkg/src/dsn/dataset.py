"""Collections of items to summarize: loading, validation, synthesis.

A collection is a ground set of items, each carrying a raw feature vector
and a sparse visual-word histogram, plus one or more reference summaries
and optionally query sets. On disk a collection is a single JSON document
(features inline or in a sidecar CSV) and a dataset is a directory with a
``manifest.json`` listing the collection files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, DimensionError, IdRangeError
from .numerics import seeded_rng
from .vrouge import NormConstants, norm_constants

# Synthetic-data shape constants. Features mix three positive structures: a
# dataset-wide base offset that flattens raw cosine similarities, a strong
# decoy clustering uncorrelated with the word labels, and weak sparse
# cluster signatures that carry them. An untrained kernel is dominated by
# the decoys, so covering the true clusters requires learning the
# embedding; the sparse signatures keep different clusters' identifying
# directions (used as queries) nearly orthogonal. Magnitudes keep
# Xavier-initialized activations out of sigmoid saturation.
_BASE_RANGE = (1.0, 2.0)
_DECOY_SPREAD = 1.5
_SIGNATURE_AMPLITUDE = (0.3, 0.6)
_NOISE_STD = 0.075
_NORM_SAMPLES = 1000


def _cluster_signatures(rng, clusters: int, dim: int) -> np.ndarray:
    """Sparse positive per-cluster directions on random coordinate supports."""
    support = max(1, dim // 8)
    out = np.zeros((clusters, dim))
    for c in range(clusters):
        coords = rng.choice(dim, size=support, replace=False)
        out[c, coords] = rng.uniform(*_SIGNATURE_AMPLITUDE, size=support)
    return out


@dataclass
class Item:
    """One ground-set element."""

    id: int
    raw_features: np.ndarray
    word_counts: dict[int, int]


@dataclass
class QuerySet:
    """A named bundle of query feature vectors.

    Query vectors live in the embedding output space (they are compared
    directly against embedded items), must be nonnegative, and are
    L2-normalized before kernel computation.
    """

    label: str
    features: np.ndarray


@dataclass
class Collection:
    name: str
    features: np.ndarray  # n x d raw item features
    word_counts: list[dict[int, int]]
    summaries: list[frozenset[int]]
    queries: list[QuerySet] = field(default_factory=list)
    vrouge_norm: NormConstants | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def item(self, i: int) -> Item:
        return Item(id=i, raw_features=self.features[i], word_counts=self.word_counts[i])

    def validate(self) -> "Collection":
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataFormatError(f"{self.name}: features must be a nonempty 2-d array")
        if not np.all(np.isfinite(self.features)):
            raise DataFormatError(f"{self.name}: features contain non-finite values")
        if len(self.word_counts) != self.n:
            raise DataFormatError(
                f"{self.name}: {len(self.word_counts)} word histograms for {self.n} items"
            )
        for i, hist in enumerate(self.word_counts):
            for w, c in hist.items():
                if not isinstance(w, int) or not isinstance(c, int) or c < 0:
                    raise DataFormatError(f"{self.name}: item {i} has invalid word count {w}:{c}")
        for s, summary in enumerate(self.summaries):
            for v in summary:
                if not 0 <= v < self.n:
                    raise IdRangeError(
                        f"{self.name}: summary {s} references item {v}, ground set has {self.n} items"
                    )
        for q in self.queries:
            if q.features.ndim != 2 or q.features.shape[0] < 1:
                raise DataFormatError(f"{self.name}: query {q.label!r} must be a nonempty 2-d array")
            if not np.all(np.isfinite(q.features)):
                raise DataFormatError(f"{self.name}: query {q.label!r} has non-finite features")
            if np.any(q.features < 0):
                raise DataFormatError(f"{self.name}: query {q.label!r} has negative features")
        return self


def _parse_word_counts(raw, name: str) -> list[dict[int, int]]:
    if not isinstance(raw, list):
        raise DataFormatError(f"{name}: word_counts must be a list")
    out = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise DataFormatError(f"{name}: word_counts[{i}] must be an object")
        hist = {}
        for w, c in entry.items():
            try:
                wid = int(w)
                cnt = int(c)
            except (TypeError, ValueError):
                raise DataFormatError(f"{name}: word_counts[{i}] has non-integer entry {w}:{c}")
            if cnt < 0:
                raise DataFormatError(f"{name}: word_counts[{i}] has negative count for word {wid}")
            hist[wid] = cnt
        out.append(hist)
    return out


def _parse_summaries(raw, name: str) -> list[frozenset[int]]:
    if not isinstance(raw, list):
        raise DataFormatError(f"{name}: summaries must be a list of id lists")
    out = []
    for s, ids in enumerate(raw):
        if not isinstance(ids, list) or not all(isinstance(v, int) for v in ids):
            raise DataFormatError(f"{name}: summary {s} must be a list of integer ids")
        if len(set(ids)) != len(ids):
            raise DataFormatError(f"{name}: summary {s} contains duplicate ids")
        out.append(frozenset(ids))
    return out


def load_collection(path) -> Collection:
    """Read and validate one collection JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: cannot parse collection file: {exc}")
    if not isinstance(raw, dict):
        raise DataFormatError(f"{path}: top-level JSON value must be an object")
    name = raw.get("name") or path.stem
    try:
        dim = int(raw["dim"])
    except (KeyError, TypeError, ValueError):
        raise DataFormatError(f"{name}: missing or invalid 'dim'")

    if "features" in raw:
        try:
            features = np.asarray(raw["features"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"{name}: bad inline features: {exc}")
    elif "features_csv" in raw:
        csv_path = path.parent / raw["features_csv"]
        try:
            features = np.loadtxt(csv_path, delimiter=",", ndmin=2, dtype=np.float64)
        except (OSError, ValueError) as exc:
            raise DataFormatError(f"{name}: cannot read features CSV {csv_path}: {exc}")
    else:
        raise DataFormatError(f"{name}: needs 'features' or 'features_csv'")
    if features.ndim != 2:
        raise DataFormatError(f"{name}: features must be a 2-d array")
    if features.shape[1] != dim:
        raise DimensionError(
            f"{name}: declared dim {dim} but feature rows have {features.shape[1]} columns"
        )

    word_counts = _parse_word_counts(raw.get("word_counts", [{} for _ in range(len(features))]), name)
    summaries = _parse_summaries(raw.get("summaries", []), name)

    queries = []
    for q in raw.get("queries", []):
        if not isinstance(q, dict) or "features" not in q:
            raise DataFormatError(f"{name}: each query needs a 'features' field")
        try:
            qf = np.asarray(q["features"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"{name}: bad query features: {exc}")
        queries.append(QuerySet(label=str(q.get("label", f"query-{len(queries)}")), features=qf))

    norm = None
    if "vrouge_norm" in raw and raw["vrouge_norm"] is not None:
        nv = raw["vrouge_norm"]
        try:
            norm = NormConstants(
                r_random=float(nv["r_random"]),
                r_human=float(nv["r_human"]),
                samples=int(nv["samples"]),
                seed=int(nv["seed"]),
                k=int(nv["k"]),
            )
        except (KeyError, TypeError, ValueError):
            raise DataFormatError(f"{name}: invalid vrouge_norm block")

    return Collection(
        name=name,
        features=features,
        word_counts=word_counts,
        summaries=summaries,
        queries=queries,
        vrouge_norm=norm,
    ).validate()


def collection_to_dict(coll: Collection) -> dict:
    doc = {
        "name": coll.name,
        "dim": int(coll.dim),
        "features": coll.features.tolist(),
        "word_counts": [{str(w): int(c) for w, c in sorted(h.items())} for h in coll.word_counts],
        "summaries": [sorted(s) for s in coll.summaries],
    }
    if coll.queries:
        doc["queries"] = [
            {"label": q.label, "features": np.asarray(q.features, dtype=np.float64).tolist()}
            for q in coll.queries
        ]
    if coll.vrouge_norm is not None:
        nv = coll.vrouge_norm
        doc["vrouge_norm"] = {
            "r_random": nv.r_random,
            "r_human": nv.r_human,
            "samples": nv.samples,
            "seed": nv.seed,
            "k": nv.k,
        }
    return doc


def save_collection(coll: Collection, path) -> Path:
    """Write a collection in canonical form (sorted keys, inline features)."""
    path = Path(path)
    path.write_text(json.dumps(collection_to_dict(coll), sort_keys=True, separators=(",", ":")) + "\n")
    return path


def save_dataset(collections, root, budget: int | None = None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for coll in collections:
        fname = f"{coll.name}.json"
        save_collection(coll, root / fname)
        names.append(fname)
    manifest = {"collections": names}
    if budget is not None:
        manifest["budget"] = int(budget)
    (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return root


def load_manifest(root) -> dict:
    root = Path(root)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{root}: cannot read manifest.json: {exc}")
    if not isinstance(manifest, dict) or "collections" not in manifest:
        raise DataFormatError(f"{root}: manifest.json must list 'collections'")
    return manifest


def load_dataset(root) -> list[Collection]:
    """Load every collection listed in a dataset directory's manifest."""
    root = Path(root)
    manifest = load_manifest(root)
    return [load_collection(root / fname) for fname in manifest["collections"]]


def _medoid(features: np.ndarray, members: np.ndarray) -> int:
    sub = features[members]
    dists = np.sqrt(((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=-1))
    return int(members[int(np.argmin(dists.sum(axis=1)))])


def _generic_summary(features, assign, clusters, budget) -> frozenset[int]:
    """Medoids of the first `budget` clusters; extra slots cycle through
    clusters by distance rank when the budget exceeds the cluster count."""
    chosen = [_medoid(features, np.where(assign == c)[0]) for c in range(min(clusters, budget))]
    if budget > clusters:
        ranked = []
        for c in range(clusters):
            members = np.where(assign == c)[0]
            center = features[members].mean(axis=0)
            order = members[np.argsort(np.linalg.norm(features[members] - center, axis=1), kind="stable")]
            ranked.append([int(v) for v in order if int(v) not in chosen])
        c = 0
        while len(chosen) < budget:
            if ranked[c % clusters]:
                chosen.append(ranked[c % clusters].pop(0))
            c += 1
    return frozenset(chosen)


def make_synthetic_dataset(
    *,
    collections: int,
    items: int,
    dim: int,
    clusters: int,
    words: int,
    budget: int,
    seed: int,
    queries: int = 0,
) -> list[Collection]:
    """Planted-cluster collections, a pure function of the argument tuple.

    Items are Gaussian draws around per-cluster centers that share a large
    positive dataset-wide offset. Word histograms are one-hot in the cluster
    id plus optional noise words. Generic collections get one reference
    summary (the medoids of the budgeted clusters); with ``queries > 0``
    each collection instead gets that many query sets, each paired by index
    with a reference summary of the items nearest the queried cluster
    center.
    """
    if collections < 1:
        raise ConfigError("need at least one collection")
    if items < 1 or dim < 1:
        raise ConfigError("items and dim must be positive")
    if clusters < 1 or clusters > items:
        raise ConfigError(f"clusters must lie in [1, items], got {clusters}")
    if not 1 <= budget <= items:
        raise ConfigError(f"budget must lie in [1, items], got {budget}")
    if words < 0 or queries < 0:
        raise ConfigError("words and queries must be nonnegative")

    rng = seeded_rng(seed)
    # The geometry (base offset, decoy and true cluster centers) is shared by
    # the whole dataset, mirroring collections that went through one feature
    # extractor; collections differ in their items, noise, and summaries.
    base = rng.uniform(_BASE_RANGE[0], _BASE_RANGE[1], size=dim)
    decoy_centers = rng.uniform(0.0, _DECOY_SPREAD, size=(clusters, dim))
    true_centers = _cluster_signatures(rng, clusters, dim)
    out = []
    for c in range(collections):
        assign = np.arange(items) % clusters
        decoy_assign = (np.arange(items) // clusters + c) % clusters
        features = (
            base
            + decoy_centers[decoy_assign]
            + true_centers[assign]
            + rng.normal(0.0, _NOISE_STD, size=(items, dim))
        )

        word_counts: list[dict[int, int]] = [{int(assign[i]): 1} for i in range(items)]
        if words > 0:
            for i in range(items):
                for w in rng.integers(clusters, clusters + words, size=int(rng.integers(0, 3))):
                    word_counts[i][int(w)] = word_counts[i].get(int(w), 0) + 1

        query_sets: list[QuerySet] = []
        if queries > 0:
            summaries = []
            for j in range(queries):
                target = (c * queries + j) % clusters
                members = np.where(assign == target)[0]
                center = features[members].mean(axis=0)
                order = members[
                    np.argsort(np.linalg.norm(features[members] - center, axis=1), kind="stable")
                ]
                summaries.append(frozenset(int(v) for v in order[: min(budget, len(members))]))
                # The query points along the cluster's identifying direction
                # (its true center), not the shared base/decoy mass.
                direction = true_centers[target] / np.linalg.norm(true_centers[target])
                query_sets.append(QuerySet(label=f"cluster-{target}", features=direction[None, :]))
        else:
            summaries = [_generic_summary(features, assign, clusters, budget)]

        norm_seed = int(rng.integers(0, 2**63))
        coll = Collection(
            name=f"synthetic-{c:02d}",
            features=features,
            word_counts=word_counts,
            summaries=summaries,
            queries=query_sets,
        ).validate()
        coll.vrouge_norm = norm_constants(coll, budget, samples=_NORM_SAMPLES, seed=norm_seed)
        out.append(coll)
    return out


def gen_synthetic(
    out_dir,
    *,
    collections: int,
    items: int,
    dim: int,
    clusters: int,
    words: int,
    budget: int,
    seed: int,
    queries: int = 0,
) -> Path:
    """Generate a synthetic dataset directory. Deterministic given the seed."""
    cols = make_synthetic_dataset(
        collections=collections,
        items=items,
        dim=dim,
        clusters=clusters,
        words=words,
        budget=budget,
        seed=seed,
        queries=queries,
    )
    return save_dataset(cols, out_dir, budget=budget)


@dataclass
class Split:
    train: list[Collection]
    validation: Collection
    test: Collection


def loocv_splits(collections: list[Collection]) -> list[Split]:
    """Leave-one-out folds: each collection is the test set exactly once,
    with the next collection (cyclically) held out for validation."""
    cols = list(collections)
    if len(cols) < 3:
        raise ValueError(f"leave-one-out needs at least 3 collections, got {len(cols)}")
    splits = []
    for i in range(len(cols)):
        j = (i + 1) % len(cols)
        train = [c for t, c in enumerate(cols) if t not in (i, j)]
        splits.append(Split(train=train, validation=cols[j], test=cols[i]))
    return splits
