"""Balanced top-K retrieval survey and its external-statistics correlation.

For each prompt vector, images are ranked by cosine similarity and the top
k group memberships counted. Group-size imbalance is removed by drawing a
balanced subsample (per_group records per group, uniform without
replacement) before ranking; the count is averaged over many such draws.
Every repetition r uses a sub-seed hashed from (seed, r), so the survey is
reproducible and identical under any parallel schedule. Ties in cosine are
broken by ascending record file order.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bundle import EmbeddingBundle
from .errors import DataError
from .records import ExternalStatTable
from .seeds import subseed
from .stats import ols_r2, pearson

THREADS_ENV = "ASSOC_AUDIT_THREADS"


@dataclass
class RankingConfig:
    k: int
    per_group: int
    repetitions: int
    seed: int

    def __post_init__(self):
        if self.k < 1 or self.per_group < 1:
            raise DataError("k and per_group must be positive")
        if self.repetitions < 1:
            raise DataError("repetitions must be at least 1")


@dataclass
class RankingTable:
    prompts: list[str]
    groups: list[str]
    k: int
    mean_counts: np.ndarray  # (n_prompts, n_groups)

    @property
    def mean_percents(self) -> np.ndarray:
        return 100.0 * self.mean_counts / self.k

    def row(self, prompt: str) -> dict[str, float]:
        i = self.prompts.index(prompt)
        return dict(zip(self.groups, self.mean_counts[i]))

    def to_long_csv(self, header_lines=()) -> str:
        lines = list(header_lines)
        lines.append("prompt,group,mean_count,mean_percent")
        pct = self.mean_percents
        for i, prompt in enumerate(self.prompts):
            for j, group in enumerate(self.groups):
                lines.append(
                    f"{prompt},{group},{float(self.mean_counts[i, j])!r},{float(pct[i, j])!r}"
                )
        return "\n".join(lines) + "\n"

    def to_wide_csv(self, header_lines=()) -> str:
        lines = list(header_lines)
        lines.append("prompt," + ",".join(f"{g}_pct" for g in self.groups))
        pct = self.mean_percents
        for i, prompt in enumerate(self.prompts):
            lines.append(prompt + "," + ",".join(repr(float(v)) for v in pct[i]))
        return "\n".join(lines) + "\n"


@dataclass
class CorrelationReport:
    per_group: list[dict]  # {"group", "rho", "p", "n"}
    r_squared: float


def _group_layout(bundle: EmbeddingBundle):
    order = bundle.group_order()
    code_of = {g: c for c, g in enumerate(order)}
    codes = np.fromiter((code_of[g] for g in bundle.groups), dtype=np.int64, count=len(bundle))
    return order, codes


def _subsample_indices(codes: np.ndarray, order, per_group: int, rng) -> np.ndarray:
    """Balanced index subset, sorted ascending to preserve file order."""
    parts = []
    for c, name in enumerate(order):
        members = np.flatnonzero(codes == c)
        if members.size < per_group:
            raise DataError(
                f"group {name!r} has {members.size} records, fewer than per_group={per_group}"
            )
        parts.append(members[rng.choice(members.size, size=per_group, replace=False)])
    return np.sort(np.concatenate(parts))


def balanced_subsample(bundle: EmbeddingBundle, per_group: int, seed: int) -> EmbeddingBundle:
    """Exactly per_group records per group, drawn uniformly without replacement."""
    if len(bundle) == 0:
        raise DataError("cannot subsample an empty bundle")
    order, codes = _group_layout(bundle)
    idx = _subsample_indices(codes, order, per_group, np.random.default_rng(seed))
    return EmbeddingBundle(
        dim=bundle.dim,
        ids=[bundle.ids[i] for i in idx],
        groups=[bundle.groups[i] for i in idx],
        matrix=bundle.matrix[idx],
        source=bundle.source,
    )


def _similarities(prompt_vec, bundle: EmbeddingBundle) -> np.ndarray:
    v = np.asarray(prompt_vec, dtype=np.float64)
    if v.ndim != 1 or v.size != bundle.dim:
        raise DataError(f"prompt vector has shape {v.shape}, bundle dim is {bundle.dim}")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DataError("prompt vector is a zero vector")
    mat = bundle.vectors_f64()
    sims = (mat @ (v / norm)) / np.linalg.norm(mat, axis=1)
    return np.clip(sims, -1.0, 1.0)


def top_k_counts(prompt_vec, images: EmbeddingBundle, k: int) -> dict[str, int]:
    """Group counts among the k images most similar to the prompt vector."""
    if len(images) == 0:
        raise DataError("cannot rank an empty bundle")
    if k > len(images):
        raise DataError(f"k={k} exceeds record count {len(images)}")
    sims = _similarities(prompt_vec, images)
    top = np.argsort(-sims, kind="stable")[:k]
    order, codes = _group_layout(images)
    counts = np.bincount(codes[top], minlength=len(order))
    return {g: int(counts[c]) for c, g in enumerate(order)}


def _survey_row(sims, idx_matrix, codes, n_groups, k):
    """Summed per-group top-k counts over all subsample repetitions."""
    sub = sims[idx_matrix]  # (reps, m)
    top_cols = np.argsort(-sub, axis=1, kind="stable")[:, :k]
    top_codes = codes[np.take_along_axis(idx_matrix, top_cols, axis=1)]
    reps = idx_matrix.shape[0]
    flat = (top_codes + np.arange(reps)[:, None] * n_groups).ravel()
    per_rep = np.bincount(flat, minlength=reps * n_groups).reshape(reps, n_groups)
    totals = per_rep.sum(axis=0)
    assert totals.sum() == k * reps
    return totals


def ranking_survey(prompts, images: EmbeddingBundle, cfg: RankingConfig,
                   threads: int | None = None) -> RankingTable:
    """Mean top-k group counts per prompt over balanced resamples.

    prompts is a sequence of (label, vector). Repetition r of every prompt
    shares the subsample drawn with sub-seed hash(seed, r); output is
    byte-identical for any thread count.
    """
    if len(images) == 0:
        raise DataError("cannot survey an empty bundle")
    order, codes = _group_layout(images)
    if cfg.k > cfg.per_group * len(order):
        raise DataError(
            f"k={cfg.k} exceeds subsample size {cfg.per_group}x{len(order)} groups"
        )
    prompts = list(prompts)
    idx_matrix = np.empty((cfg.repetitions, cfg.per_group * len(order)), dtype=np.int64)
    for r in range(cfg.repetitions):
        rng = np.random.default_rng(subseed(cfg.seed, "subsample", r))
        idx_matrix[r] = _subsample_indices(codes, order, cfg.per_group, rng)

    def one_prompt(item):
        _, vec = item
        sims = _similarities(vec, images)
        return _survey_row(sims, idx_matrix, codes, len(order), cfg.k)

    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or "1")
    if threads > 1 and len(prompts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            totals = list(pool.map(one_prompt, prompts))
    else:
        totals = [one_prompt(p) for p in prompts]

    mean_counts = np.asarray(totals, dtype=np.float64) / cfg.repetitions
    return RankingTable(
        prompts=[label for label, _ in prompts],
        groups=order,
        k=cfg.k,
        mean_counts=mean_counts,
    )


def _normalize_region(name: str) -> str:
    return " ".join(name.split()).casefold()


def correlate_external(table: RankingTable, external: ExternalStatTable,
                       group_column_map: dict[str, str]) -> CorrelationReport:
    """Per-group Pearson correlation plus a pooled OLS R-squared.

    Regions are aligned by case- and whitespace-insensitive name. Per group,
    the table's mean retrieval percent is correlated against the mapped
    external column. The overall R-squared regresses the external
    percentages, stacked across all groups, on the matching retrieval
    percentages (the four percent columns sum to 100 per region, so they
    cannot all enter one regression jointly with an intercept).
    """
    ext_lookup = {_normalize_region(r): i for i, r in enumerate(external.regions)}
    shared: list[tuple[int, int]] = []
    missing_in_external = []
    for i, prompt in enumerate(table.prompts):
        key = _normalize_region(prompt)
        if key in ext_lookup:
            shared.append((i, ext_lookup[key]))
        else:
            missing_in_external.append(prompt)
    if len(shared) < 3:
        table_keys = {_normalize_region(p) for p in table.prompts}
        extra = [r for r in external.regions if _normalize_region(r) not in table_keys]
        raise DataError(
            "region mismatch: need at least 3 shared regions; "
            f"unmatched table rows {missing_in_external!r}, "
            f"unmatched external rows {extra!r}"
        )
    rows = np.asarray([i for i, _ in shared], dtype=np.int64)
    ext_rows = np.asarray([j for _, j in shared], dtype=np.int64)
    pct = table.mean_percents[rows]

    per_group = []
    stacked_x = []
    stacked_y = []
    for j, group in enumerate(table.groups):
        if group not in group_column_map:
            raise DataError(f"no external column mapped for group {group!r}")
        ext_col = external.column(group_column_map[group])[ext_rows]
        rho, p = pearson(pct[:, j], ext_col)
        per_group.append({"group": group, "rho": rho, "p": p, "n": len(shared)})
        stacked_x.append(pct[:, j])
        stacked_y.append(ext_col)
    r2 = ols_r2(np.concatenate(stacked_x), np.concatenate(stacked_y))
    return CorrelationReport(per_group=per_group, r_squared=r2)
