"""Monte Carlo experiment runner: seeded trials, sweeps, CSV aggregation.

Everything an experiment emits is a pure function of (config, master_seed).
Each trial derives its own 64-bit seed by SplitMix-mixing the master seed
with the trial index, and independent sub-streams for graph, signature,
defective sampling and noise from that.  Trials at one sweep point may run
across processes; aggregation sums integer counters, so worker count never
changes results.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .decoder import peel, singleton_only_decode
from .ecc import IDENTITY, CodeSpec
from .encoder import NOISELESS, Measurements, NoiseModel, TestingScheme, measure
from .graph import (
    GraphParams,
    graph_from_permutation,
    round_up_bins,
    sample_left_regular,
    sample_regular,
)
from .prp import mix64
from .signature import SignatureMatrix, SignatureParams

VARIANTS = ("noiseless-peel", "singleton-only", "robust-peel")

CSV_COLUMNS = (
    "variant,N,K,ell,s,M,r,m,q,code,e,trials,"
    "frac_unidentified,ci_low,ci_high,false_pos_rate,master_seed"
)

# sub-stream tags hung off the per-trial seed
_TAG_GRAPH, _TAG_SIG, _TAG_DEFECTIVES, _TAG_NOISE = 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str
    n_items: int
    n_defective: int
    left_degree: int | None = None
    sections: int = 1
    c_grid: tuple[float, ...] | None = None
    c: float | None = None
    e_grid: tuple[int, ...] | None = None
    alpha: float | None = None
    code: CodeSpec = field(default_factory=lambda: IDENTITY)
    noise_q: float = 0.0
    n_trials: int = 0
    master_seed: int = 0
    backend: str = "auto"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.n_items < 1 or not 0 <= self.n_defective < self.n_items:
            raise ConfigError("need n_items >= 1 and 0 <= n_defective < n_items")
        if self.n_trials < 0:
            raise ConfigError("trial count cannot be negative")
        if self.variant == "noiseless-peel":
            if not self.c_grid:
                raise ConfigError("noiseless-peel needs c_grid")
            if self.left_degree is None:
                raise ConfigError("noiseless-peel needs left_degree")
            if not self.code.is_identity:
                raise ConfigError("noiseless-peel uses the identity code")
        elif self.variant == "singleton-only":
            if self.alpha is None and not self.c_grid:
                raise ConfigError("singleton-only needs alpha or c_grid")
            if self.alpha is None and self.left_degree is None:
                raise ConfigError("singleton-only with c_grid needs left_degree")
            if not self.code.is_identity:
                raise ConfigError("singleton-only uses the identity code")
        else:  # robust-peel
            if self.code.is_identity:
                raise ConfigError("robust-peel needs a non-identity code")
            if not 0.0 < self.noise_q < 0.5:
                raise ConfigError("robust-peel needs noise_q in (0, 1/2)")
            if self.c is None:
                raise ConfigError("robust-peel needs a fixed c")
            if not self.e_grid:
                raise ConfigError("robust-peel needs e_grid")
            if self.left_degree is None:
                raise ConfigError("robust-peel needs left_degree")

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant,
            "n_items": self.n_items,
            "n_defective": self.n_defective,
            "sections": self.sections,
            "code": self.code.to_dict(),
            "noise_q": self.noise_q,
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "backend": self.backend,
        }
        if self.left_degree is not None:
            d["left_degree"] = self.left_degree
        if self.c_grid is not None:
            d["c_grid"] = list(self.c_grid)
        if self.c is not None:
            d["c"] = self.c
        if self.e_grid is not None:
            d["e_grid"] = list(self.e_grid)
        if self.alpha is not None:
            d["alpha"] = self.alpha
        return d

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        try:
            return ExperimentConfig(
                variant=d["variant"],
                n_items=int(d["n_items"]),
                n_defective=int(d["n_defective"]),
                left_degree=int(d["left_degree"]) if "left_degree" in d else None,
                sections=int(d.get("sections", 1)),
                c_grid=tuple(float(x) for x in d["c_grid"]) if "c_grid" in d else None,
                c=float(d["c"]) if "c" in d else None,
                e_grid=tuple(int(x) for x in d["e_grid"]) if "e_grid" in d else None,
                alpha=float(d["alpha"]) if "alpha" in d else None,
                code=CodeSpec.from_dict(d.get("code", {"kind": "identity"})),
                noise_q=float(d.get("noise_q", 0.0)),
                n_trials=int(d.get("n_trials", 0)),
                master_seed=int(d.get("master_seed", 0)),
                backend=d.get("backend", "auto"),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing field {exc.args[0]!r}") from None

    @staticmethod
    def from_json(path_or_str) -> "ExperimentConfig":
        if isinstance(path_or_str, str) and path_or_str.lstrip().startswith("{"):
            return ExperimentConfig.from_dict(json.loads(path_or_str))
        with open(path_or_str) as fh:
            return ExperimentConfig.from_dict(json.load(fh))


@dataclass(frozen=True)
class SweepPoint:
    """One resolved point of the sweep axis."""

    axis: str  # "c" or "e"
    value: float
    left_degree: int
    n_bins: int
    right_degree: int
    sections: int
    code: CodeSpec
    noise_q: float


@dataclass
class TrialResult:
    n_unidentified: int
    n_false_positives: int
    n_tests: int
    runtime_s: float


def resolve_points(config: ExperimentConfig) -> list[SweepPoint]:
    pts: list[SweepPoint] = []
    n, k = config.n_items, config.n_defective
    if config.variant == "robust-peel":
        m_bins, r = round_up_bins(n, config.left_degree, math.ceil(config.c * k))
        for e in config.e_grid:
            code = replace(config.code, n_sym=config.code.k_sym + 2 * int(e))
            pts.append(
                SweepPoint("e", float(e), config.left_degree, m_bins, r,
                           config.sections, code, config.noise_q)
            )
        return pts
    if config.variant == "singleton-only" and config.alpha is not None:
        from .analysis import singleton_only_params

        ell, r, m_bins = singleton_only_params(n, max(k, 2), config.alpha)
        return [SweepPoint("c", m_bins / k if k else float(m_bins), ell, m_bins, r,
                           config.sections, IDENTITY, 0.0)]
    for c in config.c_grid:
        m_bins, r = round_up_bins(n, config.left_degree, math.ceil(c * k))
        pts.append(
            SweepPoint("c", float(c), config.left_degree, m_bins, r,
                       config.sections, IDENTITY, 0.0)
        )
    return pts


def trial_seed(master_seed: int, trial_index: int) -> int:
    return mix64(master_seed, trial_index)


def sample_distinct(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Uniform k-subset of [0, n) in O(k) expected time (k << n)."""
    if k > n:
        raise ValueError("cannot sample more items than exist")
    if k * 4 >= n:
        return np.sort(rng.permutation(n)[:k]).astype(np.int64)
    chosen: set[int] = set()
    while len(chosen) < k:
        for v in rng.integers(0, n, size=k - len(chosen), dtype=np.int64):
            chosen.add(int(v))
    return np.array(sorted(chosen), dtype=np.int64)


def build_scheme(config: ExperimentConfig, point: SweepPoint, seed: int) -> TestingScheme:
    params = GraphParams(
        n_items=config.n_items,
        n_bins=point.n_bins,
        left_degree=point.left_degree,
        right_degree=point.right_degree,
        seed=mix64(seed, _TAG_GRAPH),
    )
    graph = sample_regular(params, backend=config.backend)
    sig = SignatureMatrix(
        SignatureParams(
            n_columns=point.right_degree,
            sections=point.sections,
            code=point.code,
            seed=mix64(seed, _TAG_SIG),
        )
    )
    return TestingScheme(graph, sig)


def run_trial(config: ExperimentConfig, trial_index: int, point_index: int = 0) -> TrialResult:
    point = resolve_points(config)[point_index]
    seed = trial_seed(config.master_seed, trial_index)
    start = time.perf_counter()
    rng = np.random.default_rng(mix64(seed, _TAG_DEFECTIVES))
    defectives = sample_distinct(rng, config.n_items, config.n_defective)
    scheme = build_scheme(config, point, seed)
    noise = (
        NoiseModel("bsc", point.noise_q, seed=mix64(seed, _TAG_NOISE))
        if point.noise_q > 0
        else NOISELESS
    )
    meas = measure(scheme, defectives, noise)
    if config.variant == "singleton-only":
        result = singleton_only_decode(scheme, meas)
    else:
        result = peel(scheme, meas, max_pops=2 * max(1, config.n_defective))
    truth = set(int(v) for v in defectives)
    recovered = result.recovered
    return TrialResult(
        n_unidentified=len(truth - recovered),
        n_false_positives=len(recovered - truth),
        n_tests=scheme.n_tests,
        runtime_s=time.perf_counter() - start,
    )


def _point_counts(args) -> tuple[int, int]:
    config_dict, point_index, lo, hi = args
    config = ExperimentConfig.from_dict(config_dict)
    unid = fp = 0
    for t in range(lo, hi):
        res = run_trial(config, t, point_index)
        unid += res.n_unidentified
        fp += res.n_false_positives
    return unid, fp


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def run_sweep(config: ExperimentConfig, n_workers: int = 1) -> list[dict]:
    """One aggregate row per sweep point, in axis order."""
    rows = []
    points = resolve_points(config)
    for pi, point in enumerate(points):
        unid = fp = 0
        if config.n_trials > 0:
            if n_workers and n_workers > 1:
                chunk = max(1, math.ceil(config.n_trials / (4 * n_workers)))
                jobs = [
                    (config.to_dict(), pi, lo, min(lo + chunk, config.n_trials))
                    for lo in range(0, config.n_trials, chunk)
                ]
                with ProcessPoolExecutor(max_workers=n_workers) as pool:
                    for u, f in pool.map(_point_counts, jobs):
                        unid += u
                        fp += f
            else:
                unid, fp = _point_counts((config.to_dict(), pi, 0, config.n_trials))
        denom = config.n_trials * max(1, config.n_defective)
        frac = unid / denom if denom else 0.0
        lo_ci, hi_ci = wilson_interval(unid, denom) if config.n_trials else (0.0, 1.0)
        n_msg = max(1, (point.right_degree - 1).bit_length())
        n_seg = point.code.build(n_msg).n_seg
        m = 2 * point.sections * point.n_bins * n_seg
        rows.append(
            {
                "variant": config.variant,
                "N": config.n_items,
                "K": config.n_defective,
                "ell": point.left_degree,
                "s": point.sections,
                "M": point.n_bins,
                "r": point.right_degree,
                "m": m,
                "q": point.noise_q,
                "code": point.code.label(),
                "e": int(point.value) if point.axis == "e" else "",
                "trials": config.n_trials,
                "frac_unidentified": frac,
                "ci_low": lo_ci,
                "ci_high": hi_ci,
                "false_pos_rate": fp / denom if denom else 0.0,
                "master_seed": config.master_seed,
            }
        )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    lines = [CSV_COLUMNS]
    for row in rows:
        fields = []
        for col in CSV_COLUMNS.split(","):
            val = row[col]
            fields.append(f"{val:.10g}" if isinstance(val, float) else str(val))
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


# --- scheme description files -------------------------------------------------


def scheme_to_dict(scheme: TestingScheme, graph_seed: int = 0, sig_seed: int = 0) -> dict:
    graph, sig = scheme.graph, scheme.sig
    d = {
        "n_items": graph.n_items,
        "n_bins": graph.n_bins,
        "left_degree": graph.left_degree,
        "sections": sig.sections,
        "code": sig.params.code.to_dict(),
        "backend": graph.backend,
        "graph_seed": graph_seed,
        "sig_seed": sig_seed,
    }
    if graph.right_degree is not None:
        d["right_degree"] = graph.right_degree
    else:
        d["right_degree"] = sig.n_columns
    if graph.backend == "explicit-permutation":
        d["perm"] = [int(x) for x in graph._perm.perm]
    return d


def scheme_from_dict(d: dict) -> TestingScheme:
    backend = d.get("backend", "explicit-permutation")
    code = CodeSpec.from_dict(d.get("code", {"kind": "identity"}))
    sig = SignatureMatrix(
        SignatureParams(
            n_columns=int(d["right_degree"]),
            sections=int(d.get("sections", 1)),
            code=code,
            seed=int(d.get("sig_seed", 0)),
        )
    )
    if backend == "left-regular-baseline":
        graph = sample_left_regular(
            int(d["n_items"]), int(d["n_bins"]), int(d["left_degree"]),
            seed=int(d.get("graph_seed", 0)),
        )
        return TestingScheme(graph, sig)
    params = GraphParams(
        n_items=int(d["n_items"]),
        n_bins=int(d["n_bins"]),
        left_degree=int(d["left_degree"]),
        right_degree=int(d["right_degree"]),
        seed=int(d.get("graph_seed", 0)),
    )
    if "perm" in d:
        graph = graph_from_permutation(params, d["perm"])
    elif backend == "pseudorandom-permutation":
        graph = sample_regular(params, backend="feistel")
    else:
        graph = sample_regular(params, backend="explicit")
    return TestingScheme(graph, sig)
