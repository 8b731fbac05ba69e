"""
Scaling benchmark: wall time of the perturbative assembly against the dense
eigendecomposition of the n^2 x n^2 super-operator, with log-log slope fits.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional
import hashlib
import logging
import os
import platform
import sys
import time

import numpy as np
import scipy
from scipy import linalg, stats

from .config import MAX_N_BENCH_ORACLE, MAX_N_BENCH_PERTURB
from .dqw import co_observation, mixing_coefficients, assemble
from .errors import SizeLimitError
from .families import DEFAULT_Q, FAMILIES, sample_graph
from .graph import Graph, build_laplacian, eigendecompose
from .lindblad import build_superoperator
from .timestamp import Timestamp

logger = logging.getLogger(__name__)

# Two-sided confidence level of the slope intervals
CONFIDENCE = 0.95


def median_time(func:Callable, repeats:int=3, warmup:int=1) -> float:
    """Median wall time of `repeats` calls after `warmup` untimed calls."""

    assert repeats >= 3, f"Timings are the median of at least 3 repetitions, not {repeats}"

    for _ in range(warmup):
        func()

    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        timings.append(time.perf_counter() - start)

    return float(np.median(timings))


def fit_slope(sizes, timings) -> Optional[dict]:
    """
    Least-squares slope of log(time) against log(n) with a t-based
    confidence interval. Needs two points; the interval needs three.
    """

    sizes = np.asarray(sizes, dtype=float)
    timings = np.asarray(timings, dtype=float)

    if len(sizes) < 2:
        return None

    fit = stats.linregress(np.log(sizes), np.log(timings))

    dof = len(sizes) - 2
    if dof > 0:
        half_width = float(stats.t.ppf(0.5 + CONFIDENCE / 2, dof) * fit.stderr)
        ci = [float(fit.slope) - half_width, float(fit.slope) + half_width]
    else:
        ci = None

    return dict(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        stderr=float(fit.stderr) if dof > 0 else None,
        ci=ci,
        confidence=CONFIDENCE,
        points=len(sizes)
    )


def digest(array:np.ndarray) -> str:
    """SHA-256 of the raw bytes of an array."""
    return hashlib.sha256(np.ascontiguousarray(array).tobytes()).hexdigest()


def environment(threads:int) -> dict:
    """Describe the machine the timings were taken on."""

    return dict(
        timestamp=Timestamp().encode(),
        python=sys.version.split()[0],
        platform=platform.platform(),
        processor=platform.processor(),
        cpu_count=os.cpu_count(),
        numpy=np.__version__,
        scipy=scipy.__version__,
        threads=threads,
        clock="time.perf_counter",
        cpu_affinity="not managed"
    )


@dataclass
class SizeResult:
    """Timings and fingerprints for one graph size."""

    n: int
    edges: int
    resampled: int
    graph_digest: str
    tensor_digest: str
    perturb_time: float
    oracle_time: Optional[float] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BenchReport:
    """Raw timings per size plus the fitted log-log slopes."""

    family: str
    q: float
    seed: int
    repeats: int
    threads: int
    sizes: List[int]
    results: List[SizeResult] = field(default_factory=list)
    perturb_fit: Optional[dict] = None
    oracle_fit: Optional[dict] = None
    notices: List[str] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(
            family=self.family,
            q=self.q,
            seed=self.seed,
            repeats=self.repeats,
            threads=self.threads,
            sizes=self.sizes,
            raw=[result.to_dict() for result in self.results],
            fits=dict(perturb=self.perturb_fit, oracle=self.oracle_fit),
            notices=self.notices,
            environment=self.environment
        )

    def summary(self) -> dict:
        """Slopes only, for printing."""

        def slope(fit):
            return None if fit is None else round(fit["slope"], 3)

        return dict(
            sizes=self.sizes,
            perturb_slope=slope(self.perturb_fit),
            oracle_slope=slope(self.oracle_fit),
            resampled=sum(result.resampled for result in self.results),
            notices=self.notices
        )


def _perturbative_assembly(g:Graph, threads:int, p:float):
    """Everything the perturbative walk needs, from the graph onwards."""

    spec = eigendecompose(build_laplacian(g))
    coobs = co_observation(spec)
    B = mixing_coefficients(spec, coobs, threads=threads)
    return assemble(spec, coobs, B, p)


def _oracle_eigendecomposition(g:Graph, p:float):
    S = build_superoperator(build_laplacian(g), p)
    return linalg.eig(S.M)


def bench_scaling(
    sizes:List[int],
    family:str="erdos-renyi",
    q:float=DEFAULT_Q,
    seed:int=0,
    repeats:int=3,
    threads:int=1,
    p:float=1e-2,
    max_n_perturb:int=MAX_N_BENCH_PERTURB,
    max_n_oracle:int=MAX_N_BENCH_ORACLE
) -> BenchReport:
    """Time both methods on one seeded graph per size and fit the slopes."""

    assert family in FAMILIES, f"Unknown graph family '{family}' (options: {', '.join(FAMILIES)})"
    assert len(sizes) > 0, "Provide at least one size"
    assert all(a < b for a, b in zip(sizes, sizes[1:])), f"Sizes must be strictly increasing: {sizes}"
    assert min(sizes) >= 2, "Sizes must be at least 2"

    if max(sizes) > max_n_perturb:
        raise SizeLimitError(f"Benchmark sizes are limited to n <= {max_n_perturb}, not {max(sizes)}")

    rng = np.random.default_rng(seed)

    report = BenchReport(
        family=family,
        q=q,
        seed=seed,
        repeats=repeats,
        threads=threads,
        sizes=list(sizes),
        environment=environment(threads)
    )

    for n in sizes:

        g, resampled = sample_graph(family, n, rng, q=q)
        if resampled > 0:
            logger.info(f"n={n}: resampled {resampled} graph(s) with colliding eigenvalue gaps")

        approx = _perturbative_assembly(g, threads, p)

        result = SizeResult(
            n=n,
            edges=len(g.edges),
            resampled=resampled,
            graph_digest=hashlib.sha256(g.to_edge_list().encode()).hexdigest(),
            tensor_digest=digest(approx.mixing.B),
            perturb_time=median_time(lambda: _perturbative_assembly(g, threads, p), repeats=repeats)
        )

        if n <= max_n_oracle:
            result.oracle_time = median_time(lambda: _oracle_eigendecomposition(g, p), repeats=repeats)

        logger.info(
            f"n={n}: perturbative assembly {result.perturb_time:.4g}s"
            + ("" if result.oracle_time is None else f", dense oracle {result.oracle_time:.4g}s")
        )

        report.results.append(result)

    skipped = [result.n for result in report.results if result.oracle_time is None]
    if len(skipped) > 0:
        report.notices.append(f"Oracle not timed for n > {max_n_oracle}: {skipped}")

    if len(sizes) == 1:
        report.notices.append("Single size: slopes are undefined, timings only")
    else:
        report.perturb_fit = fit_slope(
            [result.n for result in report.results],
            [result.perturb_time for result in report.results]
        )

        oracle_results = [result for result in report.results if result.oracle_time is not None]
        report.oracle_fit = fit_slope(
            [result.n for result in oracle_results],
            [result.oracle_time for result in oracle_results]
        )
        if report.oracle_fit is None:
            report.notices.append("Fewer than two oracle timings: oracle slope is undefined")

    for notice in report.notices:
        logger.info(notice)

    return report
