"""Run configuration and size limits."""

from dataclasses import asdict, dataclass
from typing import Optional
import logging

import numpy as np

logger = logging.getLogger(__name__)

# Largest n accepted by each method unless --max-n says otherwise
MAX_N_EXACT = 24
MAX_N_ORACLE = 16
MAX_N_PERTURB = 48

# Benchmark guards
MAX_N_BENCH_PERTURB = 32
MAX_N_BENCH_ORACLE = 16

# Largest n for which the approximate eigenvectors are materialized
MAX_N_MATERIALIZE = 16

METHODS = ["perturb", "exact", "pure", "classical"]
FORMATS = ["csv", "json"]

# Size limit per method
METHOD_MAX_N = dict(
    perturb=MAX_N_PERTURB,
    exact=MAX_N_EXACT,
    pure=None,
    classical=None
)


@dataclass
class RunConfig:
    """Everything needed to reproduce one `dqw run` invocation."""

    graph: str
    method: str = "perturb"
    p: float = 0.0
    t_start: float = 0.0
    t_stop: float = 1.0
    t_steps: int = 11
    start_node: Optional[int] = None
    init_file: Optional[str] = None
    uniform: bool = False
    out: Optional[str] = None
    format: str = "csv"
    seed: int = 0
    threads: int = 1
    tol: Optional[float] = None
    max_n: Optional[int] = None

    def validate(self) -> "RunConfig":
        """Check the parameters, filling in the default initial state."""

        assert self.graph is not None, "Must provide --graph"
        assert self.method in METHODS, f"--method must be one of {', '.join(METHODS)}, not {self.method}"
        assert self.format in FORMATS, f"--format must be one of {', '.join(FORMATS)}, not {self.format}"
        assert self.p >= 0, f"--p must be non-negative, not {self.p}"
        assert self.t_steps >= 1, f"--t-steps must be at least 1, not {self.t_steps}"
        assert self.t_start >= 0, f"--t-start must be non-negative, not {self.t_start}"
        assert self.t_stop >= self.t_start, f"--t-stop ({self.t_stop}) must not precede --t-start ({self.t_start})"
        assert self.threads >= 1, f"--threads must be at least 1, not {self.threads}"

        # Exactly one initial state
        n_states = sum([self.start_node is not None, self.init_file is not None, bool(self.uniform)])
        assert n_states <= 1, "Provide only one of --start-node, --init-file or --uniform"
        if n_states == 0:
            self.start_node = 0

        if self.method in ["pure", "classical"] and self.p != 0:
            logger.warning(f"Method '{self.method}' ignores the decoherence rate (p={self.p})")

        return self

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_stop, self.t_steps)

    @property
    def size_limit(self) -> Optional[int]:
        return self.max_n if self.max_n is not None else METHOD_MAX_N[self.method]

    def to_dict(self) -> dict:
        return asdict(self)
