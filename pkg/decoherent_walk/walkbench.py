from typing import List
import logging

import numpy as np
from scipy import linalg

from .bench import bench_scaling
from .config import MAX_N_BENCH_ORACLE, MAX_N_BENCH_PERTURB, MAX_N_ORACLE, MAX_N_PERTURB, RunConfig
from .dqw import greedy_match, perturb_evolve, perturbative_model, unperturbed_spectrum
from .errors import GraphFormatError, SizeLimitError, StateError
from .families import DEFAULT_Q
from .filelib import FileLib
from .graph import Graph, build_laplacian, check_gap_uniqueness, eigendecompose
from .lindblad import (
    DensityMatrix,
    build_superoperator,
    classical_ctrw_evolve,
    exact_evolve,
    pure_ctqw_evolve
)
from .output import format_trace, report_to_json, to_jsonable


def parse_state_vector(text:str) -> np.ndarray:
    """
    Read a state vector written as one entry per line (or separated by
    whitespace or commas). Entries may be complex, e.g. `0.5+0.5j`; `#` starts a comment.
    """

    entries = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].replace(",", " ")
        for token in content.split():
            try:
                entries.append(complex(token))
            except ValueError:
                raise StateError(f"Line {lineno}: '{token}' is not a number")

    if len(entries) == 0:
        raise StateError("The state vector file is empty")

    return np.array(entries)


class WalkBench:
    """Object used to run the decoherent walk subcommands."""

    def __init__(
        self,
        # Library used to interact with the filesystem
        filelib:FileLib=None,
        # Logging instance
        logger=None,
        # Logging level
        verbose:bool=False
    ) -> None:

        # Attach the filelib
        self.filelib = FileLib() if filelib is None else filelib

        # Attach the logger
        self.logger = logging.getLogger(__name__) if logger is None else logger

        # Attach the verbosity level
        assert isinstance(verbose, bool), "verbose must be a bool"
        self.verbose = verbose

    def log(self, msg:str) -> None:
        """Print a logging message using the logger if available, and the screen if `verbose`."""

        if self.logger is not None:
            self.logger.info(msg)

        if self.verbose:
            print(msg)

    def _run_function(self, func, **kwargs):
        """Execute a function with the specified name."""

        # Get the class function accessed by function name
        f = getattr(self, func, None)

        assert f is not None and not func.startswith("_"), f"Cannot find function {func} for object WalkBench"

        # Run the function which was selected by the user
        return f(**kwargs)

    def load_graph(self, graph:str) -> Graph:
        """Parse a graph from a file path or the name of a bundled graph."""

        assert graph is not None, "Must provide --graph"

        try:
            text = self.filelib.read_graph_text(graph)
        except UnicodeDecodeError as err:
            raise GraphFormatError(f"Graph file '{graph}' is not UTF-8 text: {err}") from err

        g = Graph.from_edge_list(text)
        self.log(f"Read graph '{graph}' with {g.n} vertices and {len(g.edges)} edges")

        if g.connected_components() > 1:
            self.log(f"Graph '{graph}' has {g.connected_components()} connected components")

        return g

    def initial_state(self, cfg:RunConfig, n:int):
        """
        Initial state in the form needed by `cfg.method`: a DensityMatrix for the
        density-matrix methods, an amplitude vector for `pure` and a probability
        vector for `classical`.
        """

        if cfg.start_node is not None:
            if not 0 <= cfg.start_node < n:
                raise StateError(f"Start node {cfg.start_node} is out of range for n={n}")
            psi = np.zeros(n, dtype=complex)
            psi[cfg.start_node] = 1

        elif cfg.init_file is not None:
            try:
                text = self.filelib.read_text(cfg.init_file)
            except UnicodeDecodeError as err:
                raise StateError(f"State file '{cfg.init_file}' is not UTF-8 text: {err}") from err

            psi = parse_state_vector(text)
            if psi.shape[0] != n:
                raise StateError(f"State vector has {psi.shape[0]} entries, the graph has n={n}")

        # Uniform: I/n, the equal superposition, or the uniform distribution
        else:
            if cfg.method in ["perturb", "exact"]:
                return DensityMatrix.uniform(n)
            elif cfg.method == "pure":
                return np.ones(n, dtype=complex) / np.sqrt(n)
            else:
                return np.ones(n) / n

        if cfg.method in ["perturb", "exact"]:
            return DensityMatrix.from_pure(psi)
        elif cfg.method == "pure":
            return psi
        else:
            # A localized start is a point mass; a state vector contributes |psi|^2
            return np.abs(psi) ** 2

    def run(self, **kwargs) -> dict:
        """Evolve a walk on a graph and write the probability trace."""

        cfg = RunConfig(**kwargs).validate()

        g = self.load_graph(cfg.graph)

        if cfg.size_limit is not None and g.n > cfg.size_limit:
            raise SizeLimitError(f"Method '{cfg.method}' is limited to n <= {cfg.size_limit}, not n={g.n}")

        L = build_laplacian(g)
        spec = eigendecompose(L)
        state = self.initial_state(cfg, g.n)

        self.log(f"Running method '{cfg.method}' with p={cfg.p:g} on {cfg.t_steps} time point(s)")

        if cfg.method == "perturb":
            approx = perturbative_model(spec, cfg.p, threads=cfg.threads, tol=cfg.tol)
            trace = perturb_evolve(approx, state, cfg.times)
        elif cfg.method == "exact":
            trace = exact_evolve(build_superoperator(L, cfg.p), state, cfg.times, threads=cfg.threads)
        elif cfg.method == "pure":
            trace = pure_ctqw_evolve(spec, state, cfg.times)
        else:
            trace = classical_ctrw_evolve(L, state, cfg.times, spec=spec)

        metadata = dict(
            method=cfg.method,
            p=cfg.p,
            n=g.n,
            graph=cfg.graph,
            seed=cfg.seed,
            tol=spec.default_tol if cfg.tol is None else cfg.tol
        )

        text = format_trace(trace, cfg.format, metadata)

        # Without --out, the trace itself is the output
        if cfg.out is None:
            print(text, end="")
            return None

        self.filelib.write_text(text, cfg.out)
        self.log(f"Wrote {cfg.format} trace to {cfg.out}")

        return to_jsonable(dict(
            method=cfg.method,
            n=g.n,
            p=cfg.p,
            steps=cfg.t_steps,
            out=cfg.out,
            max_sum_error=trace.metadata.get("max_sum_error")
        ))

    def eig_report(
        self,
        graph:str=None,
        p:float=0.0,
        out:str=None,
        mixing:bool=False,
        tol:float=None,
        threads:int=1,
        max_n:int=None
    ) -> dict:
        """Report the spectral quantities behind the perturbative walk."""

        assert p >= 0, f"--p must be non-negative, not {p}"

        g = self.load_graph(graph)

        limit = MAX_N_PERTURB if max_n is None else max_n
        if g.n > limit:
            raise SizeLimitError(f"eig-report is limited to n <= {limit}, not n={g.n}")

        L = build_laplacian(g)
        spec = eigendecompose(L)

        gaps = check_gap_uniqueness(spec, tol=tol)
        gaps.raise_if_colliding()

        approx = perturbative_model(spec, p, threads=threads, tol=tol)
        coobs = approx.coobs
        n = g.n

        report = dict(
            n=n,
            p=p,
            lambdas=spec.lambdas,
            gaps=gaps.to_dict(),
            pi=unperturbed_spectrum(spec).pi.reshape(n, n),
            pi_prime=approx.pi_prime,
            O=coobs.O,
            doubly_stochastic=dict(
                error=coobs.stochastic_error,
                ok=coobs.stochastic_error <= 1e-12
            ),
            xi_eigenvalues=coobs.XiEigs,
            xi_distinct=coobs.distinct,
            b_norm=approx.b_norm,
            validity_warning=approx.validity_warning
        )

        if mixing:
            report["mixing_tensor"] = approx.mixing.B

        # Dense comparison for small graphs
        if n <= MAX_N_ORACLE:
            exact = linalg.eigvals(build_superoperator(L, p).M)
            match, errors = greedy_match(approx.eigenvalues(), exact)
            report["oracle"] = dict(
                spectrum=exact[match],
                match_errors=errors,
                max_match_error=float(errors.max())
            )

        if out is None:
            print(report_to_json(report), end="")
            return None

        self.filelib.write_text(report_to_json(report), out)
        self.log(f"Wrote eigen-report to {out}")

        return to_jsonable(dict(
            n=n,
            p=p,
            doubly_stochastic=report["doubly_stochastic"]["ok"],
            max_match_error=report.get("oracle", {}).get("max_match_error"),
            out=out
        ))

    def bench(
        self,
        sizes:List[int]=None,
        family:str="erdos-renyi",
        q:float=DEFAULT_Q,
        seed:int=0,
        repeats:int=3,
        threads:int=1,
        p:float=1e-2,
        out:str=None,
        max_n:int=None,
        max_n_oracle:int=None
    ) -> dict:
        """Time the perturbative assembly against the dense oracle across sizes."""

        assert sizes is not None and len(sizes) > 0, "Must provide --sizes"

        report = bench_scaling(
            sizes,
            family=family,
            q=q,
            seed=seed,
            repeats=repeats,
            threads=threads,
            p=p,
            max_n_perturb=MAX_N_BENCH_PERTURB if max_n is None else max_n,
            max_n_oracle=MAX_N_BENCH_ORACLE if max_n_oracle is None else max_n_oracle
        )

        if out is None:
            return to_jsonable(report.to_dict())

        self.filelib.write_text(report_to_json(report.to_dict()), out)
        self.log(f"Wrote benchmark report to {out}")

        return to_jsonable(report.summary())
