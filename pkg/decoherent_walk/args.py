import argparse
import os

from .config import FORMATS, METHODS
from .families import DEFAULT_Q, FAMILIES
from .filelib import FileLib

# Defaults file read from the working directory when neither --config nor $DQW_CONFIG is set
LOCAL_CONFIG = ".dqw.yaml"


def find_config_path(argv=None) -> str:
    """Location of the YAML defaults file, if any: --config, then $DQW_CONFIG, then ./.dqw.yaml."""

    # Only --config matters at this stage
    preparser = argparse.ArgumentParser(add_help=False)
    preparser.add_argument("--config", type=str, default=None)
    known, _ = preparser.parse_known_args(argv)

    if known.config is not None:
        return known.config

    if os.getenv("DQW_CONFIG") is not None:
        return os.getenv("DQW_CONFIG")

    if os.path.exists(LOCAL_CONFIG):
        return LOCAL_CONFIG

    return None


def read_config_defaults(argv=None) -> dict:
    """
    Before setting up the parser, read any default values from the YAML
    defaults file. Top-level keys apply to every subcommand; a mapping under
    a subcommand name (e.g. `run:`) applies to that subcommand only.
    """

    path = find_config_path(argv)

    if path is None:
        return dict()

    # Get a filesystem library helper
    filelib = FileLib()

    assert filelib.exists(path), f"Configuration file does not exist: {path}"

    config = filelib.read_yaml(path)

    # Accept either spelling of each flag
    return {
        key.replace("-", "_"): (
            {k.replace("-", "_"): v for k, v in val.items()}
            if isinstance(val, dict) else val
        )
        for key, val in config.items()
    }


# Options shared by `run` and `eig-report`
GRAPH_ARG = dict(
    type=str,
    required=True,
    help="Edge-list file, or the name of a bundled graph (k2, p3, c4, star4)"
)

TOL_ARG = dict(
    type=float,
    default=None,
    help="Tolerance used to decide that eigenvalues or gaps coincide (default: 1e-9 * (spread + 1))"
)

THREADS_ARG = dict(
    type=int,
    default=1,
    help="Number of worker threads (default: 1)"
)

MAX_N_ARG = dict(
    type=int,
    default=None,
    help="Override the largest graph size accepted by the chosen method"
)


def make_parser(argv=None):
    """Return a base parser used to format command line arguments for the dqw CLI."""

    # Before setting up the parser, read any configured defaults
    config = read_config_defaults(argv)

    parser = argparse.ArgumentParser(
        description="Decoherent continuous-time quantum walks: perturbative and exact evolution"
    )

    # Options which apply to all invocations of the CLI
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help=f"YAML file of default values (default: $DQW_CONFIG, or ./{LOCAL_CONFIG} if present)"
    )

    parser.add_argument(
        "--print-format",
        type=str,
        default="json",
        choices=["json", "yaml"],
        help="Format used to print CLI output (default: json, options: json, yaml)."
    )

    parser.add_argument(
        "--log",
        type=str,
        default=os.getenv("DQW_LOG"),
        help="Also append log messages to this file (default: $DQW_LOG)"
    )

    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Log debugging messages"
    )

    # Add subparsers for each of the commands within the CLI
    subparsers = parser.add_subparsers(
        title="subcommands",
        help="dqw commands"
    )

    # Store the information for each subcommand as a list
    command_parsers = [
        dict(
            key="run",
            help="""
            Evolve a walk on a graph and write the node probabilities over time.
            """,
            kwargs=dict(
                graph=GRAPH_ARG,
                method=dict(
                    type=str,
                    default="perturb",
                    choices=METHODS,
                    help="Evolution method (default: perturb)"
                ),
                p=dict(
                    type=float,
                    default=0.0,
                    help="Decoherence rate (default: 0)"
                ),
                t_start=dict(
                    type=float,
                    default=0.0,
                    help="First time point (default: 0)"
                ),
                t_stop=dict(
                    type=float,
                    default=1.0,
                    help="Last time point (default: 1)"
                ),
                t_steps=dict(
                    type=int,
                    default=11,
                    help="Number of evenly spaced time points (default: 11)"
                ),
                start_node=dict(
                    type=int,
                    default=None,
                    help="Start localized on this vertex (the default start is vertex 0)"
                ),
                init_file=dict(
                    type=str,
                    default=None,
                    help="Start from the normalized state vector in this file"
                ),
                uniform=dict(
                    action="store_true",
                    help="Start from the uniform state"
                ),
                out=dict(
                    type=str,
                    default=None,
                    help="Write the trace to this file (default: print it)"
                ),
                format=dict(
                    type=str,
                    default="csv",
                    choices=FORMATS,
                    help="Trace format (default: csv)"
                ),
                seed=dict(
                    type=int,
                    default=0,
                    help="Seed recorded with the run (default: 0)"
                ),
                threads=THREADS_ARG,
                tol=TOL_ARG,
                max_n=MAX_N_ARG
            )
        ),
        dict(
            key="eig_report",
            help="""
            Report the Laplacian spectrum, the unperturbed super-operator spectrum,
            the eigenvalue derivatives and the co-observation matrix of a graph.
            """,
            kwargs=dict(
                graph=GRAPH_ARG,
                p=dict(
                    type=float,
                    default=0.0,
                    help="Decoherence rate used for the oracle comparison (default: 0)"
                ),
                out=dict(
                    type=str,
                    default=None,
                    help="Write the JSON report to this file (default: print it)"
                ),
                mixing=dict(
                    action="store_true",
                    help="Include the full mixing tensor"
                ),
                tol=TOL_ARG,
                threads=THREADS_ARG,
                max_n=MAX_N_ARG
            )
        ),
        dict(
            key="bench",
            help="""
            Time the perturbative assembly against the dense eigendecomposition
            of the super-operator and fit log-log slopes.
            """,
            kwargs=dict(
                sizes=dict(
                    type=int,
                    nargs="+",
                    default=[8, 12, 16],
                    help="Strictly increasing graph sizes (default: 8 12 16)"
                ),
                family=dict(
                    type=str,
                    default="erdos-renyi",
                    choices=FAMILIES,
                    help="Graph family (default: erdos-renyi)"
                ),
                q=dict(
                    type=float,
                    default=DEFAULT_Q,
                    help=f"Edge probability of the Erdos-Renyi family (default: {DEFAULT_Q})"
                ),
                seed=dict(
                    type=int,
                    default=0,
                    help="Seed for the graph family (default: 0)"
                ),
                repeats=dict(
                    type=int,
                    default=3,
                    help="Timed repetitions per size, at least 3 (default: 3)"
                ),
                p=dict(
                    type=float,
                    default=1e-2,
                    help="Decoherence rate (default: 0.01)"
                ),
                out=dict(
                    type=str,
                    default=None,
                    help="Write the JSON report to this file (default: print it)"
                ),
                threads=THREADS_ARG,
                max_n=MAX_N_ARG,
                max_n_oracle=dict(
                    type=int,
                    default=None,
                    help="Largest size timed with the dense oracle (default: 16)"
                )
            )
        )
    ]

    # Iterate over each of the subcommands
    for command_info in command_parsers:

        # Make sure that the required fields are available
        for field in ["help"]:
            assert field in command_info, f"All subcommands must have '{field}' defined"

        # Add a parser for this command
        command_info["parser"] = subparsers.add_parser(
            command_info["key"].replace("_", "-"),
            help=command_info["help"]
        )

        # Configured defaults: shared keys first, then the subcommand's own section
        defaults = {k: v for k, v in config.items() if not isinstance(v, dict)}
        defaults.update(config.get(command_info["key"], dict()))

        # Iterate over any kwargs, if any
        for key, params in command_info.get("kwargs", dict()).items():

            params = dict(params)

            # A configured value replaces the default and satisfies `required`
            if key in defaults:
                params["default"] = defaults[key]
                params.pop("required", None)

            # Add the params for that kwarg, which applies to only this command
            command_info["parser"].add_argument(
                f"--{key.replace('_', '-')}",
                **params
            )

        # Add the default function
        command_info["parser"].set_defaults(
            func=command_info["key"]
        )

    return parser
