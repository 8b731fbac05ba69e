#!/usr/bin/env python3
# PYTHON_ARGCOMPLETE_OK

import argcomplete
from .args import make_parser
from .errors import DQWError
from .filelib import FileLib
from .logging import setup_logger
from .menu import WalkBenchMenu
from .walkbench import WalkBench
import json
import sys
import yaml

# Exit code for files which cannot be read or written
IO_EXIT_CODE = 3

# Exit code for arguments which fail validation (argparse uses the same)
USAGE_EXIT_CODE = 2


def print_result(r, print_format:str) -> None:
    """Print the value returned by a subcommand, if there is any."""

    # If there is a value which was returned
    if r is None:
        return

    # Transform the data into a string based on the serialization
    # method specified by the user
    print_funcs = dict(
        json = lambda r: print(json.dumps(r, indent=4)),
        yaml = lambda r: print(yaml.safe_dump(r, sort_keys=False))
    )

    # Invoke the function, falling back to print() for other types
    print_funcs.get(
        print_format,
        lambda r: print(r)
    )(r)


def cli(argv=None):

    # Get the base parser for the CLI
    parser = make_parser(argv)

    # Enable autocomplete
    argcomplete.autocomplete(parser)

    # Parse the arguments
    args = parser.parse_args(argv)

    # Get a logger
    # Log messages go to stderr, so that stdout only carries results
    logger = setup_logger(
        log_fp=args.log,
        verbose=args.verbose
    )

    # Set up a WalkBench object
    WB = WalkBench(
        filelib=FileLib(),
        logger=logger,
        verbose=False
    )

    try:

        # If the user did not provide any command to run
        if "func" not in args.__dict__:

            # Start the interactive menu
            r = WalkBenchMenu(WB).run()

        # If a command was provided
        else:

            # Run the specified command, passing through the arguments
            # which were not used to configure the CLI itself
            r = WB._run_function(
                args.func,
                **{
                    k: v
                    for k, v in args.__dict__.items()
                    if k not in [
                        "func",
                        "config",
                        "log",
                        "verbose",
                        "print_format"
                    ]
                }
            )

    # Documented refusals carry their own exit code
    except DQWError as err:
        logger.error(f"{type(err).__name__}: {err}")
        sys.exit(err.exit_code)

    except OSError as err:
        logger.error(f"{type(err).__name__}: {err}")
        sys.exit(IO_EXIT_CODE)

    except AssertionError as err:
        logger.error(f"Invalid arguments: {err}")
        sys.exit(USAGE_EXIT_CODE)

    print_result(r, args.print_format)
