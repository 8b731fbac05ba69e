from .config import FORMATS, METHODS
from .families import DEFAULT_Q, FAMILIES
from .walkbench import WalkBench
import decoherent_walk
import questionary
import sys


class WalkBenchMenu:

    def __init__(self, WB:WalkBench):
        """Interactive prompts used when dqw is invoked without a subcommand."""

        # Attach the walkbench which has been provided
        self.wb = WB

    def print_versions(self):
        """Print the versions of all packages used."""
        self.wb.log(f"Python version: {sys.version.split()[0]}")
        self.wb.log(f"decoherent_walk: {decoherent_walk.__version__}")

    def type_validator(self, t, v):
        """Return a boolean indicating whether `v` can be cast to `t(v)` without raising a ValueError."""
        try:
            t(v)
            return True
        except ValueError:
            return False

    def questionary(self, fname, msg, validate_type=None, output_f=None, **kwargs):
        """Wrap questionary functions to catch escapes and exit gracefully."""

        # Get the questionary function
        questionary_f = questionary.__dict__.get(fname)

        # Make sure that the function exists
        assert questionary_f is not None, f"No such questionary function: {fname}"

        if fname == "select":
            kwargs["use_shortcuts"] = True

        if validate_type is not None:
            kwargs["validate"] = lambda v: self.type_validator(validate_type, v)

        # The default value must be a string (except for confirm)
        if kwargs.get("default") is not None and fname != "confirm":
            kwargs["default"] = str(kwargs["default"])

        # Get the response
        resp = questionary_f(msg, **kwargs).ask()

        # If the user escaped the question
        if resp is None:
            self.exit()

        # If an output transformation function was defined
        if output_f is not None:
            resp = output_f(resp)

        return resp

    def exit(self):
        """Leave the interactive menu."""
        sys.exit(0)

    def run(self):
        """Prompt for a subcommand and its parameters, then run it."""

        self.print_versions()

        func = self.questionary(
            "select",
            "What would you like to do?",
            choices=[
                questionary.Choice("Evolve a walk", value="run"),
                questionary.Choice("Report the spectrum of a graph", value="eig_report"),
                questionary.Choice("Run the scaling benchmark", value="bench"),
                questionary.Choice("Exit", value="exit")
            ]
        )

        if func == "exit":
            self.exit()

        kwargs = getattr(self, f"prompt_{func}")()

        return self.wb._run_function(func, **kwargs)

    def prompt_graph(self) -> str:
        return self.questionary(
            "text",
            f"Graph file or bundled graph ({', '.join(self.wb.filelib.bundled_graphs())})",
            default="p3"
        )

    def prompt_optional_path(self, msg:str):
        """Empty answers mean 'print to the screen'."""
        resp = self.questionary("text", msg, default="")
        return None if len(resp) == 0 else resp

    def prompt_run(self) -> dict:

        kwargs = dict(graph=self.prompt_graph())

        kwargs["method"] = self.questionary("select", "Evolution method", choices=METHODS)

        if kwargs["method"] in ["perturb", "exact"]:
            kwargs["p"] = self.questionary("text", "Decoherence rate p", validate_type=float, output_f=float, default=0.01)

        kwargs["t_start"] = self.questionary("text", "First time point", validate_type=float, output_f=float, default=0)
        kwargs["t_stop"] = self.questionary("text", "Last time point", validate_type=float, output_f=float, default=5)
        kwargs["t_steps"] = self.questionary("text", "Number of time points", validate_type=int, output_f=int, default=11)

        if self.questionary("confirm", "Start from the uniform state?", default=False):
            kwargs["uniform"] = True
        else:
            kwargs["start_node"] = self.questionary("text", "Start vertex", validate_type=int, output_f=int, default=0)

        kwargs["format"] = self.questionary("select", "Trace format", choices=FORMATS)
        kwargs["out"] = self.prompt_optional_path("Output file (leave empty to print)")

        return kwargs

    def prompt_eig_report(self) -> dict:

        return dict(
            graph=self.prompt_graph(),
            p=self.questionary("text", "Decoherence rate p", validate_type=float, output_f=float, default=0.01),
            mixing=self.questionary("confirm", "Include the mixing tensor?", default=False),
            out=self.prompt_optional_path("Report file (leave empty to print)")
        )

    def prompt_bench(self) -> dict:

        return dict(
            sizes=self.questionary(
                "text",
                "Graph sizes (space separated)",
                default="8 12 16",
                output_f=lambda resp: [int(x) for x in resp.split()]
            ),
            family=self.questionary("select", "Graph family", choices=FAMILIES),
            q=self.questionary("text", "Edge probability", validate_type=float, output_f=float, default=DEFAULT_Q),
            seed=self.questionary("text", "Seed", validate_type=int, output_f=int, default=0),
            out=self.prompt_optional_path("Report file (leave empty to print)")
        )
