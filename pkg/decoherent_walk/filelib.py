import os

import importlib_resources
import yaml


class FileLib:
    """Helper class used to read inputs and write results on the local filesystem."""

    def __init__(self, filesystem:str="local"):
        """Initialize the library of commands used to interact with the filesystem."""

        # Attach the type of filesystem being used
        self.filesystem = filesystem

        assert filesystem == "local", "The only filesystem currently supported is 'local'"

    def exists(self, path) -> bool:
        """Path exists on the local filesystem."""
        return os.path.exists(path)

    def mkdir_p(self, path) -> None:
        """Make a folder if it does not already exist, assert that it is a directory."""

        if not os.path.exists(path):
            os.makedirs(path)
        assert os.path.isdir(path), f"Must be a folder, not a file: {path}"

    def read_text(self, path:str) -> str:
        """Read a UTF-8 text file."""

        with open(path, mode="r", encoding="utf-8") as handle:
            return handle.read()

    def write_text(self, dat:str, path:str) -> None:
        """Write a text file, creating its folder if needed."""

        folder = os.path.dirname(path)
        if len(folder) > 0:
            self.mkdir_p(folder)

        # Fixed newlines keep the output byte-stable across platforms
        with open(path, mode='w', newline="\n") as handle:
            handle.write(dat)

    def read_yaml(self, path:str) -> dict:
        """Read a YAML mapping; an empty file gives an empty dict."""

        with open(path, 'r') as handle:
            dat = yaml.safe_load(handle)

        if dat is None:
            return dict()

        assert isinstance(dat, dict), f"Expected a mapping in {path}, found {type(dat).__name__}"
        return dat

    def bundled_graphs(self) -> list:
        """Names of the example graphs shipped with the package."""

        folder = importlib_resources.files("decoherent_walk").joinpath("graphs")
        return sorted(
            item.name[:-len(".txt")]
            for item in folder.iterdir()
            if item.name.endswith(".txt")
        )

    def read_graph_text(self, graph:str) -> str:
        """
        Return the edge-list text for `graph`, which is either a path on the
        local filesystem or the name of a bundled example graph.
        """

        # A real file always wins
        if self.exists(graph):
            return self.read_text(graph)

        resource = importlib_resources.files("decoherent_walk").joinpath("graphs", f"{graph}.txt")

        if resource.is_file():
            return resource.read_text()

        raise FileNotFoundError(
            f"No graph file '{graph}' (bundled graphs: {', '.join(self.bundled_graphs())})"
        )
