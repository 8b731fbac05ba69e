import datetime

class Timestamp():
    """Encode the current UTC time for report metadata."""

    def __init__(self, fmt="%Y-%m-%dT%H:%M:%S%z"):

        self.fmt = fmt

    def encode(self) -> str:
        """Return a string representation of the current date and time."""

        # Current date and time in UTC
        now = datetime.datetime.now(datetime.timezone.utc)

        return now.strftime(self.fmt)
