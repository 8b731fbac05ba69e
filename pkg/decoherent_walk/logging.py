import logging

def setup_logger(
    log_fp=None,
    log_stdout=True,
    verbose=False,
    log_format="%(asctime)s %(levelname)-8s [DQW] %(message)s"
):
    """
    Set up and return a logging instance.
    Logs will be printed to the console by default (with log_stdout=True).
    If `log_fp` is provided, logs will also be appended to that file.
    """

    assert log_stdout or log_fp is not None, "Must log to either a file or the console"

    # Set up logging
    logFormatter = logging.Formatter(log_format)
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    # Drop any handlers left over from a previous invocation in the same process
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    # If a file was provided
    if log_fp is not None:
        # Append to file
        fileHandler = logging.FileHandler(log_fp, mode="a")
        fileHandler.setFormatter(logFormatter)
        logger.addHandler(fileHandler)

    # If the flag was set to log to the console
    if log_stdout:
        # StreamHandler writes to stderr, which keeps stdout free for summaries
        consoleHandler = logging.StreamHandler()
        consoleHandler.setFormatter(logFormatter)
        logger.addHandler(consoleHandler)

    # Return the logger
    return logger
