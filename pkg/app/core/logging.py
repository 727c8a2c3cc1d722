import logging
import sys
import contextvars

from pythonjsonlogger import jsonlogger

# Context variables stamped on every record
run_id_var = contextvars.ContextVar("run_id", default="unassigned")
subcommand_var = contextvars.ContextVar("subcommand", default="none")


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """
    A JSON formatter that adds the run id and the active subcommand
    from context.
    """

    def add_fields(self, log_record, record, message_dict):
        super(CustomJsonFormatter, self).add_fields(log_record, record, message_dict)
        if "run_id" not in log_record:
            log_record["run_id"] = run_id_var.get()
        if "subcommand" not in log_record:
            log_record["subcommand"] = subcommand_var.get()


def setup_logging(level: str = "info") -> None:
    """
    Configures logging with a JSON formatter on stderr; stdout carries only
    command output.
    """
    level_value = getattr(logging, level.upper(), logging.INFO)
    root_logger = logging.getLogger()
    root_logger.setLevel(level_value)

    # Remove any existing handlers to avoid duplicate logs
    for h in list(root_logger.handlers):
        root_logger.removeHandler(h)

    log_handler = logging.StreamHandler(sys.stderr)

    # The formatter will automatically pick up extra fields
    formatter = CustomJsonFormatter(
        "%(asctime)s %(levelname)s %(name)s %(message)s"
    )

    log_handler.setFormatter(formatter)
    root_logger.addHandler(log_handler)

    # Silence overly verbose third-party loggers
    for noisy_logger in ("asyncio", "concurrent.futures", "hypothesis"):
        logging.getLogger(noisy_logger).setLevel(logging.WARNING)
