import logging
import sys
import uuid
from contextvars import ContextVar
from typing import Optional
from pythonjsonlogger import jsonlogger
from .config import settings

_run_id: ContextVar[str] = ContextVar("run_id", default="no-run-id")


class RunIdFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, 'run_id'):
            record.run_id = _run_id.get()
        return True


def new_run_id() -> str:
    """Start a new run and return its id"""
    run_id = uuid.uuid4().hex
    _run_id.set(run_id)
    return run_id


def setup_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> logging.Logger:
    log_level = getattr(logging, (level or settings.log_level).upper(), logging.INFO)
    log_format = fmt or settings.log_format

    # Remove all handlers
    logger = logging.getLogger()
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    # stdout carries command output
    handler = logging.StreamHandler(sys.stderr)

    if log_format == "json":
        formatter = jsonlogger.JsonFormatter(
            fmt='%(asctime)s %(name)s %(levelname)s %(message)s %(pathname)s %(funcName)s %(lineno)d %(run_id)s',
            datefmt='%Y-%m-%d %H:%M:%S',
            rename_fields={
                'asctime': 'timestamp',
                'levelname': 'level',
                'pathname': 'file',
                'funcName': 'function',
                'lineno': 'line'
            }
        )
    else:
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - [%(run_id)s] - %(message)s'
        )

    handler.setFormatter(formatter)
    handler.addFilter(RunIdFilter())

    logger.setLevel(log_level)
    logger.addHandler(handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
