"""
Logger Singleton Module.

This module provides a singleton logger instance for consistent logging across the laboratory.
"""

import os
import sys
from logging.handlers import RotatingFileHandler
import logging
from pythonjsonlogger import jsonlogger
from typing import Any, Dict

VALID_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class RunAwareJsonFormatter(jsonlogger.JsonFormatter):
    """
    JSON formatter that includes the run ID in all log messages.
    """

    def add_fields(self, log_record: Dict[str, Any], record: logging.LogRecord, message_dict: Dict[str, Any]) -> None:
        """
        Add custom fields to the log record.

        Args:
            log_record: The log record being built
            record: The original log record
            message_dict: Additional message dictionary
        """
        super().add_fields(log_record, record, message_dict)

        if hasattr(record, 'run_id'):
            log_record['run_id'] = record.run_id
        elif not log_record.get('run_id'):
            # Outside of `extra`, fall back to the active run context
            try:
                from mfront.middleware.context import get_run_id
                run_id = get_run_id()
                if run_id:
                    log_record['run_id'] = run_id
            except ImportError:
                pass


class LoggerSingleton:
    """
    A Singleton Logger class to maintain a single logger instance per process.

    Attributes:
        _instance (LoggerSingleton): The singleton instance of the logger
        logger (logging.Logger): The logger object
    """
    _instance = None
    logger = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(LoggerSingleton, cls).__new__(cls)
            cls._instance._initialize_logger()
        return cls._instance

    def _initialize_logger(self):
        """Initialize the logger with JSON formatting, a stderr handler and an optional file handler."""
        self.logger = logging.getLogger('mfront')
        self.logger.propagate = False

        log_level = os.getenv('MFRONT_LOG', 'INFO').upper()
        if log_level in VALID_LEVELS:
            self.logger.setLevel(getattr(logging, log_level))
            invalid_level = None
        else:
            self.logger.setLevel(logging.INFO)
            invalid_level = log_level

        formatter = RunAwareJsonFormatter(
            '%(asctime)s %(levelname)s %(name)s %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        # stdout carries the per-epsilon summaries, logs go to stderr
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        log_file = os.getenv('MFRONT_LOG_FILE')
        if log_file:
            log_dir = os.path.dirname(log_file)
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=10485760,  # 10MB
                backupCount=5
            )
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

        if invalid_level is not None:
            self.logger.warning(
                f"Invalid MFRONT_LOG '{invalid_level}'. Using INFO instead. "
                f"Valid levels are: {', '.join(VALID_LEVELS)}"
            )

    def get_logger(self):
        """
        Get the logger instance.

        Returns:
            logging.Logger: The configured logger instance
        """
        return self.logger


def get_logger():
    """
    Convenience function to get the logger instance.

    Returns:
        logging.Logger: The configured logger instance
    """
    return LoggerSingleton().get_logger()
