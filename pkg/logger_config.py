"""
Logging configuration module for the sEMG gesture pipeline.
Provides structured logging with different levels and per-run stage tracking.
"""

import logging
import logging.config
import json
from datetime import datetime, timezone
from typing import Dict, Any, Optional
from pathlib import Path
from pythonjsonlogger import jsonlogger
from settings import settings

RUNS_LOG_NAME = "runs.jsonl"


class RunLogger:
    """
    Run logger for tracking pipeline stages in JSONL format.

    Tracks:
    - Subcommand and stage names
    - Stage success or failure with the error body
    - Stage durations
    - Stage-specific counts (segments, rows, networks)
    """

    def __init__(self, log_dir: Optional[str] = None):
        """
        Initialize run logger.

        Args:
            log_dir: Directory holding the JSONL run log; None disables file output
        """
        self.log_file = Path(log_dir) / RUNS_LOG_NAME if log_dir else None
        self.logger = logging.getLogger("runs")

    def log_stage(
        self,
        run_id: str,
        command: str,
        stage: str,
        success: bool = True,
        error: Optional[Dict[str, Any]] = None,
        duration_ms: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        """
        Log one pipeline stage to the run file.

        Args:
            run_id: Unique identifier of the CLI invocation
            command: Subcommand name (synth, extract, augment, train, eval)
            stage: Stage name inside the subcommand
            success: Whether the stage completed
            error: Error body ({'type', 'details'}) if it failed
            duration_ms: Wall time of the stage in milliseconds
            details: Stage-specific counters
        """
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "run_id": run_id,
            "command": command,
            "stage": stage,
            "success": success,
            "error": error,
            "duration_ms": duration_ms,
            "details": details or {},
        }
        self.logger.info("Stage finished", extra={"command": command, "stage": stage, "success": success})
        if self.log_file is None:
            return
        try:
            with open(self.log_file, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, default=str) + "\n")
        except Exception as e:
            self.logger.error(f"Failed to write run log: {e}")


def setup_logging(level: Optional[str] = None, log_dir: Optional[str] = None) -> RunLogger:
    """
    Set up logging for a CLI process.

    Creates:
    - Console handler (human readable)
    - Pipeline log (structured JSON)
    - Error log (separate JSON file)

    Args:
        level: Console/root level, defaults to settings.LOG_LEVEL
        log_dir: Log directory, defaults to settings.LOG_DIR

    Returns:
        RunLogger writing to the same directory
    """
    level = (level or settings.LOG_LEVEL).upper()
    logs_dir = Path(log_dir or settings.LOG_DIR) if settings.LOG_TO_FILE else None

    handlers: Dict[str, Dict[str, Any]] = {
        'console': {
            'level': level,
            'class': 'logging.StreamHandler',
            'formatter': 'standard',
        },
    }
    root_handlers = ['console']
    error_handlers = ['console']
    if logs_dir is not None:
        logs_dir.mkdir(parents=True, exist_ok=True)
        handlers['pipeline_file'] = {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': str(logs_dir / 'pipeline.log'),
            'formatter': 'json',
        }
        handlers['error_file'] = {
            'level': 'ERROR',
            'class': 'logging.FileHandler',
            'filename': str(logs_dir / 'errors.log'),
            'formatter': 'json',
        }
        root_handlers.append('pipeline_file')
        error_handlers.insert(0, 'error_file')

    LOGGING_CONFIG = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'json': {
                '()': jsonlogger.JsonFormatter,
                'format': '%(asctime)s %(name)s %(levelname)s %(message)s'
            },
            'standard': {
                'format': '%(asctime)s [%(levelname)s] %(name)s: %(message)s'
            },
        },
        'handlers': handlers,
        'loggers': {
            '': {  # Root logger
                'handlers': root_handlers,
                'level': level,
                'propagate': False
            },
            'runs': {
                'handlers': [h for h in root_handlers if h != 'console'],
                'level': 'INFO',
                'propagate': False
            },
            'errors': {
                'handlers': error_handlers,
                'level': 'ERROR',
                'propagate': False
            }
        }
    }

    logging.config.dictConfig(LOGGING_CONFIG)

    logger = logging.getLogger(__name__)
    logger.info("Logging system initialized", extra={
        "log_level": level,
        "logs_directory": str(logs_dir) if logs_dir else None,
    })
    return RunLogger(str(logs_dir) if logs_dir else None)


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a specific module.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Configured logger instance
    """
    return logging.getLogger(name)
