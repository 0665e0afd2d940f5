"""
Logging Decorators for the cavity-QED toolkit
Provides decorators for automatic logging of computations, errors, and timing
"""
import functools
import time
import traceback
from inspect import signature

import numpy as np

from core.logger_config import get_logger, setup_numerics_logger


def log_timed(func):
    """
    Decorator to log an expensive computation with timing and errors.

    Logs to numerics.log with:
    - Function name and (truncated) arguments
    - Execution time
    - Result preview
    - Errors with full traceback

    Usage:
        @log_timed
        def evaluate_fom(params, spec, numerics):
            ...
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = setup_numerics_logger(func.__module__)

        bound_args = signature(func).bind(*args, **kwargs)
        bound_args.apply_defaults()
        param_str = ", ".join(f"{k}={_truncate_value(v)}" for k, v in bound_args.arguments.items())
        logger.debug(f"CALL: {func.__name__}()")
        logger.debug(f"  Args: {param_str}")

        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            elapsed = time.perf_counter() - start_time
            logger.error(f"  Failed in {elapsed:.3f}s: {type(e).__name__}: {e}")
            logger.debug(f"  Traceback: {traceback.format_exc()}")
            raise

        elapsed = time.perf_counter() - start_time
        logger.debug(f"  Result: {_truncate_value(result)}")
        logger.debug(f"  Done in {elapsed:.3f}s")
        return result

    return wrapper


def log_errors(func):
    """
    Decorator to catch and log exceptions with full traceback.

    Logs to errors.log with:
    - Function name and location
    - Full exception traceback
    - Parameters that caused the error

    Usage:
        @log_errors
        def run_modevol(run_config, out_dir, fmt, threads):
            ...
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger(func.__module__)

        try:
            return func(*args, **kwargs)

        except Exception as e:
            bound_args = signature(func).bind(*args, **kwargs)
            bound_args.apply_defaults()
            params = {k: _truncate_value(v) for k, v in bound_args.arguments.items()}

            logger.error(f"Exception in {func.__name__}(): {type(e).__name__}: {e}")
            logger.error(f"  Parameters: {params}")
            logger.debug(f"  Traceback:\n{traceback.format_exc()}")
            raise

    return wrapper


def _truncate_value(value, max_length=200):
    """
    Truncate a value for log display.

    Arrays are summarised by shape and dtype instead of printed.

    Args:
        value: Value to truncate
        max_length: Maximum length to display

    Returns:
        Truncated string representation
    """
    if value is None:
        return "None"

    if isinstance(value, np.ndarray):
        return f"ndarray(shape={value.shape}, dtype={value.dtype})"

    value_str = str(value)

    if len(value_str) <= max_length:
        return value_str

    return value_str[:max_length] + "..."
