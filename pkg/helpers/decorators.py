import functools
import time

from helpers.errors import BatchNormError
from logger import Logger as logger


def exit_on_error(func):
    """
    Run a job and turn library errors into a logged message and an exit code.

    The wrapped function returns an exit code itself (0 on success).
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except BatchNormError as e:
            logger.error(f"{type(e).__name__}: {e}")
            return e.exit_code
    return wrapper


def calc_time(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start = time.time()
        result = func(*args, **kwargs)
        end = time.time()
        logger.info(f"-> {func.__name__} execution time: {end - start:.2f} seconds")
        return result
    return wrapper
