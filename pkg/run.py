import sys
import time

from tasks import (
    compare,
    evaluate,
    fold,
    gradcheck,
    percentiles,
    train,
)

from config import Config

from helpers.decorators import exit_on_error
from logger import Logger as logger

JOBS = {
    "train": train.run_job,
    "compare": compare.run_job,
    "percentiles": percentiles.run_job,
    "gradcheck": gradcheck.run_job,
    "fold": fold.run_job,
    "eval": evaluate.run_job,
}


@exit_on_error
def main(argv=None) -> int:
    # Step 1: Get Arguments and Environment Variables to set Config
    config = Config(argv)

    # Step 2: run the selected job
    logger.info(f"Start {config.command} job")
    code = JOBS[config.command](config)
    if code == 0:
        logger.success(f"Finished {config.command} job")
    return code


if __name__ == "__main__":

    _s_time = time.time()
    exit_code = main()
    _e_time = time.time()
    logger.log(f"Program finished in {_e_time - _s_time:.2f} seconds")
    sys.exit(exit_code)
