from pathlib import Path
from typing import Iterable, List

import pandas as pd
from tqdm import tqdm

from config import Config
from data import Dataset
from helpers.decorators import calc_time
from helpers.errors import DataFormatError
from logger import Logger as logger
from nn import load_checkpoint
from tasks.train import (
    SeedStreams,
    load_data_split,
    probe_inputs,
    probe_percentiles,
    probe_set,
    write_metrics,
)

COLUMNS = ["step", "p15", "p50", "p85"]


def collect_checkpoints(paths: Iterable) -> List[Path]:
    """ Expand snapshot directories into their `step_*.npz` files; files are taken as given. """
    found = []
    for path in map(Path, paths):
        if path.is_dir():
            snapshots = sorted(path.glob("step_*.npz"))
            if not snapshots:
                raise DataFormatError(f"no step_*.npz snapshots in {path}")
            found.extend(snapshots)
        elif path.exists():
            found.append(path)
        else:
            raise DataFormatError(f"checkpoint {path} does not exist")
    return found


def percentile_table(paths: List[Path], probe: Dataset, layer: int, unit: int, chunk: int) -> pd.DataFrame:
    rows = []
    for position, path in enumerate(tqdm(paths, desc="Checkpoints", ncols=100, disable=logger.quiet)):
        net, meta = load_checkpoint(path)
        step = meta.get("step")
        if step is None:
            logger.warning(f"{path} records no step; using its position {position}")
            step = position
        p15, p50, p85 = probe_percentiles(probe_inputs(net, probe.images, layer, unit, chunk))
        rows.append({"step": int(step), "p15": p15, "p50": p50, "p85": p85})
    return pd.DataFrame(rows, columns=COLUMNS).sort_values("step", kind="stable").reset_index(drop=True)


@calc_time
def run_job(config: Config) -> int:
    cfg = config.train
    paths = collect_checkpoints(config.checkpoints)
    logger.info(f"Probing layer {cfg.probe_layer} unit {cfg.probe_unit} over {len(paths)} checkpoints")
    test = load_data_split(cfg, "test")
    probe = probe_set(test, cfg.probe_size, SeedStreams.from_seed(cfg.seed).probe)

    table = percentile_table(paths, probe, cfg.probe_layer, cfg.probe_unit, cfg.batch_size)
    path = write_metrics(table, cfg.percentiles_path)
    logger.success(f"Percentiles of {len(table)} checkpoints written to {path}")
    return 0
