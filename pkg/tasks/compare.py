from dataclasses import replace
from typing import Dict

import pandas as pd

from config import Config, TrainConfig
from helpers.decorators import calc_time
from logger import Logger as logger
from tasks.train import TrainResult, load_data, train, write_outputs

ARMS = ("baseline", "bn")


def stability(metrics: pd.DataFrame) -> float:
    """ Standard deviation of the probe median over the last half of the eval points. """
    tail = metrics["p50"].iloc[len(metrics) // 2:]
    return float(tail.std(ddof=0))


def arm_config(config: TrainConfig, arm: str) -> TrainConfig:
    return replace(config, bn=(arm == "bn"), out=str(config.arm_path(arm))).validate()


def summarize(results: Dict[str, TrainResult]) -> pd.DataFrame:
    rows = []
    for arm, result in results.items():
        metrics = result.metrics()
        rows.append({
            "arm": arm,
            "final_step": int(metrics["step"].iloc[-1]),
            "final_accuracy": float(metrics["test_accuracy"].iloc[-1]),
            "p50_std": stability(metrics),
        })
    return pd.DataFrame(rows)


@calc_time
def run_job(config: Config) -> int:
    cfg = config.train
    configs = {arm: arm_config(cfg, arm) for arm in ARMS}
    train_set, test_set = load_data(cfg)

    results = {}
    for arm, arm_cfg in configs.items():
        logger.info(f"Training {arm} arm for {arm_cfg.steps} steps (seed {arm_cfg.seed})")
        results[arm] = train(arm_cfg, train_set, test_set)
        write_outputs(results[arm])

    summary = summarize(results)
    logger.log(summary.to_string(index=False))
    baseline, bn = summary.set_index("arm").loc["baseline"], summary.set_index("arm").loc["bn"]
    if bn.final_accuracy > baseline.final_accuracy:
        logger.success(f"BN arm ahead: {bn.final_accuracy:.4f} vs {baseline.final_accuracy:.4f}")
    else:
        logger.warning(f"BN arm not ahead: {bn.final_accuracy:.4f} vs {baseline.final_accuracy:.4f}")
    if bn.p50_std < baseline.p50_std:
        logger.success(f"BN probe median more stable: std {bn.p50_std:.4g} vs {baseline.p50_std:.4g}")
    else:
        logger.warning(f"BN probe median not more stable: std {bn.p50_std:.4g} vs {baseline.p50_std:.4g}")
    return 0
