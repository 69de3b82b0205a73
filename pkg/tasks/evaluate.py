from batchnorm import StatsSource
from config import Config
from helpers.decorators import calc_time
from logger import Logger as logger
from nn import Mode, load_checkpoint
from tasks.train import evaluate, load_data_split


@calc_time
def run_job(config: Config) -> int:
    cfg = config.train
    net, meta = load_checkpoint(config.checkpoint)
    if net.mode is Mode.TRAIN and net.batchnorm_layers():
        # a training checkpoint only carries exact averages once frozen
        logger.warning(f"{config.checkpoint} is a training checkpoint; using its moving averages")
        net.stats_source = StatsSource.EMA

    test = load_data_split(cfg, "test")
    accuracy, loss = evaluate(net, test, Mode.INFERENCE)
    logger.success(f"{config.checkpoint} (step {meta.get('step')}): test accuracy {accuracy:.4f}, "
                   f"cross-entropy {loss:.4f} over {len(test)} examples")
    return 0
