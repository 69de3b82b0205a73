from dataclasses import replace
from typing import Tuple

from batchnorm.types import BnStats
from helpers.errors import BatchTooSmallError, ConfigError, DimensionError
from tensor import Tensor, as_tensor


DEFAULT_EMA_DECAY = 0.9


def _check_batch(stats: BnStats, mu_b: Tensor, sigma2_b: Tensor, m: int) -> Tuple[Tensor, Tensor]:
    mu_b, sigma2_b = as_tensor(mu_b), as_tensor(sigma2_b)
    if mu_b.shape != (stats.dim,) or sigma2_b.shape != (stats.dim,):
        raise DimensionError(
            f"batch moments {mu_b.shape}/{sigma2_b.shape} do not match stats of length {stats.dim}")
    if m < 2:
        raise BatchTooSmallError(f"population statistics need batches of m >= 2, got m={m}")
    return mu_b, sigma2_b


def bn_accumulate_stats(batch_stats: Tuple[Tensor, Tensor, int], stats: BnStats) -> BnStats:
    """
    Fold one mini-batch into the exact population average.

    E[x] is the running arithmetic mean of mu_B; Var[x] the running mean of
    m/(m-1) * sigma2_B. Every accumulated batch must have the same size.

    Args:
        batch_stats (tuple): (mu_b, sigma2_b, m) of one training mini-batch.
        stats (BnStats): Statistics accumulated so far.

    Returns:
        BnStats: New statistics with batches_seen incremented.
    """
    mu_b, sigma2_b, m = batch_stats
    mu_b, sigma2_b = _check_batch(stats, mu_b, sigma2_b, m)
    if stats.batch_size is not None and stats.batches_seen > 0 and stats.batch_size != m:
        raise ConfigError(
            f"cannot mix batch sizes in population statistics ({stats.batch_size} then {m})")

    n = stats.batches_seen + 1
    unbiased = sigma2_b * (m / (m - 1))
    return replace(
        stats,
        mean=stats.mean + (mu_b - stats.mean) / n,
        var=stats.var + (unbiased - stats.var) / n,
        batches_seen=n,
        batch_size=m,
    )


def bn_update_ema(stats: BnStats, mu_b: Tensor, sigma2_b: Tensor, m: int,
                  decay: float = DEFAULT_EMA_DECAY) -> BnStats:
    if not 0.0 < decay < 1.0:
        raise ConfigError(f"EMA decay must lie in (0, 1), got {decay}")
    mu_b, sigma2_b = _check_batch(stats, mu_b, sigma2_b, m)
    return replace(
        stats,
        ema_mean=decay * stats.ema_mean + (1.0 - decay) * mu_b,
        ema_var=decay * stats.ema_var + (1.0 - decay) * (sigma2_b * (m / (m - 1))),
        ema_updates=stats.ema_updates + 1,
    )
