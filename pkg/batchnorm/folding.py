from batchnorm.transform import population_moments
from batchnorm.types import DEFAULT_EPS, BnParams, BnStats, FoldedAffine, StatsSource
from helpers.errors import DimensionError
from tensor import sqrt


def bn_fold(params: BnParams, stats: BnStats, eps: float = DEFAULT_EPS,
            source: StatsSource = StatsSource.POPULATION) -> FoldedAffine:
    """
    Collapse inference-mode BN into one per-dimension scale and shift.

    Returns:
        FoldedAffine: scale = gamma / sqrt(Var + eps), shift = beta - scale * E.
    """
    if stats.dim != params.dim:
        raise DimensionError(f"stats of length {stats.dim} do not match {params.dim} BN parameters")
    mean, var = population_moments(stats, source)
    scale = params.gamma / sqrt(var + eps)
    return FoldedAffine(scale=scale, shift=params.beta - scale * mean)
