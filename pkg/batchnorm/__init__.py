from batchnorm.conv import (
    apply_conv_fold,
    bn_conv_backward,
    bn_conv_fold,
    bn_conv_forward_inference,
    bn_conv_forward_train,
)
from batchnorm.folding import bn_fold
from batchnorm.statistics import DEFAULT_EMA_DECAY, bn_accumulate_stats, bn_update_ema
from batchnorm.transform import (
    BnBackward,
    bn_backward,
    bn_backward_intermediates,
    bn_forward_inference,
    bn_forward_train,
)
from batchnorm.types import (
    DEFAULT_EPS,
    BnCache,
    BnParams,
    BnStats,
    ConvBnCache,
    ConvShape,
    FoldedAffine,
    StatsSource,
)
