from optim.schedule import SCHEDULES, LrSchedule, lr_at
from optim.sgd import SgdState, sgd_step
