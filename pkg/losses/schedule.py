import math

from numkit.exceptions import ContractViolation


def lambda_schedule(epoch: int, base: float, increment: float, step_every: int, cap: float) -> float:
    """
    min(base + increment * floor(epoch / step_every), cap).

    The face-recognition recipe starts at 0.001, adds 0.001 every tenth epoch
    and stops at 0.005.
    """
    if base < 0 or increment < 0:
        raise ContractViolation("base and increment must be >= 0")
    if step_every < 1:
        raise ContractViolation("step_every must be >= 1")
    if epoch < 0:
        raise ContractViolation("epoch must be >= 0")
    steps = math.floor(epoch / step_every)
    # 0.001 + 0.002 is not 0.003 in binary floating point
    return min(round(base + increment * steps, 12), cap)
