from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from numkit.exceptions import ContractViolation

SIGNIFICANCE_LEVEL = 0.05


@dataclass(frozen=True)
class McNemarResult:
    statistic: float
    b: int
    c: int
    p_value: float
    significant: bool


def mcnemar(correct_a, correct_b, alpha=SIGNIFICANCE_LEVEL) -> McNemarResult:
    """
    Continuity-corrected McNemar chi-squared (|b - c| - 1)^2 / (b + c), where b
    counts samples only model A gets right and c those only model B gets right.
    No discordant samples gives 0.
    """
    a = np.asarray(correct_a, dtype=bool).reshape(-1)
    b_flags = np.asarray(correct_b, dtype=bool).reshape(-1)
    if a.size != b_flags.size:
        raise ContractViolation("both models must be scored on the same samples")
    b = int(np.count_nonzero(a & ~b_flags))
    c = int(np.count_nonzero(~a & b_flags))
    if b + c == 0:
        return McNemarResult(statistic=0.0, b=0, c=0, p_value=1.0, significant=False)
    statistic = (abs(b - c) - 1) ** 2 / (b + c)
    p_value = float(chi2.sf(statistic, df=1))
    return McNemarResult(statistic=statistic, b=b, c=c, p_value=p_value, significant=p_value < alpha)
