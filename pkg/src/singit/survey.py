"""Mean opinion scores with Student-t 95% confidence intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import stats

from .errors import DegenerateInputError, ValidationError

LOW, HIGH = 1, 5
CONFIDENCE = 0.95


@dataclass(frozen=True)
class SurveyResult:
    mean: float
    half_width: float
    n: int
    degenerate: bool = False

    def __str__(self):
        return f"{self.mean:.2f}±{self.half_width:.3f}"


def survey_stats(ratings: Iterable[int], confidence: float = CONFIDENCE) -> SurveyResult:
    """Mean rating and the half-width ``t * s / sqrt(n)`` of its t-interval.

    ``s`` is the sample standard deviation. A single rating has no spread
    estimate; its half-width is reported as 0 with ``degenerate`` set.
    """
    r = np.asarray(list(ratings))
    if r.size == 0:
        raise DegenerateInputError("no ratings")
    if not np.issubdtype(r.dtype, np.integer) or r.min() < LOW or r.max() > HIGH:
        raise ValidationError(f"ratings must be integers in [{LOW}, {HIGH}]")
    n = r.size
    mean = float(r.mean())
    if n == 1:
        return SurveyResult(mean, 0.0, 1, degenerate=True)
    s = float(r.std(ddof=1))
    t = stats.t.ppf(0.5 + confidence / 2, n - 1)
    return SurveyResult(mean, float(t * s / math.sqrt(n)), n)
