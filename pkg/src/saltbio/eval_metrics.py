"""Error-rate metrics over match distances.

Scores are normalized Hamming distances: a comparison is accepted when its
distance is at most the threshold ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FormatError, ParameterError

DET_EPS = 1e-6
_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class ScoreSet:
    genuine: tuple[float, ...]
    impostor: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "genuine", tuple(float(x) for x in self.genuine))
        object.__setattr__(self, "impostor", tuple(float(x) for x in self.impostor))
        for x in self.genuine + self.impostor:
            if not 0.0 <= x <= 1.0:
                raise DomainError(f"distance {x} outside [0, 1]")


def far(s: ScoreSet, tau: float) -> float:
    """False accept rate: share of impostor distances at or below ``tau``."""
    if not s.impostor:
        raise DomainError("impostor list is empty")
    imp = np.asarray(s.impostor)
    return float(np.count_nonzero(imp <= tau)) / imp.size


def frr(s: ScoreSet, tau: float) -> float:
    """False reject rate: share of genuine distances above ``tau``."""
    if not s.genuine:
        raise DomainError("genuine list is empty")
    gen = np.asarray(s.genuine)
    return float(np.count_nonzero(gen > tau)) / gen.size


def _check_grid(taus: Sequence[float]) -> list[float]:
    taus = [float(t) for t in taus]
    if any(b < a for a, b in zip(taus, taus[1:])):
        raise ParameterError("threshold grid must be sorted ascending")
    return taus


def roc_points(s: ScoreSet, taus: Sequence[float]) -> list[tuple[float, float, float]]:
    return [(t, far(s, t), frr(s, t)) for t in _check_grid(taus)]


def probit(p: float, eps: float = DET_EPS) -> float:
    return _STD_NORMAL.inv_cdf(min(max(p, eps), 1.0 - eps))


def det_points(s: ScoreSet, taus: Sequence[float]) -> list[tuple[float, float, float, float, float]]:
    """ROC points plus probit-transformed rates: (tau, far, frr, probit(far), probit(frr))."""
    return [(t, a, r, probit(a), probit(r)) for t, a, r in roc_points(s, taus)]


def candidate_thresholds(s: ScoreSet) -> list[float]:
    return sorted(set(s.genuine) | set(s.impostor) | {0.0, 1.0})


def eer(s: ScoreSet) -> tuple[float, float]:
    """Equal error rate over the observed thresholds.

    Picks the threshold minimizing ``|far - frr|`` (smallest threshold on
    ties) and returns ``(tau_star, (far + frr) / 2)``.
    """
    if not s.genuine or not s.impostor:
        raise DomainError("EER needs non-empty genuine and impostor sets")
    taus = np.asarray(candidate_thresholds(s))
    gen = np.sort(np.asarray(s.genuine))
    imp = np.sort(np.asarray(s.impostor))
    # counts via binary search: impostor <= tau, genuine > tau
    fa = np.searchsorted(imp, taus, side="right") / imp.size
    fr = (gen.size - np.searchsorted(gen, taus, side="right")) / gen.size
    gap = np.abs(fa - fr)
    i = int(np.argmin(gap))  # first minimum = smallest tau
    return float(taus[i]), float((fa[i] + fr[i]) / 2)


def _rate(failures: int, attempts: int) -> float:
    if attempts <= 0:
        raise ParameterError("attempts must be positive")
    if not 0 <= failures <= attempts:
        raise ParameterError("failures must lie in [0, attempts]")
    return failures / attempts


def fte(enroll_failures: int, enroll_attempts: int) -> float:
    return _rate(enroll_failures, enroll_attempts)


def ftc(capture_failures: int, capture_attempts: int) -> float:
    return _rate(capture_failures, capture_attempts)


def template_capacity(max_users: int, max_refs: int) -> int:
    return max_users * max_refs


def store_capacity(store) -> int:
    return template_capacity(store.max_users, store.max_refs)


def parse_scores(lines: Iterable[str]) -> ScoreSet:
    """Parse ``label distance`` lines (label is genuine or impostor)."""
    gen, imp = [], []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in ("genuine", "impostor"):
            raise FormatError(f"score line {lineno}: expected 'genuine|impostor <distance>'")
        try:
            value = float(parts[1])
        except ValueError:
            raise FormatError(f"score line {lineno}: bad distance {parts[1]!r}") from None
        (gen if parts[0] == "genuine" else imp).append(value)
    return ScoreSet(tuple(gen), tuple(imp))


def format_scores(s: ScoreSet) -> str:
    rows = [f"genuine {x!r}" for x in s.genuine] + [f"impostor {x!r}" for x in s.impostor]
    return "\n".join(rows) + "\n"
