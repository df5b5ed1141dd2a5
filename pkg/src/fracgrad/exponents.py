"""Critical exponents governing existence and regularity of the problem."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import InvalidArgument


@dataclass(frozen=True)
class ExponentSet:
    N: int
    s: float
    m: float
    beta: float
    p_star: float
    p_star_beta: float
    sobolev_gain: float
    grad_blowup: float
    p_upper: float
    nonexist_threshold: float

    def as_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity
        return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


def check_order(s: float) -> float:
    s = float(s)
    if not 0.5 < s < 1.0:
        raise InvalidArgument(f"s must lie in the open interval (1/2, 1), got {s!r}")
    return s


def critical_exponents(N: int, s: float, m: float = 1.0, beta: float = 0.0) -> ExponentSet:
    if int(N) != N or N < 1:
        raise InvalidArgument(f"dimension N must be an integer >= 1, got {N!r}")
    N = int(N)
    s = check_order(s)
    if m < 1:
        raise InvalidArgument(f"integrability m must be >= 1, got {m!r}")
    if not 0 <= beta < 2 * s - 1:
        raise InvalidArgument(f"beta must lie in [0, 2s-1) = [0, {2 * s - 1:g}), got {beta!r}")
    p_star = N / (N - 2 * s + 1)
    p_star_beta = N / (N - 2 * s + 1 + beta)
    gain = m * (2 * s - 1)
    sobolev_gain = math.inf if gain >= N else m * N / (N - gain)
    return ExponentSet(
        N=N,
        s=s,
        m=float(m),
        beta=float(beta),
        p_star=p_star,
        p_star_beta=p_star_beta,
        sobolev_gain=sobolev_gain,
        grad_blowup=1 / (1 - s),
        p_upper=s / (1 - s),
        nonexist_threshold=(2 * s - 1) * N / (1 - s) + 1,
    )
