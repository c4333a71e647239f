"""Penalty functions on the shape parameters and their joint combinations.

Three penalties for k (the exponential form of Coles and Dixon 1999 and
the beta forms of Martins and Stedinger 2000 and Park 2005) cross six
penalties for h: the same three formulas applied verbatim to h, plus
three with constants adjusted to the wider range (-1.2, 1.2).  Penalized
likelihood multiplies the two factors, so the log-penalty is the sum and
a zero factor acts as a hard range barrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.special import betaln

__all__ = [
    "KPenaltyFamily",
    "HPenaltyVariant",
    "PenaltyHyperparams",
    "KPenalty",
    "HPenalty",
    "PenaltyCombo",
    "penalty_k",
    "penalty_h",
    "b_e_normalizer",
    "log_joint_penalty",
    "enumerate_combos",
    "combo_from_name",
]


class KPenaltyFamily(Enum):
    NONE = "none"
    CD = "cd"
    MS = "ms"
    PARK = "park"


class HPenaltyVariant(Enum):
    NONE = "none"
    CD_O = "cd_o"
    MS_O = "ms_o"
    P_O = "p_o"
    CD_A = "cd_a"
    MS_A = "ms_a"
    P_A = "p_a"


@dataclass(frozen=True)
class PenaltyHyperparams:
    """Knobs of one penalty factor.

    ``lam``/``alpha`` weight the exponential forms; ``p``/``q`` shape the
    beta forms; ``lo``/``hi`` are the range bounds the formula is written
    for.  Only the fields a given family reads are meaningful.
    """

    lam: float = 1.0
    alpha: float = 1.0
    p: float = 6.0
    q: float = 9.0
    lo: float = -0.5
    hi: float = 0.5

    def __post_init__(self) -> None:
        if not (self.lam >= 0 and self.alpha >= 0):
            raise ValueError("lam and alpha must be non-negative")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if not self.lo < self.hi:
            raise ValueError("lo must be below hi")


@dataclass(frozen=True)
class KPenalty:
    family: KPenaltyFamily
    hyper: PenaltyHyperparams | None

    def __post_init__(self) -> None:
        if (self.family is KPenaltyFamily.NONE) != (self.hyper is None):
            raise ValueError("hyper must be None exactly for the NONE family")

    @classmethod
    def none(cls) -> "KPenalty":
        return cls(KPenaltyFamily.NONE, None)

    @classmethod
    def cd(cls, lam: float = 1.0, alpha: float = 1.0) -> "KPenalty":
        hyper = PenaltyHyperparams(lam=lam, alpha=alpha, lo=-1.0, hi=0.0)
        return cls(KPenaltyFamily.CD, hyper)

    @classmethod
    def ms(cls, p: float = 6.0, q: float = 9.0) -> "KPenalty":
        return cls(KPenaltyFamily.MS, PenaltyHyperparams(p=p, q=q))

    @classmethod
    def park(cls, p: float = 2.5, q: float = 2.5) -> "KPenalty":
        return cls(KPenaltyFamily.PARK, PenaltyHyperparams(p=p, q=q))


@dataclass(frozen=True)
class HPenalty:
    """Penalty factor on h.

    ``rounded_center`` applies only to the adjusted exponential form: its
    published display subtracts the rounded constant 0.67 where the exact
    center value is 1/1.5 = 2/3.  The default keeps 2/3 so the factor is
    continuous (and at most 1) at h = 0; the flag restores the rounded
    constant, under which the factor slightly exceeds 1 just below zero.
    """

    variant: HPenaltyVariant
    hyper: PenaltyHyperparams | None
    rounded_center: bool = False

    def __post_init__(self) -> None:
        if (self.variant is HPenaltyVariant.NONE) != (self.hyper is None):
            raise ValueError("hyper must be None exactly for the NONE variant")
        if self.rounded_center and self.variant is not HPenaltyVariant.CD_A:
            raise ValueError("rounded_center applies only to the CD_A variant")

    @classmethod
    def none(cls) -> "HPenalty":
        return cls(HPenaltyVariant.NONE, None)

    @classmethod
    def cd_o(cls, lam: float = 1.0, alpha: float = 1.0) -> "HPenalty":
        hyper = PenaltyHyperparams(lam=lam, alpha=alpha, lo=-1.0, hi=0.0)
        return cls(HPenaltyVariant.CD_O, hyper)

    @classmethod
    def ms_o(cls, p: float = 6.0, q: float = 9.0) -> "HPenalty":
        return cls(HPenaltyVariant.MS_O, PenaltyHyperparams(p=p, q=q))

    @classmethod
    def p_o(cls, p: float = 2.5, q: float = 2.5) -> "HPenalty":
        return cls(HPenaltyVariant.P_O, PenaltyHyperparams(p=p, q=q))

    @classmethod
    def cd_a(
        cls, lam: float = 1.0, alpha: float = 1.0, rounded_center: bool = False
    ) -> "HPenalty":
        hyper = PenaltyHyperparams(lam=lam, alpha=alpha, lo=-1.2, hi=1.2)
        return cls(HPenaltyVariant.CD_A, hyper, rounded_center)

    @classmethod
    def ms_a(cls, p: float = 6.0, q: float = 9.0) -> "HPenalty":
        return cls(HPenaltyVariant.MS_A, PenaltyHyperparams(p=p, q=q, lo=-1.2, hi=1.2))

    @classmethod
    def p_a(cls, p: float = 2.5, q: float = 2.5) -> "HPenalty":
        return cls(HPenaltyVariant.P_A, PenaltyHyperparams(p=p, q=q, lo=-1.2, hi=1.2))


_K_NAMES = {
    KPenaltyFamily.CD: "CDo",
    KPenaltyFamily.MS: "MSo",
    KPenaltyFamily.PARK: "Po",
}
_H_NAMES = {
    HPenaltyVariant.CD_O: "CDo",
    HPenaltyVariant.MS_O: "MSo",
    HPenaltyVariant.P_O: "Po",
    HPenaltyVariant.CD_A: "CDa",
    HPenaltyVariant.MS_A: "MSa",
    HPenaltyVariant.P_A: "Pa",
}


@dataclass(frozen=True)
class PenaltyCombo:
    """A penalty on k paired with a penalty on h, treated as independent."""

    k_pen: KPenalty
    h_pen: HPenalty

    @property
    def name(self) -> str:
        if (
            self.k_pen.family is KPenaltyFamily.NONE
            and self.h_pen.variant is HPenaltyVariant.NONE
        ):
            return "MLE"
        kname = _K_NAMES.get(self.k_pen.family, "none")
        hname = _H_NAMES.get(self.h_pen.variant, "none")
        return f"MPLE.{kname}(k){hname}(h)"


def _cd_value(x: float, lam: float, alpha: float) -> float:
    if x >= 0.0:
        return 1.0
    if x <= -1.0:
        return 0.0
    return math.exp(-lam * (1.0 / (1.0 + x) - 1.0) ** alpha)


def _cd_adjusted_value(x: float, lam: float, alpha: float, rounded_center: bool) -> float:
    if x >= 0.0:
        return 1.0
    if x <= -1.2:
        return 0.0
    center = 0.67 if rounded_center else 2.0 / 3.0
    base = 1.0 / (1.5 + x) - center
    return math.exp(-lam * base**alpha)


def _beta_form(x: float, p: float, q: float, lo: float, hi: float) -> float:
    # beta density rescaled to (lo, hi); zero outside the open interval
    if not lo < x < hi:
        return 0.0
    width = hi - lo
    log_value = (
        (p - 1.0) * math.log(x - lo)
        + (q - 1.0) * math.log(hi - x)
        - betaln(p, q)
        - (p + q - 1.0) * math.log(width)
    )
    return math.exp(log_value)


def penalty_k(k: float, pen: KPenalty) -> float:
    """Penalty factor on k; a total function with values in [0, inf)."""
    if pen.family is KPenaltyFamily.NONE:
        return 1.0
    hyper = pen.hyper
    if pen.family is KPenaltyFamily.CD:
        return _cd_value(k, hyper.lam, hyper.alpha)
    return _beta_form(k, hyper.p, hyper.q, hyper.lo, hyper.hi)


def penalty_h(h: float, pen: HPenalty) -> float:
    """Penalty factor on h; a total function with values in [0, inf)."""
    if pen.variant is HPenaltyVariant.NONE:
        return 1.0
    hyper = pen.hyper
    if pen.variant is HPenaltyVariant.CD_O:
        return _cd_value(h, hyper.lam, hyper.alpha)
    if pen.variant is HPenaltyVariant.CD_A:
        return _cd_adjusted_value(h, hyper.lam, hyper.alpha, pen.rounded_center)
    return _beta_form(h, hyper.p, hyper.q, hyper.lo, hyper.hi)


def b_e_normalizer(p: float, q: float, lo: float, hi: float) -> float:
    """Normalizing constant of the beta form rescaled to (lo, hi).

    Equals (hi-lo)**(p+q-1) * B(p, q), by substituting
    u = (x-lo)/(hi-lo) in the defining integral.
    """
    if not (p > 0 and q > 0):
        raise ValueError("p and q must be positive")
    if not lo < hi:
        raise ValueError("lo must be below hi")
    return math.exp(betaln(p, q) + (p + q - 1.0) * math.log(hi - lo))


def log_joint_penalty(k: float, h: float, combo: PenaltyCombo) -> float:
    """ln p(k) + ln p(h), with -inf exactly when either factor is zero."""
    pk = penalty_k(k, combo.k_pen)
    ph = penalty_h(h, combo.h_pen)
    if pk == 0.0 or ph == 0.0:
        return -math.inf
    return math.log(pk) + math.log(ph)


def enumerate_combos() -> list[PenaltyCombo]:
    """All 18 penalty combinations with default hyperparameters."""
    k_pens = [KPenalty.cd(), KPenalty.ms(), KPenalty.park()]
    h_pens = [
        HPenalty.cd_o(),
        HPenalty.ms_o(),
        HPenalty.p_o(),
        HPenalty.cd_a(),
        HPenalty.ms_a(),
        HPenalty.p_a(),
    ]
    return [PenaltyCombo(kp, hp) for kp in k_pens for hp in h_pens]


def combo_from_name(name: str) -> PenaltyCombo:
    """Look a combination up by its report name, e.g. "MPLE.Po(k)CDa(h)"."""
    for combo in enumerate_combos():
        if combo.name == name:
            return combo
    valid = ", ".join(c.name for c in enumerate_combos())
    raise ValueError(f"unknown penalty combination {name!r}; valid names: {valid}")
