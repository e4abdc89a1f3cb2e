"""Named, versioned inputs shared by the tests and the command line."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, Sequence

import numpy as np

from .errors import InvalidInput
from .forms import PolyForm, exterior_d, self_dual_basis
from .near_contact import quadratic_near_contact, random_quadratic_near_contact
from .near_symplectic import LogRadialProfile, build_model_form, liouville_primitive
from .neck import CapOperator, ModeBasis, ModeVector, NeckConfig
from .overtwisted import cubic_potential, direct_mu, perturbed_mu, rotational_mu
from .poly import PolyScalar

FIXTURE_VERSION = "1"


# -- 2-forms on R^4 ------------------------------------------------------------

TWO_FORMS: Dict[str, Callable[[], PolyForm]] = {
    "model-eps0": lambda: build_model_form(0),
    "model-eps1": lambda: build_model_form(1),
    "omega1": lambda: self_dual_basis()[0],
}


def two_form(name: str, eps=None) -> PolyForm:
    """A named 2-form; ``model`` takes an explicit eps."""
    if name == "model":
        return build_model_form(0 if eps is None else eps)
    if name in TWO_FORMS:
        return TWO_FORMS[name]()
    return _from_file(name, 4, 2)


def punctures(name: str, eps=None):
    """Degenerate points to cut out of the working domain."""
    if name == "model-eps0" or (name == "model" and not eps):
        return [(0.0, 0.0, 0.0, 0.0)]
    return []


# -- 1-forms on R^3 ------------------------------------------------------------

def standard_contact() -> PolyForm:
    x1, _, _ = PolyScalar.variables(3)
    return PolyForm.one_form([PolyScalar.zero(3), x1, PolyScalar.constant(3, 1)])


def closed_potential() -> PolyForm:
    """d(a) with a = (x1^2 + x2^2 - x3^2)/2: a zero at 0 but lam ^ dlam = 0."""
    x1, x2, x3 = PolyScalar.variables(3)
    return exterior_d(PolyForm.scalar((x1**2 + x2**2 - x3**2) * Fraction(1, 2)))


def index_minus() -> PolyForm:
    return quadratic_near_contact((1, 1, -1), [[1, 0, 0], [0, 1, 0], [0, 0, 2]])


def index_plus() -> PolyForm:
    return quadratic_near_contact((1, -1, -1), [[2, 0, 0], [0, 1, 0], [0, 0, 1]])


def interpolation_partner() -> PolyForm:
    """Same 1-jet at 0 as ``index_minus``: da + (3/2) mu + dC with the cubic C."""
    lam = index_minus()
    da = closed_potential()
    mu = lam - da
    return da + mu * Fraction(3, 2) + exterior_d(PolyForm.scalar(cubic_potential()))


ONE_FORMS: Dict[str, Callable[[], PolyForm]] = {
    "standard-contact": standard_contact,
    "closed-potential": closed_potential,
    "index-minus": index_minus,
    "index-plus": index_plus,
    "interpolation-partner": interpolation_partner,
}

NEAR_CONTACT_SUITE = ("standard-contact", "index-minus", "index-plus", "random-quadratic")


def one_form(name: str, seed: int = 0) -> PolyForm:
    if name == "random-quadratic":
        return random_quadratic_near_contact(seed)[0]
    if name in ONE_FORMS:
        return ONE_FORMS[name]()
    return _from_file(name, 3, 1)


# -- overtwisted family ----------------------------------------------------------

@dataclass(frozen=True)
class OvertwistedFixture:
    name: str
    mu: PolyForm
    C: PolyScalar
    expect_cycle: bool


def overtwisted(name: str = "rotational", seed: int = 0) -> OvertwistedFixture:
    """``rotational`` (default), ``perturbed`` (seeded) or ``direct`` (extra zeros)."""
    C = cubic_potential()
    if name == "rotational":
        return OvertwistedFixture(name, rotational_mu(), C, True)
    if name == "perturbed":
        return OvertwistedFixture(name, perturbed_mu(seed), C, True)
    if name == "direct":
        return OvertwistedFixture(name, direct_mu(), C, False)
    raise InvalidInput(f"unknown overtwisted fixture {name!r}")


OVERTWISTED_EPS = (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16), Fraction(1, 32))


# -- cutoff perturbation ------------------------------------------------------------

@dataclass(frozen=True)
class CutoffFixture:
    lam: PolyForm
    mu: PolyForm
    profile: LogRadialProfile


def cutoff() -> CutoffFixture:
    """Primitive of the eps = 0 model, the radial primitive of w3, and a log-radial cutoff on [1/2, 3/2]."""
    return CutoffFixture(
        liouville_primitive(build_model_form(0)),
        liouville_primitive(self_dual_basis()[2]),
        LogRadialProfile(0.5, 1.5),
    )


# -- neck and resolution -------------------------------------------------------------

def ladder(values: Sequence[float] = (2, 3, 4), multiplicity: int = 3) -> ModeBasis:
    return ModeBasis.from_values(values, multiplicity)


def cap(kind: str, basis: ModeBasis, seed: int = 0, bound: float = 1.0) -> CapOperator:
    if kind == "zero":
        return CapOperator.zero(basis)
    if kind == "identity":
        return CapOperator.identity(basis)
    if kind == "random":
        return CapOperator.random(basis, seed, bound)
    raise InvalidInput(f"unknown cap kind {kind!r}")


def neck_config(values: Sequence[float] = (2, 3, 4), seed: int = 0, caps: str = "random", T: float = 4.0,
                multiplicity: int = 3) -> NeckConfig:
    """A neck with caps of the given kind; random caps use seeds ``seed + 1`` (left) and ``seed + 2`` (right)."""
    basis = ladder(values, multiplicity)
    return NeckConfig(T, basis, cap(caps, basis, seed + 1), cap(caps, basis, seed + 2))


def incoming(basis: ModeBasis, seed: int = 0) -> ModeVector:
    """Standard normal amplitudes from ``seed``."""
    return ModeVector(basis, np.random.default_rng(seed).normal(size=basis.dimension))


RESOLUTION_MODEL_PARAM = 1.0


# -- files ---------------------------------------------------------------------------

def _from_file(name: str, n: int, k: int) -> PolyForm:
    path = Path(name)
    if not path.is_file():
        raise InvalidInput(f"unknown fixture {name!r} (not a built-in name or a readable file)")
    try:
        form = PolyForm.from_text(path.read_text())
    except ValueError as exc:
        raise InvalidInput(f"{path}: {exc}") from exc
    if (form.num_vars, form.degree) != (n, k):
        raise InvalidInput(f"{path}: expected a {k}-form on R^{n}")
    return form
