from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from asdlab.forms import PolyForm, VectorFieldPoly, basis_indices
from asdlab.poly import PolyScalar

settings.register_profile("asdlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("asdlab")

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def polys(draw, n=4, max_degree=2, max_terms=4):
    terms = draw(st.dictionaries(
        st.tuples(*[st.integers(0, max_degree)] * n).filter(lambda e: sum(e) <= max_degree),
        rationals, max_size=max_terms))
    return PolyScalar(n, terms)


@st.composite
def forms(draw, n=4, k=None, max_degree=2):
    k = draw(st.integers(0, n)) if k is None else k
    idx = basis_indices(n, k)
    comps = {I: draw(polys(n, max_degree, 3)) for I in draw(st.lists(st.sampled_from(idx), max_size=3,
                                                                    unique=True))} if idx else {}
    return PolyForm(n, k, comps)


@st.composite
def vector_fields(draw, n=4, max_degree=1):
    return VectorFieldPoly(tuple(draw(polys(n, max_degree, 2)) for _ in range(n)))


def rational_point(n):
    return st.tuples(*[rationals] * n)


__all__ = ["polys", "forms", "vector_fields", "rational_point", "rationals", "Fraction"]
