import pytest

from memkern.measure import MeasureSpec
from memkern import volterra


def canonical_measures() -> dict[str, MeasureSpec]:
    return {
        "d03": MeasureSpec.single_order(0.3),
        "d05": MeasureSpec.single_order(0.5),
        "d08": MeasureSpec.single_order(0.8),
        "two_atom": MeasureSpec.from_atoms([(0.3, 0.5), (0.7, 0.5)]),
        "uniform": MeasureSpec.uniform_weight(),
    }


@pytest.fixture(scope="session")
def measures():
    return canonical_measures()


@pytest.fixture(scope="session")
def half():
    return MeasureSpec.single_order(0.5)


@pytest.fixture(scope="session")
def sampled_2048(measures):
    """(l, k) discrete kernels at N=2048, T=1 for every canonical measure."""
    out = {}
    for name, spec in measures.items():
        tau = 1.0 / 2048
        out[name] = (volterra.sample_l(spec, tau, 2048),
                     volterra.sample_k(spec, tau, 2048))
    return out
