import pytest

from dualflow.gfunction import kernel_g, majority_kernel, nlv_polynomial_g


@pytest.fixture(scope="session")
def majority():
    return majority_kernel(3)


@pytest.fixture(scope="session")
def majority_g(majority):
    return kernel_g(majority, label="majority3")


# reference nonlinear-voter rates in the interior-bistable phase:
# A = 4a1 - a4 = 0.1 > 0, B = 6a2 - 4a3 = -0.5, 3A+B = -0.2 < 0, 6A+B = 0.1 > 0
NLV_RATES = dict(a1=0.22, a2=0.35, a3=0.65, a4=0.78)


@pytest.fixture(scope="session")
def nlv_g():
    return nlv_polynomial_g(**NLV_RATES)


def hand_majority_cubic(p: float) -> float:
    """Independent oracle: the majority vote probability as a cubic."""
    return 3.0 * p * p - 2.0 * p ** 3
