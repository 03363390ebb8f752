import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from curveops import CurveSpec, Poly

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PHI7 = Poly.from_roots([-1.15, -1.05, -1.0, 1.0, 1.1, 1.2, 1.3])

# benchmark curves, all with the Legendre weight
BENCH1 = {
    "cubic": Poly((1, 1, -1, 1)),
    "quartic": Poly((1, 1, -1, 1, 1)),
    "sextic": Poly(tuple(np.array([1, 1, -1, 1, -1, 1, 1]) / 10)),
    "even_sextic": Poly((1, 0, -1, 0, -1, 0, 1)),
}
BENCH2 = {
    "quartic": Poly.from_roots([-2.0, -1.0, 1.0, 1.25]),
    "phi7": PHI7,
    "octic": PHI7 * Poly((1.25, 1.0)),
    "even_octic": Poly.from_roots([-1, 1, -1.05, 1.05, -1.1, 1.1, -1.15, 1.15]),
}

# representative curves with closed-form bases
EXPLICIT = {
    (1, 1): Poly((0.5, 2.0)),
    (1, 2): Poly((1.0, -0.5, 1.0)),
    (2, 1): Poly((1.0, 1.0)),
    (2, 2): Poly((2.0, 0.0, -1.0)),
    (2, 3): Poly((3.0, 1.0, 0.0, -1.0)),
    (2, 4): Poly((2.0, 0.0, 0.0, 0.0, -1.0)),
}


def general_curve(m: int, d: int, seed: int = 0) -> CurveSpec:
    """A curve of degree d with a dominant leading coefficient, positive on [-1, 1] for m = 2."""
    rng = np.random.default_rng(1000 * m + 10 * d + seed)
    low = rng.uniform(-0.5, 0.5, d)
    if m == 1:
        return CurveSpec(1, Poly(tuple(np.r_[low, 1.0])))
    coeffs = np.r_[d + 1.0, low[1:], 0.5 * (-1) ** d]
    return CurveSpec(2, Poly(tuple(coeffs)))


# acceptance outcomes, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
