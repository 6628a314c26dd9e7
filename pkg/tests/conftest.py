import numpy as np
import pytest

from h2curl.fields import Field


def trig_field(rng: np.random.Generator, amp: float = 1.0, freq: float = 2.0) -> Field:
    """Random smooth field built from four plane waves, with its exact curl."""
    a = amp * rng.normal(size=4)
    w = freq * rng.normal(size=(4, 2))
    ph = rng.uniform(0.0, 2 * np.pi, size=4)

    def th(i, x, y):
        return w[i, 0] * x + w[i, 1] * y + ph[i]

    def value(x, y):
        u1 = a[0] * np.sin(th(0, x, y)) + a[1] * np.cos(th(1, x, y))
        u2 = a[2] * np.sin(th(2, x, y)) + a[3] * np.cos(th(3, x, y))
        return np.stack([u1, u2], axis=-1)

    def curl(x, y):
        d2x = a[2] * w[2, 0] * np.cos(th(2, x, y)) - a[3] * w[3, 0] * np.sin(th(3, x, y))
        d1y = a[0] * w[0, 1] * np.cos(th(0, x, y)) - a[1] * w[1, 1] * np.sin(th(1, x, y))
        return d2x - d1y

    return Field(value, curl)


def poly_field(p) -> Field:
    """Wrap a VecPoly2D as a Field with value, curl and curl-curl."""
    c = p.curl()
    cc = p.curlcurl()
    return Field(p.value, lambda x, y: c(x, y), cc.value)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from checks import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
