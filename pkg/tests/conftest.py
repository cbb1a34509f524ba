import numpy as np
import pytest

from lseig.mesh import DomainSpec, Mesh, build_initial_mesh, refine_uniform


@pytest.fixture
def criss_cross():
    return build_initial_mesh(DomainSpec("unit-square", 1))


@pytest.fixture
def square4():
    return build_initial_mesh(DomainSpec("unit-square", 4))


@pytest.fixture
def lshape():
    return build_initial_mesh(DomainSpec("l-shape", 1))


@pytest.fixture
def right_triangle():
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def coarse_meshes():
    """Three small meshes used by the dense cross-checks."""
    m1 = build_initial_mesh(DomainSpec("unit-square", 1))
    m2 = build_initial_mesh(DomainSpec("unit-square", 2))
    m3 = refine_uniform(build_initial_mesh(DomainSpec("l-shape", 1)))
    return [m1, m2, m3]


_ACCEPTANCE = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion.

    The line is printed immediately (visible with ``-s``) and repeated in the
    terminal summary so that it shows up in a plain ``pytest -v`` log.
    """
    def report(number, title, ok, detail):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}; {detail}"
        print(line)
        _ACCEPTANCE.append((number, line))
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
