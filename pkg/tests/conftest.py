import pytest

from tilescope import cli


@pytest.fixture(scope="session")
def fr():
    return cli.load_builtin("frank_robinson").system


@pytest.fixture(scope="session")
def kenyon():
    return cli.load_builtin("kenyon").system


@pytest.fixture(scope="session")
def modified():
    return cli.load_builtin("kenyon_modified").system


@pytest.fixture(scope="session")
def fibonacci():
    return cli.load_builtin("fibonacci_1d").system


@pytest.fixture(scope="session")
def square():
    return cli.load_builtin("square_lattice").system


@pytest.fixture(scope="session")
def all_systems(fr, kenyon, modified, fibonacci, square):
    return {
        "frank_robinson": fr,
        "kenyon": kenyon,
        "kenyon_modified": modified,
        "fibonacci_1d": fibonacci,
        "square_lattice": square,
    }


@pytest.fixture(scope="session")
def ws_kenyon():
    return cli.Workspace(cli.load_builtin("kenyon"))


@pytest.fixture(scope="session")
def ws_fr():
    return cli.Workspace(cli.load_builtin("frank_robinson"))


@pytest.fixture(scope="session")
def ws_fibonacci():
    return cli.Workspace(cli.load_builtin("fibonacci_1d"))


@pytest.fixture(scope="session")
def ws_modified():
    return cli.Workspace(cli.load_builtin("kenyon_modified"))


@pytest.fixture(scope="session")
def ws_square():
    return cli.Workspace(cli.load_builtin("square_lattice"))
