"""The identification code may only see what the oracle publishes."""

import ast
import pathlib

import pytest

from netident.dgp import logistic_fixture
from netident.oracle import SELF_PAIR, Oracle

SRC = pathlib.Path(__file__).resolve().parents[1] / "src" / "netident"
AUDITED = ["recovery.py", "parametric.py", "coupling.py", "extensions/__init__.py",
           "extensions/bounded.py", "extensions/nonseparable.py", "extensions/sparse.py"]
HIDDEN = {"_latent", "_store", "_lookup", "_issue", "_dgp", "_LatentStore", "reveal",
          "reveal_many", "plant_handle", "true_dgp"}


def names_used(path):
    tree = ast.parse(path.read_text())
    for node in ast.walk(tree):
        if isinstance(node, ast.Attribute):
            yield node.lineno, node.attr
        elif isinstance(node, ast.Name):
            yield node.lineno, node.id
        elif isinstance(node, ast.ImportFrom):
            yield node.lineno, node.module or ""
            for a in node.names:
                yield node.lineno, a.name
        elif isinstance(node, ast.Import):
            for a in node.names:
                yield node.lineno, a.name


@pytest.mark.parametrize("rel", AUDITED)
def test_no_hidden_accessor(rel):
    bad = [(ln, n) for ln, n in names_used(SRC / rel)
           if n in HIDDEN or n.split(".")[-1] == "testing"]
    assert not bad, f"{rel}: {bad}"


def test_every_extension_module_is_audited():
    found = {f"extensions/{p.name}" for p in (SRC / "extensions").glob("*.py")}
    assert found <= set(AUDITED)


def test_cli_imports_testing_only_inside_a_function():
    tree = ast.parse((SRC / "cli.py").read_text())
    top = [n for n in tree.body if isinstance(n, (ast.Import, ast.ImportFrom))]
    assert not any("testing" in (getattr(n, "module", None) or "") or
                   any("testing" in a.name for a in n.names) for n in top)
    inner = [n for n in ast.walk(tree) if isinstance(n, ast.ImportFrom) and n.module == "testing"]
    assert len(inner) == 1


def test_handle_surface():
    o = Oracle(logistic_fixture())
    h = o.find_handle(0.0, SELF_PAIR, 0.5)
    assert {n for n in vars(h) if not n.startswith("_")} == {"id", "covariate"}
    public = {n for n in dir(o) if not n.startswith("_")}
    assert not public & {"latent", "reveal", "dgp", "store"}
