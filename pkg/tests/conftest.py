import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from genfixtures import C17_BENCH  # noqa: E402

from htforge.graph import annotate, build_graph, sequential_cut  # noqa: E402
from htforge.netlist import parse_bench  # noqa: E402


@pytest.fixture(scope="session")
def c17():
    return parse_bench(C17_BENCH, name="c17")


@pytest.fixture(scope="session")
def c17_cut(c17):
    cg = sequential_cut(build_graph(c17))
    annotate(cg, k=4)
    return cg


@pytest.fixture()
def tmp_bench(tmp_path):
    p = tmp_path / "c17.bench"
    p.write_text(C17_BENCH, encoding="utf-8")
    return p
