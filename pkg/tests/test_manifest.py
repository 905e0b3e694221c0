import textwrap

import pytest

from deformgeo.builders import build_deformation, build_gauge, build_riemann
from deformgeo import suite
from deformgeo.errors import DegenerateDeformation, ManifestError
from deformgeo.manifest import DEFAULT_TOLERANCES, load, loads, verify_settings

BASE = """\
[domain]
coords = ["x", "y"]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]
resolution = [3, 3]
"""


def manifest(body):
    return loads(BASE + textwrap.dedent(body))


def test_valid_riemann_manifest():
    m = manifest("""
        [constants]
        a = 0.5

        [riemann]
        vierbein = [["1", "0"], ["0", "1 + a*x^2"]]
        """)
    assert m.task == "riemann" and m.coords == ("x", "y") and m.constants == {"a": 0.5}
    assert len(m.sha256) == 64
    setup = build_riemann(m)
    assert setup.vierbein.matrix([1.0, 0.0])[1, 1] == 1.5


def test_toml_syntax_error_has_position():
    with pytest.raises(ManifestError) as info:
        loads(BASE + "[riemann]\nvierbein = [[\"1\", \n")
    assert info.value.line is not None


@pytest.mark.parametrize("body, field", [
    ("[riemann]\nvierbein = [[\"1\",\"0\"],[\"0\",\"1\"]]\n[gauge]\ngroup = \"so3\"\n", None),
    ("[bogus]\nx = 1\n[riemann]\nvierbein = [[\"1\",\"0\"],[\"0\",\"1\"]]\n", "bogus"),
    ("[riemann]\nvierbein = [[\"1\",\"0\"],[\"0\",\"z\"]]\n", "riemann.vierbein"),
    ("[riemann]\nvierbein = [[\"1\",\"0\"],[\"0\",\"1 +\"]]\n", "riemann.vierbein"),
    ("[riemann]\nvierbein = [[\"1\",\"0\"]]\n", "riemann.vierbein"),
    ("[constants]\nx = 2.0\n[riemann]\nvierbein = [[\"1\",\"0\"],[\"0\",\"1\"]]\n", "constants"),
    ("[gauge]\ngroup = \"so3\"\nconnection = [[\"x\",\"y\"]]\n", "gauge.connection"),
])
def test_invalid_manifests(body, field):
    with pytest.raises(ManifestError) as info:
        loads(BASE + body) if field in (None, "bogus", "constants") else _build(loads(BASE + body))
    assert info.value.field == field


def _build(m):
    return {"riemann": build_riemann, "gauge": build_gauge, "deformation": build_deformation}[m.task](m)


def test_error_points_at_line_and_column():
    text = BASE + "\n[riemann]\n  vierbein = [[\"1\",\"0\"],[\"0\",\"q\"]]\n"
    with pytest.raises(ManifestError) as info:
        build_riemann(loads(text))
    assert (info.value.line, info.value.column) == (8, 3)
    assert "line 8, column 3" in str(info.value)


def test_bad_domain():
    with pytest.raises(ManifestError) as info:
        loads(BASE.replace("hi = [1.0, 1.0]", "hi = [1.0, -2.0]") + "[riemann]\nvierbein = [[\"1\",\"0\"],[\"0\",\"1\"]]\n")
    assert info.value.field == "domain"


def test_singular_box_is_rejected():
    m = manifest("""
        [riemann]
        vierbein = [["1", "0"], ["0", "x"]]
        """)
    with pytest.raises(DegenerateDeformation) as info:
        suite.build(m)
    assert info.value.point == [0.0, -1.0]


def test_verify_settings():
    m = manifest("""
        [riemann]
        vierbein = [["1", "0"], ["0", "1"]]

        [verify]
        seed = 9
        samples = 12
        tolerances = { commutator = 1e-9 }
        """)
    s = verify_settings(m)
    assert (s.seed, s.samples, s.tol("commutator")) == (9, 12, 1e-9)
    assert s.tol("rho_fd") == DEFAULT_TOLERANCES["rho_fd"]
    s = verify_settings(m, seed=3, tolerance_scale=10.0)
    assert s.seed == 3 and s.tol("commutator") == pytest.approx(1e-8)
    with pytest.raises(ManifestError):
        verify_settings(m, seed=-1)
    bad = manifest("""
        [riemann]
        vierbein = [["1", "0"], ["0", "1"]]

        [verify]
        tolerances = { nonsense = 1.0 }
        """)
    with pytest.raises(ManifestError):
        verify_settings(bad)


def test_missing_file(tmp_path):
    with pytest.raises(ManifestError):
        load(tmp_path / "absent.toml")
