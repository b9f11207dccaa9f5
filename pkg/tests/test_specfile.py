from __future__ import annotations

import textwrap

import pytest

from geolab import expr as ex
from geolab.errors import SpecFileError
from geolab.specfile import catalog_names, load_catalog, load_spec, parse_spec

CATALOG = [
    "brinkmann_cubic",
    "brinkmann_quadratic",
    "desitter3",
    "example2_3d",
    "exp_einstein3",
    "flat2",
    "flat3",
    "sphere2_semigeo",
]


def _spec(body: str) -> str:
    return textwrap.dedent(body).lstrip()


def test_catalog_is_complete():
    assert catalog_names() == CATALOG


@pytest.mark.parametrize("name", CATALOG)
def test_every_catalog_entry_loads(name):
    s = load_catalog(name)
    assert s.name == name
    assert s.digest.startswith("sha256:") and len(s.digest) == 71
    assert set(s.box()) == set(s.metric.coords)


def test_desitter_spec_contents():
    s = load_catalog("desitter3")
    assert s.metric.signature == "lorentzian" and s.metric.coords == ("t", "theta", "phi")
    assert [ex.evaluate(c, {}) for c in s.fields["T"].components] == [-1.0, 0.0, 0.0]
    assert s.domain["theta"] == (0.3, 2.8)


def test_exp_einstein_spec_has_axis():
    s = load_catalog("exp_einstein3")
    assert s.axis is not None and s.axis.k == 2 and s.axis.interval == (0.0, 2.0)
    assert s.run.grid == "0:2:0.001" and s.run.lam == -1.0


def test_load_spec_from_path_and_catalog_fallback(tmp_path):
    p = tmp_path / "m.spec"
    p.write_text('[metric]\ncoords = ["a", "b"]\ncomponents = [["1"], ["0", "exp(a)"]]\n', encoding="utf-8")
    s = load_spec(p)
    assert s.name == "m.spec" and s.metric.signature == "riemannian"
    assert load_spec("flat2.spec").name == "flat2"
    with pytest.raises(SpecFileError):
        load_spec(tmp_path / "missing.spec")


def test_full_matrix_with_matching_upper_triangle():
    s = parse_spec(_spec("""
        [metric]
        coords = ["x", "y"]
        components = [["1", "x*y"], ["y*x", "2"]]
    """))
    assert s.metric.n == 2


@pytest.mark.parametrize(
    "body, line, column",
    [
        ('[metric]\ncoords = ["x", "y"]\ncomponents = [["1", "x"], ["y", "1"]]\n', 3, 22),
        ('[metric]\ncoords = ["x", "y"]\ncomponents = [\n  ["1"],\n  ["0", "sin(x"],\n]\n', 5, 15),
        ('[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "z + 1"]]\n', 3, 29),
        ('[metric]\ncoords = ["x", "y"\n', 3, None),
    ],
    ids=["asymmetric", "syntax", "unknown-coordinate", "toml"],
)
def test_errors_carry_positions(body, line, column):
    with pytest.raises(SpecFileError) as info:
        parse_spec(body)
    assert info.value.line == line
    if column is not None:
        assert info.value.column == column


@pytest.mark.parametrize(
    "body",
    [
        '[metric]\ncoords = ["x", "x"]\ncomponents = [["1"], ["0", "1"]]\n',
        '[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"], ["0", "0", "1"]]\n',
        '[metric]\ncoords = ["x", "y"]\nsignature = "kahler"\ncomponents = [["1"], ["0", "1"]]\n',
        '[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n[fields.T]\ncomponents = ["1"]\n',
        '[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n[metric.domain]\nz = [0, 1]\n',
        '[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n[run]\ngrid = "0:1"\n',
        '[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n[run]\ncolour = 3\n',
        '[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n[extra]\na = 1\n',
        '[metric]\ncoords = ["x", "exp"]\ncomponents = [["1"], ["0", "1"]]\n',
        '[axis]\ncomponents = [["1"]]\n',
    ],
)
def test_invalid_specs_are_rejected(body):
    with pytest.raises(SpecFileError):
        parse_spec(body)


def test_run_defaults_are_parsed():
    s = parse_spec(_spec("""
        [metric]
        coords = ["r", "x"]
        components = [["1"], ["0", "exp(r)"]]

        [run]
        samples = 5
        seed = 7
        threshold = 1e-5
        eps = [1, 0.5]
        mode = "fd"
        at = {r = 0.1, x = 0.2}
        thresholds = {ricci_flat = 0.1}
    """))
    r = s.run
    assert (r.samples, r.seed, r.threshold, r.eps, r.mode) == (5, 7, 1e-5, [1.0, 0.5], "fd")
    assert r.at == {"r": 0.1, "x": 0.2} and r.thresholds == {"ricci_flat": 0.1}


def test_digest_depends_on_content_only():
    a = parse_spec('[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n', "a.spec")
    b = parse_spec('[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n', "b.spec")
    c = parse_spec('[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "2"]]\n', "a.spec")
    assert a.digest == b.digest != c.digest


def test_non_utf8_file(tmp_path):
    p = tmp_path / "bad.spec"
    p.write_bytes(b"[metric]\ncoords = [\"\xff\"]\n")
    with pytest.raises(SpecFileError):
        load_spec(p)
