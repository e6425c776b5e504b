import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays
from hypothesis import strategies as st

from vpfft import microstructure as MS

from conftest import FERRITE


def test_single_pixel():
    g = MS.load_grid(io.BytesIO(b"1 1\n0\n"))
    assert g.shape == (1, 1) and g.phases[0, 0] == 0


def test_checkerboard():
    g = MS.load_grid(b"2 2\n0 1\n1 0\n")
    np.testing.assert_array_equal(g.phases, [[0, 1], [1, 0]])
    assert g.fraction() == 0.5


def test_non_square_orientation():
    g = MS.load_grid("3 2\n0 0 1\n1 1 1\n")
    assert (g.nx, g.ny) == (3, 2)
    assert g.phases[0, 2] == 1


@pytest.mark.parametrize("text,err", [
    ("", MS.MalformedHeaderError),
    ("a b\n0\n", MS.MalformedHeaderError),
    ("0 1\n", MS.MalformedHeaderError),
    ("2 2\n0 1\n", MS.DimensionMismatchError),
    ("2 1\n0 1 1\n", MS.DimensionMismatchError),
    ("1 1\nx\n", MS.UnknownPhaseError),
    ("1 1\n-1\n", MS.UnknownPhaseError),
])
def test_ascii_errors(text, err):
    with pytest.raises(err):
        MS.load_grid(text)


def test_unknown_format():
    with pytest.raises(MS.MicrostructureError):
        MS.load_grid(b"1 1\n0\n", format="png")


def test_pgm_ascii_threshold():
    data = b"P2\n# comment line\n3 1\n255\n0 127 128\n"
    np.testing.assert_array_equal(MS.load_grid(data, "pgm").phases, [[0, 0, 1]])


def test_pgm_binary():
    data = b"P5 2 2 255\n" + bytes([0, 255, 200, 10])
    np.testing.assert_array_equal(MS.load_grid(data, "pgm").phases, [[0, 1], [1, 0]])


@pytest.mark.parametrize("data,err", [
    (b"P3\n1 1\n255\n0\n", MS.MalformedHeaderError),
    (b"P2\n1\n", MS.MalformedHeaderError),
    (b"P2\n2 2\n255\n0 0 0\n", MS.DimensionMismatchError),
    (b"P5\n2 2\n255\n\x00", MS.DimensionMismatchError),
])
def test_pgm_errors(data, err):
    with pytest.raises(err):
        MS.load_grid(data, "pgm")


def test_pgm_round_trip():
    g = MS.synth_inclusion(9, 7, 0.3, "square")
    assert MS.load_grid(MS.emit_pgm(g), "pgm") == g
    assert MS.load_grid(MS.emit_pgm(g, binary=False), "pgm") == g


@settings(max_examples=50)
@given(arrays(np.int64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.integers(0, 3)))
def test_ascii_round_trip(phases):
    g = MS.PhaseGrid(phases)
    assert MS.load_grid(MS.emit_grid(g)) == g


@pytest.mark.parametrize("vf,expected", [(0.0, 0), (1.0, 1)])
def test_synth_extremes(vf, expected):
    g = MS.synth_inclusion(6, 5, vf)
    assert np.all(g.phases == expected)


def test_synth_disc_fraction():
    g = MS.synth_inclusion(31, 31, 0.17)
    assert abs(g.fraction() - 0.17) <= 1 / 31
    assert np.count_nonzero(g.phases) == round(0.17 * 31 * 31)
    # centred: the middle pixel is inclusion, the corners are matrix
    assert g.phases[15, 15] == 1 and g.phases[0, 0] == 0
    assert g == MS.synth_inclusion(31, 31, 0.17)


def test_synth_square_symmetric():
    g = MS.synth_inclusion(11, 11, 9 / 121, "square")
    assert g.phases[4:7, 4:7].sum() == 9


def test_synth_rejects():
    with pytest.raises(ValueError):
        MS.synth_inclusion(4, 4, 1.5)
    with pytest.raises(ValueError):
        MS.synth_inclusion(4, 4, 0.5, "star")


def test_fraction_exact():
    g = MS.PhaseGrid(np.array([[0, 1, 1], [0, 0, 0]]))
    assert g.fraction() == 2 / 6


def test_crop_top_left():
    g = MS.PhaseGrid(np.arange(12).reshape(3, 4) % 2)
    np.testing.assert_array_equal(g.crop(2).phases, g.phases[:2, :2])
    with pytest.raises(MS.DimensionMismatchError):
        g.crop(5)


def test_catalog():
    cat = MS.PhaseCatalog({0: FERRITE, 3: FERRITE}, {0: "ferrite"})
    g = MS.PhaseGrid(np.array([[0, 3], [3, 3]]))
    p = cat.per_pixel(g)
    assert p.sigma0.shape == (4,)
    with pytest.raises(MS.UnknownPhaseError):
        cat.check(MS.PhaseGrid(np.array([[1]])))
    with pytest.raises(MS.MicrostructureError):
        MS.PhaseCatalog({})
