import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import random_passive_z, sinc_array
from superdir.beamforming import eepb_solve
from superdir.coupling import CouplingMatrix, NetworkData, s_from_z
from superdir.errors import InvalidArgumentError, ParseError
from superdir.io import (
    EEP_HEADER,
    complex_from_json,
    complex_to_json,
    read_coupling,
    read_eep_csv,
    read_excitation,
    read_network_json,
    read_touchstone,
    write_coupling,
    write_eep_csv,
    write_excitation,
    write_network_json,
    write_report,
    write_solution,
    write_sweep_csv,
)
from superdir.patterns import HertzianDipolePattern
from superdir.robust import SweepPoint, ocrb_solve
from superdir.sensitivity import ErrorModel, monte_carlo


def sinc_coupling(m, d):
    b, v0 = sinc_array(m, d)
    return CouplingMatrix(b, v0)


# --- JSON -------------------------------------------------------------------------


def test_complex_json_round_trip(rng):
    z = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    assert np.array_equal(complex_from_json(json.loads(json.dumps(complex_to_json(z)))), z)
    assert complex_to_json(1 - 2j) == [1.0, -2.0]


@pytest.mark.parametrize("bad", [[[1, 2, 3]], [["a", 1]], [[1], [2]]])
def test_complex_json_rejects_malformed(bad):
    with pytest.raises(ParseError):
        complex_from_json(bad)


def test_coupling_round_trip_is_exact(tmp_path):
    c = CouplingMatrix(*sinc_array(4, 0.13), d_f0=[1, 1.5, 1, 2], cross_polar=0.25, route="sinc")
    path = tmp_path / "c.json"
    write_coupling(c, path)
    back = read_coupling(path)
    assert np.array_equal(back.b, c.b) and np.array_equal(back.v0, c.v0)
    assert np.array_equal(back.d_f0, c.d_f0)
    assert back.cross_polar == 0.25 and back.route == "sinc"


def test_coupling_file_errors(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"m": 2, "b": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}')
    with pytest.raises(ParseError, match="v0"):
        read_coupling(path)
    path.write_text('{"m": 3, "b": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]], "v0": [[1, 0], [1, 0]]}')
    with pytest.raises(ParseError, match="shape"):
        read_coupling(path)
    path.write_text('{"m": 2,\n "b": oops}')
    with pytest.raises(ParseError) as info:
        read_coupling(path)
    assert info.value.line == 2 and info.value.exit_code == 3
    path.write_text("[1, 2]")
    with pytest.raises(ParseError):
        read_coupling(path)
    with pytest.raises(ParseError):
        read_coupling(tmp_path / "missing.json")


def test_non_hermitian_coupling_file_is_a_parse_error(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"m": 2, "b": [[[1, 0], [5, 0]], [[0, 0], [1, 0]]], "v0": [[1, 0], [1, 0]]}')
    with pytest.raises(ParseError):
        read_coupling(path)


def test_network_json_round_trip(tmp_path, rng):
    z = random_passive_z(rng, 3)
    net = NetworkData([50, 60 - 5j, 40], s=s_from_z(z, 50.0), z=z, s_ref=50.0)
    path = tmp_path / "n.json"
    write_network_json(net, path)
    back = read_network_json(path)
    assert np.array_equal(back.z0, net.z0) and np.array_equal(back.s, net.s)
    assert np.array_equal(back.z, net.z) and back.s_ref == 50.0 and back.eta == net.eta


def test_excitation_round_trip(tmp_path):
    res = eepb_solve(sinc_coupling(3, 0.1))
    path = tmp_path / "a.json"
    write_excitation(res, path)
    back = read_excitation(path)
    assert np.array_equal(back.excitation, res.excitation)
    assert back.directivity == res.directivity and back.method == "eepb"


def test_solution_file_reads_as_excitation(tmp_path):
    sol = ocrb_solve(sinc_coupling(3, 0.1), 10.0)
    path = tmp_path / "s.json"
    write_solution(sol, path)
    obj = json.loads(path.read_text())
    assert obj["xi"] == 10.0 and obj["p"] == [sol.chosen_p, 0.0]
    back = read_excitation(path)
    assert np.array_equal(back.excitation, sol.excitation)
    assert back.method == "ocrb" and back.directivity == sol.directivity


def test_excitation_length_mismatch(tmp_path):
    path = tmp_path / "a.json"
    path.write_text('{"m": 3, "a": [[1, 0], [0, 1]]}')
    with pytest.raises(ParseError):
        read_excitation(path)


def test_report_and_samples(tmp_path):
    c = sinc_coupling(2, 0.2)
    rep = monte_carlo(eepb_solve(c).excitation, c, ErrorModel(0.05, 0.05), 200, seed=3)
    samples = tmp_path / "s.csv"
    text = write_report(rep, tmp_path / "r.json", bins=10, samples_path=samples)
    obj = json.loads(text)
    assert obj["n"] == 200 and obj["seed"] == 3 and sum(obj["histogram"]["counts"]) == 200
    assert len(obj["histogram"]["edges"]) == 11
    values = np.array([float(x) for x in samples.read_text().split()])
    assert np.array_equal(values, rep.samples)


def test_sweep_csv():
    pts = [SweepPoint(1.0, 2.5, -0.25, 1e-12), SweepPoint(0.1, None, None, None, 'Bad: "x"')]
    text = write_sweep_csv(pts)
    lines = text.splitlines()
    assert lines[0] == "xi,d,p_re,p_im,residual,error"
    assert lines[1] == "1.0,2.5,-0.25,0.0,1e-12,"
    assert lines[2] == "0.1,,,,,\"Bad: 'x'\""


# --- Touchstone ---------------------------------------------------------------------


def _s3():
    rng = np.random.default_rng(0)
    return s_from_z(random_passive_z(rng, 3), 50.0)


def _format(s, fmt):
    out = []
    for row in s:
        vals = []
        for x in row:
            if fmt == "RI":
                vals += [x.real, x.imag]
            elif fmt == "MA":
                vals += [abs(x), np.degrees(np.angle(x))]
            else:
                vals += [20 * np.log10(abs(x)), np.degrees(np.angle(x))]
        out.append(" ".join(f"{v:.17g}" for v in vals))
    return out


@pytest.mark.parametrize("fmt", ["RI", "MA", "DB"])
def test_touchstone_formats(tmp_path, fmt):
    s = _s3()
    rows = _format(s, fmt)
    text = f"! three ports\n# GHz S {fmt} R 50\n2.4 {rows[0]}\n{rows[1]}\n{rows[2]}  ! trailing\n"
    path = tmp_path / "a.s3p"
    path.write_text(text)
    net = read_touchstone(path)
    assert_allclose(net.s, s, atol=1e-14)
    assert_allclose(net.z0, 50) and net.s_ref == 50


def test_touchstone_two_port_column_order(tmp_path):
    path = tmp_path / "a.s2p"
    path.write_text("# Hz S RI R 75\n1e9 0.1 0 0.2 0 0.3 0 0.4 0\n")
    net = read_touchstone(path)
    # two-port data lists S11 S21 S12 S22
    assert_allclose(net.s, [[0.1, 0.3], [0.2, 0.4]])
    assert net.s_ref == 75


def test_touchstone_defaults_and_frequency_selection(tmp_path):
    path = tmp_path / "a.s1p"
    path.write_text("#\n1 0.5 0\n2 0.5 90\n3 0.5 180\n")
    with pytest.raises(InvalidArgumentError):
        read_touchstone(path)
    net = read_touchstone(path, freq_hz=2.1e9)  # default unit GHz, format MA
    assert_allclose(net.s, [[0.5j]], atol=1e-15)
    path.write_text("# MHz S MA\n100 0.5 0\n200 0.5 90\n")
    assert_allclose(read_touchstone(path, freq_hz=2e8).s, [[0.5j]], atol=1e-15)


@pytest.mark.parametrize("body, line", [
    ("# GHz Z RI R 50\n1 0.1 0\n", 1),
    ("# GHz S RI R fifty\n1 0.1 0\n", 1),
    ("# GHz S XX\n1 0.1 0\n", 1),
    ("# GHz S RI\n1 0.1 zero\n", 2),
    ("# GHz S RI\n\n1 0.1 0\n2 0.1\n", 4),
])
def test_touchstone_errors_carry_line_numbers(tmp_path, body, line):
    path = tmp_path / "a.s1p"
    path.write_text(body)
    with pytest.raises(ParseError) as info:
        read_touchstone(path)
    assert info.value.line == line


def test_touchstone_bad_names(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("1 0 0\n")
    with pytest.raises(ParseError):
        read_touchstone(path)
    empty = tmp_path / "e.s1p"
    empty.write_text("! nothing\n")
    with pytest.raises(ParseError):
        read_touchstone(empty)


# --- pattern CSV ------------------------------------------------------------------------


def test_eep_csv_round_trip(tmp_path):
    theta = np.arange(0, 181, 10.0)
    phi = np.arange(0, 360, 15.0)
    f = HertzianDipolePattern(axis=(1, 0, 0))
    tt, pp = np.meshgrid(np.deg2rad(theta), np.deg2rad(phi), indexing="ij")
    et, ep = f.field(tt, pp)
    path = tmp_path / "p.csv"
    write_eep_csv(path, theta, phi, et, ep)
    s = read_eep_csv(path)
    assert np.array_equal(s.e_theta, et) and np.array_equal(s.e_phi, ep)
    assert path.read_text().splitlines()[0] == ",".join(EEP_HEADER)


@pytest.mark.parametrize("rows, line", [
    (["0,0,1,0,0"], 2),
    (["0,0,1,0,0,x"], 2),
    (["0,0,1,0,0,0", "0,90,1,0,nan,0"], 3),
    (["0,90,1,0,0,0", "0,0,1,0,0,0", "90,0,1,0,0,0", "90,90,1,0,0,0"], 2),
])
def test_eep_csv_errors(tmp_path, rows, line):
    path = tmp_path / "p.csv"
    path.write_text(",".join(EEP_HEADER) + "\n" + "\n".join(rows) + "\n")
    with pytest.raises(ParseError) as info:
        read_eep_csv(path)
    assert info.value.line == line


def test_eep_csv_structure_errors(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("theta,phi\n")
    with pytest.raises(ParseError):
        read_eep_csv(path)
    path.write_text(",".join(EEP_HEADER) + "\n")
    with pytest.raises(ParseError):
        read_eep_csv(path)
    path.write_text(",".join(EEP_HEADER) + "\n0,0,1,0,0,0\n0,90,1,0,0,0\n90,0,1,0,0,0\n")
    with pytest.raises(ParseError, match="lattice"):
        read_eep_csv(path)
