import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from qimds.cli import EXIT_CAP, EXIT_INPUT, EXIT_IO, EXIT_OK, data_section, fmt, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    return list(csv.DictReader(io.StringIO(data_section(text))))


def footer(text):
    items = {}
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            items[key] = value
    return items


def test_prob_hom(capsys):
    code, out, _ = run(capsys, "prob", "--n-alpha", "1", "--n-beta", "1",
                       "--m1", "1", "--m2", "1", "--m-alpha", "0", "--m-beta", "0")
    assert code == EXIT_OK
    rows = table(out)
    assert [r["method"] for r in rows] == ["oracle", "integral"]
    assert float(rows[0]["probability"]) == 0.0
    assert abs(float(rows[1]["probability"])) < 1e-14
    assert footer(out)["relative_deviation"] == "n/a"


def test_prob_all_side(capsys):
    _, out, _ = run(capsys, "prob", "--n-alpha", "3", "--n-beta", "4", "--m1", "0", "--m2", "0",
                    "--m-alpha", "3", "--m-beta", "4", "--method", "oracle")
    assert float(table(out)[0]["probability"]) == 2.0**-7


def test_prob_random_deviation(capsys):
    rng = np.random.default_rng(7)
    for _ in range(5):
        m = rng.multinomial(12, [0.25] * 4)
        _, out, _ = run(capsys, "prob", "--n-alpha", "6", "--n-beta", "6",
                        *sum(([f"--{k}", str(v)] for k, v in zip(("m1", "m2", "m-alpha", "m-beta"), m)), []))
        dev = footer(out)["relative_deviation"]
        assert dev == "n/a" or float(dev) < 1e-10


def test_exit_codes(capsys, tmp_path):
    code, _, err = run(capsys, "prob", "--n-alpha", "1", "--n-beta", "1",
                       "--m1", "1", "--m2", "0", "--m-alpha", "0", "--m-beta", "0")
    assert code == EXIT_INPUT and err
    code, _, _ = run(capsys, "prob", "--n-alpha", "16", "--n-beta", "16", "--m1", "16",
                     "--m2", "16", "--m-alpha", "0", "--m-beta", "0", "--method", "oracle")
    assert code == EXIT_CAP
    code, _, _ = run(capsys, "scan", "--n-alpha", "2", "--n-beta", "2", "--m1", "1", "--m2", "1",
                     "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == EXIT_IO
    code, _, _ = run(capsys, "scan", "--n-alpha", "2", "--n-beta", "2", "--m1", "3", "--m2", "3")
    assert code == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["scan", "--n-alpha", "x"])
    assert exc.value.code == 2


def test_scan_large_dip(capsys, tmp_path):
    path = tmp_path / "scan.csv"
    code, _, _ = run(capsys, "scan", "--n-alpha", "100", "--n-beta", "100", "--m1", "17",
                     "--m2", "83", "--ssb", "--out", str(path))
    assert code == EXIT_OK
    text = path.read_text()
    rows = table(text)
    p = [float(r["probability"]) for r in rows]
    assert len(p) == 101 and p[50] < p[49] and p[50] < p[51]
    meta = footer(text)
    assert meta["central_feature"] == "dip"
    assert meta["command"] == "scan"
    assert float(meta["ssb_contrast"]) < 0.02
    assert all(r["ssb_probability"] for r in rows)


def test_scan_with_loss(capsys):
    _, out, _ = run(capsys, "scan", "--n-alpha", "100", "--n-beta", "100", "--m1", "1",
                    "--m2", "99", "--loss", "5")
    assert len(table(out)) == 96
    assert footer(out)["central_feature"] == "dip"
    assert footer(out)["lost"] == "5"


def test_rphi_extrema(capsys):
    _, out, _ = run(capsys, "rphi", "--m1", "17", "--m2", "83")
    rows = table(out)
    phi = np.array([float(r["phi"]) for r in rows])
    red = np.abs([float(r["reduced"]) for r in rows])
    top = phi[red >= red.max() * (1 - 1e-12)]
    assert np.allclose(np.sort(np.abs(top)), 0.73 * math.pi, atol=0.005 * math.pi)
    assert top.min() < 0 < top.max()


def test_surface_minima(capsys):
    _, out, _ = run(capsys, "surface", "--m1", "17", "--m2", "83", "--grid-size", "401")
    rows = table(out)
    lq = np.array([float(r["lambda_q"]) for r in rows])
    lc = np.array([float(r["lambda_c"]) for r in rows])
    F = np.array([float(r["F"]) for r in rows])
    assert len(rows) == 401**2
    line = np.abs(lc) < 1e-12
    for sign in (1, -1):
        half = line & (sign * lq > 0)
        x = lq[half][np.argmin(F[half])]
        assert x == pytest.approx(sign * 2.29, abs=0.02)
        assert F[half].min() < 0


def test_marginal(capsys):
    _, out, _ = run(capsys, "marginal", "--n-alpha", "4", "--n-beta", "3", "--method", "both",
                    "--threads", "3")
    rows = table(out)
    assert len(rows) == 36
    for r in rows:
        assert float(r["probability"]) == pytest.approx(float(r["probability_direct"]), abs=1e-14)
    assert float(footer(out)["total"]) == pytest.approx(1.0, abs=1e-12)


def test_emergence_zero_steps(capsys):
    _, out, _ = run(capsys, "emergence", "--M", "0", "--seed", "3")
    rows = table(out)
    assert rows == [{"step": "0", "position": "", "width": "inf"}]
    assert footer(out)["seed"] == "3"


def test_emergence_trace(capsys):
    _, out, _ = run(capsys, "emergence", "--M", "50", "--seed", "11")
    rows = table(out)
    assert len(rows) == 51
    assert float(rows[-1]["width"]) < float(rows[5]["width"])


def test_loss_sweep(capsys):
    _, out, _ = run(capsys, "loss-sweep", "--n-alpha", "20", "--n-beta", "20", "--M", "20",
                    "--loss", "1")
    rows = table(out)
    assert len(rows) == 21
    assert footer(out)["surviving_dips"] != ""


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0**-1074, 1e308, -math.pi):
        assert float(fmt(x)) == x
        mantissa = fmt(x).lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert len(mantissa) <= 17
    assert fmt(1 / 3) == "0.33333333333333331"
    assert fmt(3) == "3" and fmt(None) == "" and fmt(True) == "true"


COMMANDS = [
    ["prob", "--n-alpha", "3", "--n-beta", "2", "--m1", "1", "--m2", "2", "--m-alpha", "1", "--m-beta", "1"],
    ["scan", "--n-alpha", "10", "--n-beta", "10", "--m1", "3", "--m2", "5", "--ssb", "--loss", "2"],
    ["surface", "--m1", "3", "--m2", "5", "--grid-size", "21"],
    ["rphi", "--m1", "3", "--m2", "5", "--points", "101"],
    ["marginal", "--n-alpha", "5", "--n-beta", "5", "--threads", "4"],
    ["emergence", "--M", "20", "--seed", "42"],
    ["loss-sweep", "--n-alpha", "10", "--n-beta", "10", "--M", "10", "--loss", "2", "--threads", "2"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: a[0])
def test_byte_identical_data(capsys, argv):
    outputs = [run(capsys, *argv)[1] for _ in range(2)]
    assert data_section(outputs[0]).encode() == data_section(outputs[1]).encode()
    assert footer(outputs[0])["data_sha256"] == footer(outputs[1])["data_sha256"]


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "qimds", "emergence", "--M", "3", "--seed", "1"],
        capture_output=True, text=True, check=True,
    )
    assert res.stdout.startswith("# command: emergence\n")
    assert "\r" not in res.stdout
