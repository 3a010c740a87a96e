import numpy as np
import pytest

from data import (get_driver, get_initial_datum, get_vector_field, get_velocity, read_control_csv, read_path_csv,
                  read_rough_path_csv, read_table_csv, write_control_csv, write_path_csv, write_rough_path_csv,
                  write_table_csv)
from rough_paths import ParameterError, brownian_sample_lift
from variation import control_from_pvar


def test_path_csv(tmp_path):
    x, _ = brownian_sample_lift(0, 32, 2, 1.0, 2.5)
    filename = str(tmp_path / "path.csv")
    write_path_csv(x, filename)
    with open(filename) as f:
        assert f.readline().strip() == "t,x_1,x_2"
    y = read_path_csv(filename)
    assert np.array_equal(y.times, x.times)
    assert np.array_equal(y.values, x.values)


def test_rough_path_csv(tmp_path):
    _, rp = brownian_sample_lift(1, 20, 2, 1.0, 2.5)
    filename = str(tmp_path / "sub" / "lift.csv")
    write_rough_path_csv(rp, filename)
    header, rows = read_table_csv(filename)
    assert header == ["s", "t", "X1_1", "X1_2", "X2_11", "X2_12", "X2_21", "X2_22"]
    assert rows.shape == (20, 8)

    back = read_rough_path_csv(filename, 2.5)
    for i, j in [(0, 20), (4, 9), (19, 20)]:
        np.testing.assert_allclose(back.x1(i, j), rp.x1(i, j), atol=1e-15)
        np.testing.assert_allclose(back.x2(i, j), rp.x2(i, j), atol=1e-15)


def test_rough_path_csv_all_pairs(tmp_path):
    _, rp = brownian_sample_lift(2, 6, 1, 1.0, 2.5)
    filename = str(tmp_path / "lift.csv")
    write_rough_path_csv(rp, filename, all_pairs=True)
    _, rows = read_table_csv(filename)
    assert len(rows) == 7 * 6 // 2
    s, t = rows[8, 0], rows[8, 1]
    i, j = rp.index(s), rp.index(t)
    assert rows[8, 3] == pytest.approx(rp.x2(i, j)[0, 0], abs=1e-15)


def test_control_csv(tmp_path):
    x, _ = brownian_sample_lift(3, 10, 1, 1.0, 2.5)
    omega = control_from_pvar(x, 2.0)
    filename = str(tmp_path / "omega.csv")
    write_control_csv(omega, filename)
    back = read_control_csv(filename)
    assert np.array_equal(back.matrix(), omega.matrix())


def test_csv_output_is_full_precision(tmp_path):
    filename = str(tmp_path / "t.csv")
    write_table_csv(filename, ["a"], [[1.0 / 3.0]])
    with open(filename) as f:
        assert f.read().splitlines() == ["a", "0.33333333333333331"]


def test_get_driver():
    x, rp = get_driver("brownian:5,64,2", 2.5)
    assert len(x) == 65 and x.d == 2 and rp.dim == 2

    x, _ = get_driver("brownian:5", 2.5, n=16, T=2.0)
    assert len(x) == 17 and x.times[-1] == 2.0

    x, rp = get_driver("line:-2", 2.5, n=4)
    assert rp.x1(0, 4)[0] == -2.0

    x, _ = get_driver("smooth:parabola", 2.5, n=10)
    assert x.d == 2

    for spec in ["smooth:cubic", "brownian:1,2", "nothing"]:
        with pytest.raises(ParameterError):
            get_driver(spec, 2.5)


def test_get_driver_from_csv(tmp_path):
    x, _ = brownian_sample_lift(4, 8, 1, 1.0, 2.5)
    filename = str(tmp_path / "x.csv")
    write_path_csv(x, filename)
    y, rp = get_driver(filename, 2.2)
    assert np.array_equal(y.values, x.values) and rp.p == 2.2


def test_get_initial_datum(tmp_path):
    x = np.linspace(0, 1, 8, endpoint=False)
    assert get_initial_datum("sin", x)[2] == pytest.approx(1.0)
    assert np.all(get_initial_datum("zero", x) == 0)
    assert np.argmax(get_initial_datum("bump", x)) == 4

    filename = str(tmp_path / "u0.csv")
    write_table_csv(filename, ["x", "u"], np.column_stack([x[:5], x[:5]]))
    with pytest.raises(ParameterError):
        get_initial_datum(filename, x)
    with pytest.raises(ParameterError):
        get_initial_datum("square", x)


def test_get_velocity(tmp_path):
    assert np.all(get_velocity("const:0.5", 4, 2) == 0.5)
    assert get_velocity("2", 4).shape == (1, 4)

    filename = str(tmp_path / "v.csv")
    write_table_csv(filename, ["x", "v"], np.column_stack([np.arange(4.0), np.arange(4.0) * 2]))
    np.testing.assert_array_equal(get_velocity(filename, 4), [[0.0, 2.0, 4.0, 6.0]])
    two = str(tmp_path / "v2.csv")
    write_table_csv(two, ["x", "V_1", "V_2"], np.column_stack([np.arange(4.0), np.ones(4), -np.ones(4)]))
    np.testing.assert_array_equal(get_velocity(two, 4), [[1.0] * 4, [-1.0] * 4])
    assert get_velocity(two, 4, 1).shape == (1, 4)
    with pytest.raises(ParameterError):
        get_velocity(two, 5)
    with pytest.raises(ParameterError):
        get_velocity("wind", 4)


def test_custom_table_field(tmp_path):
    knots = np.linspace(-1, 1, 21)
    filename = str(tmp_path / "field.csv")
    write_table_csv(filename, ["y", "f"], np.column_stack([knots, knots ** 2]))
    vf = get_vector_field(f"custom-table:{filename}")
    assert vf(0.5)[0, 0] == pytest.approx(0.25)
    assert get_vector_field("sin", N=2, d=3).N == 2
