import numpy as np
import pytest

from fracelastic import DispersionLaw, GridField, LatticeKernel, ValidationError, __version__
from fracelastic import io


def test_header_carries_version_and_hash(tmp_path):
    path = io.write_columns(tmp_path / "a.csv", {"x": np.arange(3)}, {"b": 1, "a": 2})
    first = path.read_text().splitlines()[0]
    assert first == f"# fracelastic {__version__} config=sha256:{io.config_hash({'a': 2, 'b': 1})}"


def test_hash_ignores_key_order():
    assert io.config_hash({"a": 1, "b": [1, 2]}) == io.config_hash({"b": [1, 2], "a": 1})
    assert io.config_hash({"a": 1}) != io.config_hash({"a": 1.5})


def test_csv_round_trip_is_exact(tmp_path, rng):
    data = {"x": rng.normal(size=50), "y": rng.normal(size=50) * 1e-300, "n": np.arange(50)}
    path = io.write_columns(tmp_path / "d.csv", data)
    columns, back, comments = io.read_csv(path)
    assert columns == ["x", "y", "n"]
    for key in data:
        np.testing.assert_array_equal(back[key], data[key])
    assert len(comments) == 1


def test_row_length_checked(tmp_path):
    with pytest.raises(ValidationError):
        io.write_csv(tmp_path / "bad.csv", ["a", "b"], [(1,)])


def test_law_round_trip(tmp_path):
    law = DispersionLaw(((1.5, 0.25), (2.0, -1.0)), 0.5)
    assert io.read_law(io.write_law(tmp_path / "law.json", law)) == law


def test_kernel_round_trip(tmp_path, rng):
    kernel = LatticeKernel(rng.normal(size=17), 0.5)
    back = io.read_kernel(io.write_kernel(tmp_path / "k.csv", kernel), spacing=0.5)
    np.testing.assert_array_equal(back.coefficients, kernel.coefficients)


def test_kernel_rows_must_be_ordered(tmp_path):
    io.write_columns(tmp_path / "k.csv", {"n": np.array([1, 3]), "K": np.array([1.0, 2.0])})
    with pytest.raises(ValidationError):
        io.read_kernel(tmp_path / "k.csv")


def test_grid_field_round_trip(tmp_path, rng):
    field = GridField(rng.normal(size=16), 0.125, -1.0)
    back = io.read_grid_field(io.write_grid_field(tmp_path / "g.csv", field))
    np.testing.assert_array_equal(back.samples, field.samples)
    assert back.spacing == pytest.approx(0.125) and back.origin == -1.0


def test_binary_trajectory_round_trip(tmp_path, rng):
    frames = rng.normal(size=(5, 7))
    with io.TrajectoryBinaryWriter(tmp_path / "t.bin") as writer:
        for i, u in enumerate(frames):
            writer.write(float(i), u)
    raw = (tmp_path / "t.bin").read_bytes()
    assert raw[:5] == b"FLAT1" and len(raw) == 5 + 8 * frames.size
    np.testing.assert_array_equal(io.read_trajectory_binary(tmp_path / "t.bin", 7), frames)
    with pytest.raises(ValidationError):
        io.read_trajectory_binary(tmp_path / "t.bin", 6)


def test_csv_trajectory_round_trip(tmp_path, rng):
    u, v = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    with io.TrajectoryCsvWriter(tmp_path / "t.csv", {"x": 1}) as writer:
        for i in range(3):
            writer.write(0.5 * i, u[i], v[i])
    t, u2, v2 = io.read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(t, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(u2, u)
    np.testing.assert_array_equal(v2, v)


def test_json_rejects_non_objects(tmp_path):
    (tmp_path / "a.json").write_text("[1, 2]")
    with pytest.raises(ValidationError):
        io.read_json(tmp_path / "a.json")
    (tmp_path / "b.json").write_text("{oops")
    with pytest.raises(ValidationError):
        io.read_json(tmp_path / "b.json")
