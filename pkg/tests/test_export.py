"""Tests for field and level-curve export."""

import numpy as np
import pytest

from macroipm.export import (
    export_field,
    read_curves_csv,
    read_field,
    read_field_csv,
    write_curves_csv,
    write_field_csv,
)
from macroipm.reconstruction import (
    DensityField,
    EulerianGrid,
    VelocityField,
    density_field,
    level_curves,
)

GRID = EulerianGrid(n_x1=4, n_x2=8, half_height=2.0)


@pytest.fixture
def density(flat_ansatz):
    return density_field(flat_ansatz(), 0.1, GRID).with_hash("sha256:abcdef0123456789")


def test_csv_layout(tmp_path, density):
    path = write_field_csv(density, tmp_path / "fields" / "rho.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "#kind=density"
    assert "#config_hash=sha256:abcdef0123456789" in lines
    assert "x1,x2,rho" in lines
    assert len([line for line in lines if not line.startswith("#")]) == 1 + 4 * 9


def test_csv_preserves_samples_bitwise(tmp_path, density):
    back = read_field_csv(write_field_csv(density, tmp_path / "rho.csv"))
    assert isinstance(back, DensityField)
    np.testing.assert_array_equal(back.rho, density.rho)
    assert back.time == density.time
    assert back.grid == density.grid
    assert back.config_hash == density.config_hash


def test_json_keeps_components_and_metadata(tmp_path, rng):
    grid = EulerianGrid(n_x1=4, n_x2=6, half_height=1.5, centering="cells")
    velocity = VelocityField(grid, 0.25, rng.normal(size=(2,) + grid.shape), mu=0.9)
    back = read_field(export_field(velocity, tmp_path / "v.json", fmt="json"))
    assert isinstance(back, VelocityField)
    np.testing.assert_array_equal(back.v, velocity.v)
    assert back.mu == 0.9
    assert back.grid.centering == "cells"
    assert back.config_hash is None


def test_unknown_format(tmp_path, density):
    with pytest.raises(ValueError):
        export_field(density, tmp_path / "rho.parquet", fmt="parquet")


def test_header_must_match_kind(tmp_path, density):
    path = write_field_csv(density, tmp_path / "rho.csv")
    path.write_text(path.read_text().replace("x1,x2,rho", "x1,x2,m1"))
    with pytest.raises(ValueError):
        read_field_csv(path)


def test_level_curves_file(tmp_path, flat_ansatz):
    curves = level_curves(flat_ansatz(), 0.1, [-0.5, 0.0, 0.5], x1=[0.0, 1.0, 2.0, 3.0])
    back = read_curves_csv(write_curves_csv(curves, tmp_path / "curves.csv"))
    assert back.time == 0.1
    np.testing.assert_array_equal(back.h, curves.h)
    np.testing.assert_array_equal(back.x1, curves.x1)
    np.testing.assert_array_equal(back.gamma, curves.gamma)
