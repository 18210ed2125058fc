import numpy as np
import pytest

from penfbm import io
from penfbm.gaussgen import PathEnsemble, TimeGrid, sample_fbm


@pytest.fixture
def ensemble():
    return sample_fbm(0.7, TimeGrid(2.5, 16), 5, 3)


class TestCsv:
    def test_round_trip_exact(self, ensemble, tmp_path):
        p = tmp_path / "paths.csv"
        io.write_csv(ensemble, p)
        back = io.read_csv(p)
        assert np.array_equal(back.values, ensemble.values)
        assert back.grid.horizon == 2.5 and back.grid.n_steps == 16

    def test_layout(self, ensemble, tmp_path):
        p = tmp_path / "paths.csv"
        io.write_csv(ensemble, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "path_id,t,value"
        assert len(lines) == 1 + 5 * 17
        assert lines[1].startswith("0,0.0,0.0")


class TestBinary:
    def test_round_trip_exact(self, ensemble, tmp_path):
        p = tmp_path / "paths.bin"
        io.write_binary(ensemble, 0.7, p)
        H, back = io.read_binary(p)
        assert H == 0.7
        assert np.array_equal(back.values, ensemble.values)
        assert back.grid.horizon == 2.5 and back.grid.n_steps == 16

    def test_size(self, ensemble, tmp_path):
        p = tmp_path / "paths.bin"
        io.write_binary(ensemble, 0.7, p)
        assert p.stat().st_size == io.HEADER.size + 8 * 5 * 17

    def test_truncated(self, ensemble, tmp_path):
        p = tmp_path / "paths.bin"
        io.write_binary(ensemble, 0.7, p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError):
            io.read_binary(p)

    def test_weights_sidecar(self, tmp_path):
        w = np.array([0.5, 1e-300, 3.0])
        p = tmp_path / "weights.bin"
        io.write_weights(w, p)
        assert np.array_equal(io.read_weights(p), w)

    def test_single_path(self, tmp_path):
        ens = PathEnsemble(TimeGrid(1.0, 2), np.array([[0.0, 1.0, -2.0]]))
        p = tmp_path / "one.bin"
        io.write_binary(ens, 0.5, p)
        assert np.array_equal(io.read_binary(p)[1].values, ens.values)
