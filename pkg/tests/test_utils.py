import numpy as np
import pytest

from src.errors.exceptions import DataFileNotFoundError, ValidationError
from src.utils.checksum import compute_file_checksum, config_digest, fingerprint_files
from src.utils.rng import child_rng
from src.utils.run_id import format_fraction, run_file_name


class TestChildRng:
    def test_same_key_same_stream(self):
        assert child_rng(3, 5, "shuffle").random() == child_rng(3, 5, "shuffle").random()

    def test_streams_are_independent(self):
        draws = {
            child_rng(3, 5, "shuffle").random(),
            child_rng(3, 5, "subset").random(),
            child_rng(3, 6, "shuffle").random(),
            child_rng(4, 5, "shuffle").random(),
        }
        assert len(draws) == 4

    def test_unknown_purpose(self):
        with pytest.raises(ValidationError):
            child_rng(0, 1, "weights")


class TestRunId:
    @pytest.mark.parametrize("value,text", [(0.0, "0"), (1.0, "1"), (0.25, "0.25"), (0.001, "0.001"), (0.1, "0.1"),
                                            (1e-7, "1e-07"), (0.123456789012, "0.123456789")])
    def test_format_fraction(self, value, text):
        assert format_fraction(value) == text

    def test_file_name(self):
        assert run_file_name("targeted", 0.5, 0.1, 3) == "run_targeted_0.5_0.1_3.csv"

    def test_small_fractions_get_their_own_file(self):
        assert run_file_name("untargeted", 0.0, 0.5, 0) != run_file_name("untargeted", 1e-7, 0.5, 0)
        assert run_file_name("untargeted", 1e-7, 0.5, 0) == "run_untargeted_1e-07_0.5_0.csv"


class TestChecksum:
    def test_file_checksum(self, tmp_path):
        path = tmp_path / "a.bin"
        path.write_bytes(b"abc")
        assert compute_file_checksum(path) == (
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        )

    def test_fingerprint_is_order_sensitive(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.write_bytes(b"1")
        b.write_bytes(b"2")
        assert fingerprint_files([a, b]) != fingerprint_files([b, a])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFileNotFoundError):
            compute_file_checksum(tmp_path / "missing")

    def test_config_digest_ignores_key_order(self):
        assert config_digest({"a": 1, "b": [1, 2]}) == config_digest({"b": [1, 2], "a": 1})
        assert config_digest({"a": 1}) != config_digest({"a": 2})
        assert len(config_digest({"x": np.float64(0.5)})) == 64
