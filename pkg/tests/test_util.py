import numpy as np
import pytest

from gcb.util import (
    THREADS_ENV_VAR,
    fmt_cell,
    parse_size,
    parse_width_list,
    resolve_threads,
    result_checksum,
    write_csv,
)


class TestParseSize:
    def test_plain_integer(self):
        assert parse_size("1024") == 1024

    def test_power_notation(self):
        assert parse_size("2^18") == 262144

    def test_whitespace(self):
        assert parse_size(" 2^4 ") == 16

    def test_exponent_zero_is_one(self):
        assert parse_size("2^0") == 1

    @pytest.mark.parametrize("bad", ["0", "-4", "abc", "2^-1", "2^x"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_size(bad)


class TestParseWidthList:
    def test_comma_list(self):
        assert parse_width_list("64,128,2^8") == [64, 128, 256]

    def test_power_range(self):
        assert parse_width_list("2^8..2^10") == [256, 512, 1024]

    def test_single_value(self):
        assert parse_width_list("2^6") == [64]

    def test_descending_range_rejected(self):
        with pytest.raises(ValueError):
            parse_width_list("2^10..2^8")

    def test_non_power_range_rejected(self):
        with pytest.raises(ValueError):
            parse_width_list("100..200")


class TestResolveThreads:
    def test_cli_value_wins(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "8")
        assert resolve_threads(2) == 2

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "6")
        assert resolve_threads(None) == 6

    def test_default_is_one(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert resolve_threads(None) == 1

    def test_floor_at_one(self):
        assert resolve_threads(0) == 1
        assert resolve_threads(-3) == 1

    def test_bad_env_rejected(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "lots")
        with pytest.raises(ValueError):
            resolve_threads(None)


class TestChecksum:
    def test_stable(self, rng):
        a = rng.random(100)
        assert result_checksum(a) == result_checksum(a.copy())

    def test_sensitive_to_any_bit(self, rng):
        a = rng.random(100)
        b = a.copy()
        b[37] = np.nextafter(b[37], 1.0)
        assert result_checksum(a) != result_checksum(b)

    def test_digest_shape(self, rng):
        digest = result_checksum(rng.random(4))
        assert len(digest) == 16
        int(digest, 16)  # hex


class TestCsv:
    def test_fmt_cell(self):
        assert fmt_cell(None) == ""
        assert fmt_cell(0.123456789) == "0.123457"
        assert fmt_cell(1.0) == "1"
        assert fmt_cell(42) == "42"
        assert fmt_cell("x") == "x"

    def test_six_significant_digits(self):
        assert fmt_cell(1234567.0) == "1.23457e+06"
        assert fmt_cell(0.000123456789) == "0.000123457"

    def test_write_to_file(self, tmp_path):
        out = tmp_path / "t.csv"
        write_csv([{"a": 1, "b": 0.5}, {"a": 2}], ("a", "b"), str(out))
        assert out.read_text() == "a,b\n1,0.5\n2,\n"

    def test_write_to_stdout(self, capsys):
        write_csv([{"a": 1}], ("a",), None)
        assert capsys.readouterr().out == "a\n1\n"

    def test_dash_means_stdout(self, capsys):
        write_csv([{"a": 1}], ("a",), "-")
        assert capsys.readouterr().out == "a\n1\n"
