"""TSR1/PPM formats and checkpoint round trips."""

import numpy as np
import pytest

from evtrack.errors import ParseError
from evtrack.storage import (
    load_checkpoint,
    read_ppm,
    read_tsr,
    save_checkpoint,
    write_ppm,
    write_tsr,
)


class TestTsr:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_roundtrip(self, tmp_path, dtype):
        arr = np.random.default_rng(0).standard_normal((3, 4, 5)).astype(dtype)
        p = tmp_path / "a.tsr"
        write_tsr(p, arr)
        back = read_tsr(p)
        assert back.dtype == dtype
        assert np.array_equal(back, arr)

    def test_scalar_roundtrip(self, tmp_path):
        p = tmp_path / "s.tsr"
        write_tsr(p, np.float64(3.5))
        assert read_tsr(p) == 3.5

    def test_header_layout(self, tmp_path):
        p = tmp_path / "h.tsr"
        write_tsr(p, np.zeros((2, 3), dtype=np.float32))
        raw = p.read_bytes()
        assert raw[:4] == b"TSR1"
        assert raw[4] == 0          # dtype code float32
        assert raw[5] == 2          # ndim
        assert raw[6:8] == b"\x00\x00"
        assert raw[8:12] == (2).to_bytes(4, "little")
        assert raw[12:16] == (3).to_bytes(4, "little")
        assert len(raw) == 16 + 6 * 4

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.tsr"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ParseError, match="magic"):
            read_tsr(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "t.tsr"
        write_tsr(p, np.zeros(8, dtype=np.float32))
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(ParseError, match="payload"):
            read_tsr(p)

    def test_unknown_dtype_code(self, tmp_path):
        p = tmp_path / "d.tsr"
        write_tsr(p, np.zeros(2, dtype=np.float32))
        raw = bytearray(p.read_bytes())
        raw[4] = 7
        p.write_bytes(bytes(raw))
        with pytest.raises(ParseError, match="dtype code"):
            read_tsr(p)


class TestPpm:
    def test_roundtrip(self, tmp_path):
        img = np.random.default_rng(1).integers(0, 256, (7, 9, 3), dtype=np.uint8)
        p = tmp_path / "img.ppm"
        write_ppm(p, img)
        assert np.array_equal(read_ppm(p), img)

    def test_header_text(self, tmp_path):
        p = tmp_path / "img.ppm"
        write_ppm(p, np.zeros((230, 346, 3), dtype=np.uint8))
        assert p.read_bytes().startswith(b"P6\n346 230\n255\n")

    def test_rejects_non_p6(self, tmp_path):
        p = tmp_path / "x.ppm"
        p.write_bytes(b"P3\n1 1\n255\n0 0 0")
        with pytest.raises(ParseError, match="P6"):
            read_ppm(p)


class TestCheckpoint:
    def _params(self):
        rng = np.random.default_rng(2)
        return [
            ("pooler.stage1.conv_in.weight", rng.standard_normal((4, 2, 1, 1)).astype(np.float32)),
            ("rgb.embed.proj.bias", rng.standard_normal(8).astype(np.float32)),
        ]

    def test_save_load_save_identical_bytes(self, tmp_path):
        params = self._params()
        d1, d2 = tmp_path / "c1", tmp_path / "c2"
        save_checkpoint(d1, params)
        loaded = load_checkpoint(d1)
        save_checkpoint(d2, list(loaded.items()))
        for f1 in sorted(d1.iterdir()):
            assert (d2 / f1.name).read_bytes() == f1.read_bytes()

    def test_manifest_format(self, tmp_path):
        save_checkpoint(tmp_path / "c", self._params())
        lines = (tmp_path / "c" / "manifest.txt").read_text().splitlines()
        assert lines[0] == "pooler.stage1.conv_in.weight 4,2,1,1 float32"
        assert lines[1] == "rgb.embed.proj.bias 8 float32"

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "nope")

    def test_malformed_manifest_line(self, tmp_path):
        d = tmp_path / "c"
        save_checkpoint(d, self._params())
        (d / "manifest.txt").write_text("just two\n")
        with pytest.raises(ParseError, match="manifest.txt:1"):
            load_checkpoint(d)
