"""Tests for specvoc.fileio: WAV, MELF, and checkpoint round trips."""

import struct

import numpy as np
import pytest

from specvoc import fileio


class TestWav:
    def test_pcm16_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        x = np.clip(rng.standard_normal(24000) * 0.2, -1, 1)
        path = tmp_path / "a.wav"
        fileio.write_wav(path, fileio.AudioBuffer(x, 24000))
        back = fileio.read_wav(path)
        assert back.sample_rate == 24000
        assert len(back) == 24000
        # 16-bit quantization step is 1/32768.
        assert np.max(np.abs(back.samples - x)) < 1.0 / 32767

    def test_float32_read(self, tmp_path):
        x = np.linspace(-0.9, 0.9, 1000).astype("<f4")
        payload = x.tobytes()
        fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 3, 1, 16000, 64000, 4, 32)
        body = fmt + b"data" + struct.pack("<I", len(payload)) + payload
        raw = b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body
        path = tmp_path / "f.wav"
        path.write_bytes(raw)
        back = fileio.read_wav(path)
        assert back.sample_rate == 16000
        assert back.samples == pytest.approx(x.astype(np.float64), abs=1e-7)

    def test_stereo_rejected_with_offset(self, tmp_path):
        payload = b"\x00\x00" * 10
        fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 1, 2, 8000, 32000, 4, 16)
        body = fmt + b"data" + struct.pack("<I", len(payload)) + payload
        raw = b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body
        path = tmp_path / "s.wav"
        path.write_bytes(raw)
        with pytest.raises(fileio.FormatError, match=r"offset \d+.*channels"):
            fileio.read_wav(path)

    def test_not_riff_rejected(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(b"JUNKJUNKJUNKJUNK")
        with pytest.raises(fileio.FormatError, match="offset 0"):
            fileio.read_wav(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "t.wav"
        path.write_bytes(b"RIFF\x10\x00\x00\x00WA")
        with pytest.raises(fileio.FormatError, match="truncated"):
            fileio.read_wav(path)

    def test_clipping_on_write(self, tmp_path):
        path = tmp_path / "c.wav"
        fileio.write_wav(path, fileio.AudioBuffer(np.array([2.0, -2.0]), 8000))
        back = fileio.read_wav(path)
        assert back.samples == pytest.approx([1.0, -1.0])


class TestAudioBuffer:
    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            fileio.AudioBuffer(np.array([0.0, np.nan]), 24000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError, match="sample_rate"):
            fileio.AudioBuffer(np.zeros(4), 0)

    def test_rejects_stereo(self):
        with pytest.raises(ValueError, match="mono"):
            fileio.AudioBuffer(np.zeros((2, 4)), 24000)


class TestMelf:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        mel = rng.standard_normal((94, 100)).astype(np.float32).astype(np.float64)
        path = tmp_path / "m.melf"
        fileio.write_melf(path, mel)
        assert np.array_equal(fileio.read_melf(path), mel)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "m.melf"
        fileio.write_melf(path, np.zeros((3, 5)))
        raw = path.read_bytes()
        assert raw[:4] == b"MELF"
        assert struct.unpack_from("<III", raw, 4) == (1, 5, 3)
        assert len(raw) == 16 + 4 * 15

    def test_size_mismatch_rejected(self, tmp_path):
        path = tmp_path / "m.melf"
        fileio.write_melf(path, np.zeros((3, 5)))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(fileio.FormatError, match="size mismatch"):
            fileio.read_melf(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "m.melf"
        path.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(fileio.FormatError, match="magic"):
            fileio.read_melf(path)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        tensors = {
            "gen.embed.w": rng.standard_normal((8, 100, 1)).astype(np.float32),
            "gen.embed.b": rng.standard_normal(8).astype(np.float32),
            "opt.step": np.array(17.0, dtype=np.float32),
        }
        path = tmp_path / "c.vcsk"
        fileio.save_checkpoint(path, tensors)
        back = fileio.load_checkpoint(path)
        assert set(back) == set(tensors)
        for name in tensors:
            assert np.array_equal(back[name], tensors[name])
            assert back[name].shape == tensors[name].shape

    def test_save_load_save_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(3)
        tensors = {f"t{i}": rng.standard_normal((i + 1, 3)) for i in range(5)}
        p1, p2 = tmp_path / "a.vcsk", tmp_path / "b.vcsk"
        fileio.save_checkpoint(p1, tensors)
        fileio.save_checkpoint(p2, fileio.load_checkpoint(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_and_count(self, tmp_path):
        path = tmp_path / "c.vcsk"
        fileio.save_checkpoint(path, {"a": np.zeros(2), "b": np.zeros(3)})
        raw = path.read_bytes()
        assert raw[:4] == b"VCSK"
        assert struct.unpack_from("<II", raw, 4) == (1, 2)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "c.vcsk"
        fileio.save_checkpoint(path, {"a": np.zeros(100)})
        path.write_bytes(path.read_bytes()[:-40])
        with pytest.raises(fileio.FormatError, match="truncated"):
            fileio.load_checkpoint(path)
