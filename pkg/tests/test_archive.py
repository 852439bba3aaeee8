"""Weight archive: round trips and every corruption failure mode."""

import json
import zlib

import numpy as np
import pytest

from litedepth.archive import FORMAT_VERSION, MAGIC, load_weights, read_header, save_weights
from litedepth.errors import (
    ArchiveError,
    ChecksumError,
    ExtraTensorError,
    MissingTensorError,
    VariantMismatchError,
)
from litedepth.model import build, preset_config


@pytest.fixture(scope="module")
def xxs():
    return build(preset_config("xxs"), seed=1)


@pytest.fixture()
def archive_path(xxs, tmp_path):
    path = tmp_path / "weights.ldw"
    save_weights(xxs, path)
    return path


class TestRoundTrip:
    def test_weights_identical(self, xxs, archive_path):
        other = build(preset_config("xxs"), seed=9)
        load_weights(other, archive_path)
        assert set(other.weights) == set(xxs.weights)
        for k in xxs.weights:
            assert np.array_equal(other.weights[k], xxs.weights[k]), k

    def test_forward_bit_exact(self, xxs, archive_path):
        other = build(preset_config("xxs"), seed=9)
        load_weights(other, archive_path)
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, (1, 3, 192, 256)).astype(np.float32)
        assert np.array_equal(xxs.forward(x).values, other.forward(x).values)

    def test_header_contents(self, archive_path):
        header = read_header(archive_path)
        assert header["format_version"] == FORMAT_VERSION
        assert header["variant"] == "xxs"
        names = [t["name"] for t in header["tensors"]]
        assert names == sorted(names)
        assert "encoder.stem.weight" in names


def _rewrite(path, header_edit=None, payload_edit=None, magic=None):
    """Surgically rewrite parts of an archive for corruption tests."""
    raw = path.read_bytes()
    nl1 = raw.index(b"\n")
    nl2 = raw.index(b"\n", nl1 + 1)
    header_len = int(raw[nl1 + 1 : nl2])
    header = json.loads(raw[nl2 + 1 : nl2 + 1 + header_len])
    payload = bytearray(raw[nl2 + 1 + header_len :])
    if header_edit:
        header_edit(header)
    if payload_edit:
        payload_edit(payload)
    hdr = json.dumps(header, separators=(",", ":")).encode()
    magic_line = magic if magic is not None else raw[: nl1 + 1]
    path.write_bytes(magic_line + f"{len(hdr)}\n".encode() + hdr + bytes(payload))


class TestFailureModes:
    def test_bad_magic(self, archive_path):
        _rewrite(archive_path, magic=b"SOMETHING-ELSE 1\n")
        model = build(preset_config("xxs"))
        with pytest.raises(ArchiveError):
            load_weights(model, archive_path)

    def test_not_an_archive_at_all(self, tmp_path):
        path = tmp_path / "noise.bin"
        path.write_bytes(b"\x00\x01\x02\x03" * 16)
        with pytest.raises(ArchiveError):
            read_header(path)

    def test_unsupported_version(self, archive_path):
        _rewrite(archive_path, magic=f"{MAGIC} 99\n".encode())
        with pytest.raises(ArchiveError):
            read_header(archive_path)

    def test_variant_mismatch(self, archive_path):
        model = build(preset_config("xs"))
        with pytest.raises(VariantMismatchError):
            load_weights(model, archive_path)

    def test_missing_tensor(self, archive_path):
        _rewrite(archive_path, header_edit=lambda h: h["tensors"].pop(0))
        model = build(preset_config("xxs"))
        with pytest.raises(MissingTensorError):
            load_weights(model, archive_path)

    def test_extra_tensor(self, archive_path):
        def add(h):
            h["tensors"].append({"name": "imposter", "shape": [1], "offset": 0, "crc32": 0})

        _rewrite(archive_path, header_edit=add)
        model = build(preset_config("xxs"))
        with pytest.raises(ExtraTensorError):
            load_weights(model, archive_path)

    def test_payload_corruption_detected(self, archive_path):
        def flip(payload):
            payload[100] ^= 0xFF

        _rewrite(archive_path, payload_edit=flip)
        model = build(preset_config("xxs"))
        with pytest.raises(ChecksumError):
            load_weights(model, archive_path)

    def test_truncated_payload(self, archive_path):
        raw = archive_path.read_bytes()
        archive_path.write_bytes(raw[: len(raw) // 2])
        model = build(preset_config("xxs"))
        with pytest.raises(ArchiveError):
            load_weights(model, archive_path)

    def test_shape_mismatch(self, archive_path):
        def reshape(h):
            h["tensors"][0]["shape"] = [1, 2, 3]

        _rewrite(archive_path, header_edit=reshape)
        model = build(preset_config("xxs"))
        with pytest.raises(ArchiveError):
            load_weights(model, archive_path)

    def test_model_untouched_after_failed_load(self, xxs, archive_path):
        # A checksum failure must not leave the model half-loaded.
        def flip(payload):
            payload[-1] ^= 0xFF

        _rewrite(archive_path, payload_edit=flip)
        model = build(preset_config("xxs"), seed=9)
        before = {k: v.copy() for k, v in model.weights.items()}
        with pytest.raises(ChecksumError):
            load_weights(model, archive_path)
        for k in before:
            assert np.array_equal(model.weights[k], before[k])


class TestChecksumSanity:
    def test_crc_matches_recomputation(self, xxs, archive_path):
        header = read_header(archive_path)
        entry = header["tensors"][0]
        arr = np.ascontiguousarray(xxs.weights[entry["name"]], dtype="<f4")
        assert entry["crc32"] == (zlib.crc32(arr.tobytes()) & 0xFFFFFFFF)
