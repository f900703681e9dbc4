import numpy as np
import pytest

from mmvpipe.errors import ExternalProtocolError
from mmvpipe.wire import decode_frame, decode_header, encode_frame, tensor_header

# golden frames: the same bytes appear in PROTOCOL.md and must never change
# within protocol v1
GOLDEN_INFER_HEX = (  # infer of a 1x1x2x2 batch holding [0, 1, 2, 3]
    "4d4d5658" + "36000000"
    + "7b226474797065223a22663332222c227368617065223a5b312c312c322c325d2c"
    + "2274797065223a22696e666572222c2276223a317d"
    + "00000000" + "0000803f" + "00000040" + "00004040"
)

GOLDEN_HELLO_HEX = (  # 2D echo executor declaration: 1->1 channels, max batch 8
    "4d4d5658" + "64000000"
    + "7b226474797065223a22663332222c22696e5f6368616e6e656c73223a312c226d61"
    + "785f6261746368223a382c226f75745f6368616e6e656c73223a312c227370617469"
    + "616c5f72616e6b223a322c2274797065223a2268656c6c6f222c2276223a317d"
)


class TestGoldenFrames:
    def test_infer_frame_bytes(self):
        payload = np.array([0.0, 1.0, 2.0, 3.0], dtype=np.float32).reshape(1, 1, 2, 2)
        frame = encode_frame(tensor_header("infer", (1, 1, 2, 2)), payload)
        assert frame.hex() == GOLDEN_INFER_HEX

    def test_hello_frame_bytes(self):
        header = {
            "v": 1,
            "type": "hello",
            "dtype": "f32",
            "max_batch": 8,
            "in_channels": 1,
            "out_channels": 1,
            "spatial_rank": 2,
        }
        assert encode_frame(header).hex() == GOLDEN_HELLO_HEX

    def test_golden_decodes(self):
        header, payload, consumed = decode_frame(bytes.fromhex(GOLDEN_INFER_HEX))
        assert header["type"] == "infer"
        assert header["shape"] == [1, 1, 2, 2]
        np.testing.assert_array_equal(payload.ravel(), [0.0, 1.0, 2.0, 3.0])
        assert consumed == len(bytes.fromhex(GOLDEN_INFER_HEX))


class TestRoundTrip:
    def test_random_payload(self, rng):
        batch = rng.normal(size=(2, 3, 4, 5)).astype(np.float32)
        frame = encode_frame(tensor_header("result", batch.shape), batch)
        header, payload, _ = decode_frame(frame)
        assert header["type"] == "result"
        assert payload.tobytes() == batch.tobytes()

    def test_error_frame_has_no_payload(self):
        frame = encode_frame({"v": 1, "type": "error", "note": "boom"})
        header, payload, consumed = decode_frame(frame)
        assert payload is None
        assert consumed == len(frame)
        assert header["note"] == "boom"


class TestMalformedFrames:
    def test_bad_magic(self):
        with pytest.raises(ExternalProtocolError):
            decode_header(b"NOPE" + b"\x00" * 16)

    def test_truncated_header(self):
        frame = encode_frame(tensor_header("infer", (1, 1, 1, 1)), np.zeros((1, 1, 1, 1), np.float32))
        with pytest.raises(ExternalProtocolError):
            decode_header(frame[:10])

    def test_header_not_json(self):
        buf = b"MMVX" + (5).to_bytes(4, "little") + b"{oops"
        with pytest.raises(ExternalProtocolError):
            decode_header(buf)

    def test_unknown_frame_type(self):
        frame = encode_frame({"v": 1, "type": "surprise"})
        with pytest.raises(ExternalProtocolError):
            decode_header(frame)

    def test_truncated_payload(self):
        batch = np.zeros((1, 1, 2, 2), dtype=np.float32)
        frame = encode_frame(tensor_header("infer", batch.shape), batch)
        with pytest.raises(ExternalProtocolError):
            decode_frame(frame[:-4])

    def test_invalid_shape(self):
        frame = encode_frame({"v": 1, "type": "result", "dtype": "f32", "shape": [0, 1]})
        with pytest.raises(ExternalProtocolError):
            decode_frame(frame)

    def test_wrong_dtype(self):
        frame = encode_frame({"v": 1, "type": "result", "dtype": "f64", "shape": [1, 1]})
        with pytest.raises(ExternalProtocolError):
            decode_frame(frame)
