"""Minimal external-executor child used by the test suite.

Speaks the stdin/stdout frame protocol: emits one hello, then answers each
infer frame. Fault-injection flags let tests provoke every declared error:

    --hello-version N   declare protocol version N in the hello
    --wrong-shape       return results with a truncated spatial axis
    --die-after N       exit abruptly before answering request N (1-based)
    --error-after N     answer request N with an error frame and exit 1
    --transform T       echo (default) | plus-one
"""

import argparse
import json
import struct
import sys


def write_frame(stream, header, payload=b""):
    body = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    stream.write(b"MMVX" + struct.pack("<I", len(body)) + body + payload)
    stream.flush()


def read_exact(stream, n):
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def read_frame(stream):
    prefix = read_exact(stream, 8)
    if prefix is None:
        return None, None
    assert prefix[:4] == b"MMVX", prefix
    (hlen,) = struct.unpack("<I", prefix[4:8])
    header = json.loads(read_exact(stream, hlen))
    payload = b""
    if header["type"] in ("infer", "result"):
        count = 1
        for s in header["shape"]:
            count *= s
        payload = read_exact(stream, 4 * count)
    return header, payload


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--hello-version", type=int, default=1)
    parser.add_argument("--in-channels", type=int, default=1)
    parser.add_argument("--out-channels", type=int, default=1)
    parser.add_argument("--spatial-rank", type=int, default=2)
    parser.add_argument("--max-batch", type=int, default=8)
    parser.add_argument("--wrong-shape", action="store_true")
    parser.add_argument("--die-after", type=int, default=0)
    parser.add_argument("--error-after", type=int, default=0)
    parser.add_argument("--transform", default="echo", choices=["echo", "plus-one"])
    args = parser.parse_args()

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    write_frame(
        stdout,
        {
            "v": args.hello_version,
            "type": "hello",
            "dtype": "f32",
            "max_batch": args.max_batch,
            "in_channels": args.in_channels,
            "out_channels": args.out_channels,
            "spatial_rank": args.spatial_rank,
        },
    )

    request = 0
    while True:
        header, payload = read_frame(stdin)
        if header is None:
            return 0
        request += 1
        if args.die_after and request >= args.die_after:
            return 17  # abrupt exit, no frame
        if args.error_after and request >= args.error_after:
            write_frame(stdout, {"v": 1, "type": "error", "note": f"injected at {request}"})
            return 1
        shape = list(header["shape"])
        shape[1] = args.out_channels
        if args.wrong_shape:
            shape[-1] = max(1, shape[-1] - 1)
            count = 1
            for s in shape:
                count *= s
            payload = payload[: 4 * count]
        elif args.transform == "plus-one":
            import array

            values = array.array("f")
            values.frombytes(payload)
            payload = array.array("f", [v + 1.0 for v in values]).tobytes()
        if args.out_channels != args.in_channels:
            payload = payload * args.out_channels  # replicate channel 0
        write_frame(stdout, {"v": 1, "type": "result", "dtype": "f32", "shape": shape}, payload)


if __name__ == "__main__":
    sys.exit(main())
