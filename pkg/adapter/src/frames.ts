/**
 * Frame codec for the executor wire protocol (see ../../PROTOCOL.md).
 *
 * A frame is `MMVX` + u32-LE header length + canonical JSON header +
 * optional raw little-endian f32 payload. Producers emit canonical JSON
 * (sorted keys, compact separators) so golden fixtures stay byte-stable.
 */

export const MAGIC = Buffer.from("MMVX", "ascii");
export const PROTOCOL_VERSION = 1;

export type FrameType = "hello" | "infer" | "result" | "error";

export interface FrameHeader {
  v: number;
  type: FrameType;
  dtype?: string;
  shape?: number[];
  note?: string;
  max_batch?: number;
  in_channels?: number;
  out_channels?: number;
  spatial_rank?: number;
}

export interface Frame {
  header: FrameHeader;
  payload: Float32Array | null;
}

/** JSON.stringify with object keys sorted at every level. */
export function canonicalJson(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .filter(([, v]) => v !== undefined)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
    return "{" + entries.join(",") + "}";
  }
  return JSON.stringify(value);
}

export function product(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

function payloadToBuffer(payload: Float32Array): Buffer {
  // Node runs little-endian on every supported platform, but stay explicit
  // for the cold path so the bytes are right regardless.
  if (require("os").endianness() === "LE") {
    return Buffer.from(payload.buffer, payload.byteOffset, payload.byteLength);
  }
  const buf = Buffer.alloc(payload.length * 4);
  for (let i = 0; i < payload.length; i++) buf.writeFloatLE(payload[i], i * 4);
  return buf;
}

export function encodeFrame(header: FrameHeader, payload?: Float32Array): Buffer {
  const body = Buffer.from(canonicalJson(header), "utf8");
  const prefix = Buffer.alloc(4);
  prefix.writeUInt32LE(body.length, 0);
  const parts: Buffer<ArrayBufferLike>[] = [MAGIC, prefix, body];
  if (payload !== undefined) {
    if (header.shape && product(header.shape) !== payload.length) {
      throw new Error(
        `payload has ${payload.length} elements, shape wants ${product(header.shape)}`
      );
    }
    parts.push(payloadToBuffer(payload));
  }
  return Buffer.concat(parts);
}

export function expectedPayloadBytes(header: FrameHeader): number {
  if (header.type !== "infer" && header.type !== "result") return 0;
  const shape = header.shape;
  if (!Array.isArray(shape) || shape.length === 0 ||
      !shape.every((s) => Number.isInteger(s) && s >= 1)) {
    throw new Error(`${header.type} frame has invalid shape ${JSON.stringify(shape)}`);
  }
  if (header.dtype !== "f32") {
    throw new Error(`unsupported dtype ${header.dtype} (v1 is f32 only)`);
  }
  return 4 * product(shape);
}

/** Incremental parser: feed chunks, collect complete frames. */
export class FrameParser {
  private buf: Buffer<ArrayBufferLike> = Buffer.alloc(0);

  push(chunk: Buffer): Frame[] {
    this.buf = this.buf.length === 0 ? chunk : Buffer.concat([this.buf, chunk]);
    const frames: Frame[] = [];
    for (;;) {
      if (this.buf.length < 8) break;
      if (!this.buf.subarray(0, 4).equals(MAGIC)) {
        throw new Error(`bad frame magic ${this.buf.subarray(0, 4).toString("hex")}`);
      }
      const headerLen = this.buf.readUInt32LE(4);
      if (this.buf.length < 8 + headerLen) break;
      const headerText = this.buf.subarray(8, 8 + headerLen).toString("utf8");
      let header: FrameHeader;
      try {
        header = JSON.parse(headerText);
      } catch (err) {
        throw new Error(`frame header is not valid JSON: ${err}`);
      }
      if (!header || typeof header !== "object" ||
          !["hello", "infer", "result", "error"].includes(header.type)) {
        throw new Error(`unknown frame type in header ${headerText}`);
      }
      const payloadBytes = expectedPayloadBytes(header);
      if (this.buf.length < 8 + headerLen + payloadBytes) break;
      let payload: Float32Array | null = null;
      if (payloadBytes > 0) {
        const raw = this.buf.subarray(8 + headerLen, 8 + headerLen + payloadBytes);
        // copy out so the retained buffer can be released
        const copy = Buffer.from(raw);
        payload = new Float32Array(copy.buffer, copy.byteOffset, payloadBytes / 4);
      }
      frames.push({ header, payload });
      this.buf = this.buf.subarray(8 + headerLen + payloadBytes);
    }
    return frames;
  }

  get pendingBytes(): number {
    return this.buf.length;
  }
}
