/**
 * Request loop: emit one hello, answer each infer frame with a result
 * frame, report violations as error frames and exit nonzero. Exits 0 when
 * the parent closes our stdin.
 */

import { FrameParser, FrameHeader, PROTOCOL_VERSION, encodeFrame, product } from "./frames";
import { Model } from "./models";

export interface ServeOptions {
  /** Override the version declared in hello (fault injection in tests). */
  helloVersion?: number;
  /** Return results with a truncated last spatial axis (fault injection). */
  wrongShape?: boolean;
  /** Exit abruptly before answering this request number, 1-based. */
  dieAfter?: number;
  input?: NodeJS.ReadableStream;
  output?: NodeJS.WritableStream;
  exit?: (code: number) => void;
}

export function helloHeader(model: Model, version: number = PROTOCOL_VERSION): FrameHeader {
  return {
    v: version,
    type: "hello",
    dtype: "f32",
    max_batch: model.decl.maxBatch,
    in_channels: model.decl.inChannels,
    out_channels: model.decl.outChannels,
    spatial_rank: model.decl.spatialRank,
  };
}

export function serve(model: Model, options: ServeOptions = {}): void {
  const input = options.input ?? process.stdin;
  const output = options.output ?? process.stdout;
  const exit = options.exit ?? ((code: number) => process.exit(code));
  const parser = new FrameParser();
  let requests = 0;

  const fail = (note: string): void => {
    output.write(encodeFrame({ v: PROTOCOL_VERSION, type: "error", note }));
    exit(1);
  };

  output.write(encodeFrame(helloHeader(model, options.helloVersion)));

  input.on("data", (chunk: Buffer) => {
    let frames;
    try {
      frames = parser.push(chunk);
    } catch (err) {
      return fail(`malformed frame: ${(err as Error).message}`);
    }
    for (const frame of frames) {
      if (frame.header.type !== "infer") {
        return fail(`expected an infer frame, got ${frame.header.type}`);
      }
      const shape = frame.header.shape!;
      requests += 1;
      if (options.dieAfter && requests >= options.dieAfter) {
        return exit(17); // abrupt: no frame on the wire
      }
      if (shape.length !== model.decl.spatialRank + 2) {
        return fail(`rank ${shape.length} does not fit spatial_rank ${model.decl.spatialRank}`);
      }
      if (shape[1] !== model.decl.inChannels) {
        return fail(`batch has ${shape[1]} channels, model wants ${model.decl.inChannels}`);
      }
      if (shape[0] > model.decl.maxBatch) {
        return fail(`batch ${shape[0]} exceeds declared max ${model.decl.maxBatch}`);
      }
      let result: Float32Array;
      try {
        result = model.apply(frame.payload!, shape);
      } catch (err) {
        return fail(`model failed: ${(err as Error).message}`);
      }
      let outShape = [shape[0], model.decl.outChannels, ...shape.slice(2)];
      if (model.decl.outChannels !== model.decl.inChannels) {
        // replicate/trim channel axis for demo models that change C
        const per = product(shape.slice(2));
        const grown = new Float32Array(product(outShape));
        for (let b = 0; b < shape[0]; b++) {
          for (let c = 0; c < model.decl.outChannels; c++) {
            const src = (b * shape[1] + Math.min(c, shape[1] - 1)) * per;
            grown.set(result.subarray(src, src + per), (b * model.decl.outChannels + c) * per);
          }
        }
        result = grown;
      }
      if (options.wrongShape) {
        outShape = [...outShape];
        outShape[outShape.length - 1] = Math.max(1, outShape[outShape.length - 1] - 1);
        result = result.subarray(0, product(outShape));
      }
      output.write(
        encodeFrame({ v: PROTOCOL_VERSION, type: "result", dtype: "f32", shape: outShape }, result)
      );
    }
  });

  input.on("end", () => exit(0));
}
