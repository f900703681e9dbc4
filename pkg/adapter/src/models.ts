/**
 * Demo models mirroring the pipeline's built-in executors, so
 * cross-process equivalence is directly testable: echo, separable
 * gaussian blur, and threshold.
 */

export interface ModelDecl {
  maxBatch: number;
  inChannels: number;
  outChannels: number;
  spatialRank: number;
}

export interface Model {
  name: string;
  decl: ModelDecl;
  /** batch shaped [B, C, ...spatial], row-major; returns the same shape. */
  apply(batch: Float32Array, shape: number[]): Float32Array;
}

export function echoModel(decl: ModelDecl): Model {
  return { name: "echo", decl, apply: (batch) => batch };
}

export function thresholdModel(t: number, decl: ModelDecl): Model {
  return {
    name: "threshold",
    decl,
    apply(batch) {
      const out = new Float32Array(batch.length);
      for (let i = 0; i < batch.length; i++) out[i] = batch[i] >= t ? 1.0 : 0.0;
      return out;
    },
  };
}

/** Sampled gaussian taps: radius floor(4*sigma + 0.5), normalized to sum 1. */
export function gaussianKernel(sigma: number): Float64Array {
  if (!(sigma > 0)) throw new Error(`sigma must be positive, got ${sigma}`);
  const radius = Math.floor(4.0 * sigma + 0.5);
  const taps = new Float64Array(2 * radius + 1);
  let sum = 0;
  for (let i = -radius; i <= radius; i++) {
    const v = Math.exp(-(i * i) / (2 * sigma * sigma));
    taps[i + radius] = v;
    sum += v;
  }
  for (let i = 0; i < taps.length; i++) taps[i] /= sum;
  return taps;
}

/** Edge-repeating reflection: a b c d -> ... b a | a b c d | d c ... */
function reflectIndex(p: number, n: number): number {
  const period = 2 * n;
  let q = p % period;
  if (q < 0) q += period;
  return q < n ? q : period - 1 - q;
}

function convolveAxis(
  data: Float32Array,
  shape: number[],
  axis: number,
  kernel: Float64Array
): Float32Array {
  const n = shape[axis];
  const radius = (kernel.length - 1) / 2;
  let after = 1;
  for (let a = axis + 1; a < shape.length; a++) after *= shape[a];
  let before = 1;
  for (let a = 0; a < axis; a++) before *= shape[a];
  const out = new Float32Array(data.length);
  for (let b = 0; b < before; b++) {
    const blockBase = b * n * after;
    for (let c = 0; c < after; c++) {
      const lineBase = blockBase + c;
      for (let i = 0; i < n; i++) {
        let acc = 0;
        for (let k = -radius; k <= radius; k++) {
          acc += kernel[k + radius] * data[lineBase + reflectIndex(i + k, n) * after];
        }
        out[lineBase + i * after] = acc;
      }
    }
  }
  return out;
}

export function blurModel(sigma: number[], decl: ModelDecl): Model {
  if (sigma.length !== decl.spatialRank) {
    throw new Error(`blur needs ${decl.spatialRank} sigma values, got ${sigma.length}`);
  }
  const kernels = sigma.map(gaussianKernel);
  return {
    name: "blur",
    decl,
    apply(batch, shape) {
      let data = batch;
      for (let s = 0; s < kernels.length; s++) {
        data = convolveAxis(data, shape, 2 + s, kernels[s]); // axes: [B, C, ...spatial]
      }
      return data;
    },
  };
}
