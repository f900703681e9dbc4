import { describe, expect, it } from "vitest";

import { blurModel, echoModel, gaussianKernel, thresholdModel } from "../src/models";

const DECL = { maxBatch: 8, inChannels: 1, outChannels: 1, spatialRank: 2 };

describe("gaussianKernel", () => {
  it("is normalized, symmetric, and sized floor(4*sigma + 0.5)", () => {
    for (const sigma of [0.5, 1.0, 2.5]) {
      const k = gaussianKernel(sigma);
      expect(k.length).toBe(2 * Math.floor(4 * sigma + 0.5) + 1);
      const sum = Array.from(k).reduce((a, b) => a + b, 0);
      expect(Math.abs(sum - 1)).toBeLessThan(1e-12);
      for (let i = 0; i < k.length; i++) {
        expect(k[i]).toBeCloseTo(k[k.length - 1 - i], 12);
      }
    }
  });

  it("matches the direct formula", () => {
    const sigma = 1.0;
    const k = gaussianKernel(sigma);
    const radius = (k.length - 1) / 2;
    let sum = 0;
    for (let i = -radius; i <= radius; i++) sum += Math.exp(-(i * i) / (2 * sigma * sigma));
    for (let i = -radius; i <= radius; i++) {
      expect(k[i + radius]).toBeCloseTo(Math.exp(-(i * i) / (2 * sigma * sigma)) / sum, 12);
    }
  });
});

describe("echo", () => {
  it("returns its input unchanged", () => {
    const batch = new Float32Array([1, 2, 3, 4]);
    expect(echoModel(DECL).apply(batch, [1, 1, 2, 2])).toBe(batch);
  });
});

describe("threshold", () => {
  it("is exactly binary around t", () => {
    const model = thresholdModel(0.5, DECL);
    const out = model.apply(new Float32Array([0.4, 0.6, 0.5, 0.0]), [1, 1, 2, 2]);
    expect(Array.from(out)).toEqual([0, 1, 1, 0]);
  });
});

describe("blur", () => {
  it("impulse response equals the separable kernel product", () => {
    const sigma = 1.0;
    const model = blurModel([sigma, sigma], DECL);
    const n = 11;
    const batch = new Float32Array(n * n);
    batch[5 * n + 5] = 1.0;
    const out = model.apply(batch, [1, 1, n, n]);
    const k = gaussianKernel(sigma);
    const radius = (k.length - 1) / 2;
    for (let dy = -radius; dy <= radius; dy++) {
      for (let dx = -radius; dx <= radius; dx++) {
        const expected = k[dy + radius] * k[dx + radius];
        expect(out[(5 + dy) * n + 5 + dx]).toBeCloseTo(expected, 6);
      }
    }
  });

  it("preserves the total mass under the reflect boundary", () => {
    const model = blurModel([1.5, 1.5], DECL);
    const n = 16;
    const batch = new Float32Array(n * n);
    for (let i = 0; i < batch.length; i++) batch[i] = Math.sin(i * 0.37) + 1.2;
    const out = model.apply(batch, [1, 1, n, n]);
    const sum = (a: Float32Array) => Array.from(a).reduce((x, y) => x + y, 0);
    expect(Math.abs(sum(out) - sum(batch))).toBeLessThan(1e-3);
  });

  it("blurs each channel and batch entry independently", () => {
    const decl = { ...DECL, inChannels: 2, outChannels: 2 };
    const model = blurModel([0.8, 0.8], decl);
    const n = 8;
    const one = new Float32Array(n * n).map(() => Math.random());
    const two = new Float32Array(n * n).map(() => Math.random());
    const batch = new Float32Array(2 * n * n);
    batch.set(one, 0);
    batch.set(two, n * n);
    const joint = model.apply(batch, [1, 2, n, n]);
    const singleDecl = { ...DECL };
    const single = blurModel([0.8, 0.8], singleDecl);
    const aloneOne = single.apply(one, [1, 1, n, n]);
    const aloneTwo = single.apply(two, [1, 1, n, n]);
    for (let i = 0; i < n * n; i++) {
      expect(joint[i]).toBeCloseTo(aloneOne[i], 6);
      expect(joint[n * n + i]).toBeCloseTo(aloneTwo[i], 6);
    }
  });

  it("3D blur runs over the three trailing axes", () => {
    const decl = { ...DECL, spatialRank: 3 };
    const model = blurModel([0.6, 0.6, 0.6], decl);
    const out = model.apply(new Float32Array(4 * 4 * 4).fill(2.5), [1, 1, 4, 4, 4]);
    for (const v of out) expect(v).toBeCloseTo(2.5, 5); // constant is a fixed point
  });
});
