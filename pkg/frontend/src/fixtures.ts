/**
 * Inference fixtures: seeded (input, expected-output) pairs recorded from
 * the trained network so the restoration library's engine can verify it
 * reproduces the training framework's forward pass.
 *
 * Binary layout mirrors the weight archive: magic "APNPF1\0\0", uint32 LE
 * header length, JSON header, float32 LE payload, uint64 LE CRC-64 of the
 * payload. Tensors are channel-major (C, H, W). The expected tensor is the
 * raw network output (before the residual subtraction the engine's
 * denoiser wrapper applies).
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { crc64 } from "./crc64.js";
import { Model, forward } from "./model.js";
import { Rng } from "./rng.js";

export const FIXTURE_MAGIC = Buffer.from("APNPF1\x00\x00", "latin1");
export const FIXTURE_TOLERANCE = 1e-4;

function chwToNhwc(vals: Float32Array, c: number, h: number, w: number): Float32Array {
  const out = new Float32Array(vals.length);
  for (let ch = 0; ch < c; ch++) {
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        out[(i * w + j) * c + ch] = vals[(ch * h + i) * w + j];
      }
    }
  }
  return out;
}

function nhwcToChw(vals: Float32Array, c: number, h: number, w: number): Float32Array {
  const out = new Float32Array(vals.length);
  for (let ch = 0; ch < c; ch++) {
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        out[(ch * h + i) * w + j] = vals[(i * w + j) * c + ch];
      }
    }
  }
  return out;
}

export function writeFixture(file: string, sigma: number, input: Float32Array, expected: Float32Array, h: number, w: number): void {
  const header = {
    sigma,
    tolerance: FIXTURE_TOLERANCE,
    convention: "network_output",
    input: { shape: [3, h, w], offset: 0 },
    expected: { shape: [2, h, w], offset: 4 * input.length },
  };
  const headerBytes = Buffer.from(JSON.stringify(header), "utf-8");
  const payload = Buffer.alloc(4 * (input.length + expected.length));
  let pos = 0;
  for (const v of input) {
    payload.writeFloatLE(Math.fround(v), pos);
    pos += 4;
  }
  for (const v of expected) {
    payload.writeFloatLE(Math.fround(v), pos);
    pos += 4;
  }
  const lenBuf = Buffer.alloc(4);
  lenBuf.writeUInt32LE(headerBytes.length, 0);
  const crcBuf = Buffer.alloc(8);
  crcBuf.writeBigUInt64LE(crc64(payload), 0);
  fs.writeFileSync(file, Buffer.concat([FIXTURE_MAGIC, lenBuf, headerBytes, payload, crcBuf]));
}

/**
 * Run the network on seeded random gradient-like inputs at the given noise
 * levels (plus one all-zero input) and write one fixture file each.
 */
export function exportFixtures(model: Model, dir: string, count: number, seed: number, size = 16, sigmas: number[] = [0.05, 25 * Math.SQRT2 / 255]): string[] {
  fs.mkdirSync(dir, { recursive: true });
  const rng = new Rng(seed + 4242);
  const files: string[] = [];
  const n = size;

  const record = (name: string, inputChw: Float32Array, sigma: number): void => {
    const x = tf.tensor4d(chwToNhwc(inputChw, 3, n, n), [1, n, n, 3]);
    const y = forward(model, x);
    const outChw = nhwcToChw(y.dataSync() as Float32Array, 2, n, n);
    x.dispose();
    y.dispose();
    const file = path.join(dir, name);
    writeFixture(file, sigma, inputChw, outChw, n, n);
    files.push(file);
  };

  const zero = new Float32Array(3 * n * n);
  record("fixture_zero.bin", zero, 0);

  for (let f = 0; f < count; f++) {
    const sigma = sigmas[f % sigmas.length];
    const input = new Float32Array(3 * n * n);
    for (let i = 0; i < 2 * n * n; i++) {
      input[i] = Math.max(-1, Math.min(1, 0.3 * rng.normal()));
    }
    input.fill(sigma, 2 * n * n);
    record(`fixture_${String(f).padStart(2, "0")}.bin`, input, sigma);
  }
  return files;
}
