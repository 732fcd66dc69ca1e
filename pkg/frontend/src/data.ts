/**
 * Dataset handling: binary PGM (P5) image I/O, synthetic grayscale image
 * generation for desk-scale runs, patch sampling, and the periodic
 * forward-difference gradient the prior is trained on.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { Rng } from "./rng.js";

export interface GrayImage {
  data: Float32Array; // row-major, values in [0, 1]
  height: number;
  width: number;
}

export function readPgm(file: string): GrayImage {
  const buf = fs.readFileSync(file);
  // header: "P5" <width> <height> <maxval> separated by whitespace/comments
  let pos = 0;
  const tokens: string[] = [];
  while (tokens.length < 4) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) {
      pos++;
    }
    if (buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) {
        pos++;
      }
      continue;
    }
    let start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) {
      pos++;
    }
    tokens.push(buf.subarray(start, pos).toString("ascii"));
  }
  pos++; // single whitespace after maxval
  const [magic, w, h, maxval] = tokens;
  if (magic !== "P5") {
    throw new Error(`${file}: not a binary PGM (magic ${magic})`);
  }
  if (Number(maxval) !== 255) {
    throw new Error(`${file}: only 8-bit PGM supported (maxval ${maxval})`);
  }
  const width = Number(w);
  const height = Number(h);
  const data = new Float32Array(width * height);
  for (let i = 0; i < width * height; i++) {
    data[i] = buf[pos + i] / 255;
  }
  return { data, height, width };
}

export function writePgm(file: string, img: GrayImage): void {
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, "ascii");
  const body = Buffer.alloc(img.width * img.height);
  for (let i = 0; i < body.length; i++) {
    const v = Math.floor(img.data[i] * 255 + 0.5);
    body[i] = Math.max(0, Math.min(255, v));
  }
  fs.writeFileSync(file, Buffer.concat([header, body]));
}

export function loadDataset(dir: string): GrayImage[] {
  const files = fs
    .readdirSync(dir)
    .filter((f) => f.toLowerCase().endsWith(".pgm"))
    .sort();
  if (files.length === 0) {
    throw new Error(`no PGM images in ${dir}`);
  }
  return files.map((f) => readPgm(path.join(dir, f)));
}

/**
 * Synthetic grayscale image: smooth sinusoidal background plus random
 * rectangles and soft blobs. Piecewise-smooth content gives the gradient
 * field the sparse structure the prior is meant to learn.
 */
export function synthImage(n: number, seed: number): GrayImage {
  const rng = new Rng(seed * 2654435761 + 97);
  const data = new Float32Array(n * n);
  const fx = 1 + rng.int(3);
  const fy = 1 + rng.int(3);
  const phase = rng.next() * 2 * Math.PI;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      data[i * n + j] =
        0.4 +
        0.25 * Math.sin((2 * Math.PI * fx * j) / n + phase) *
          Math.cos((2 * Math.PI * fy * i) / n);
    }
  }
  const nRect = 3 + rng.int(4);
  for (let r = 0; r < nRect; r++) {
    const top = rng.int(n);
    const left = rng.int(n);
    const rh = 4 + rng.int(n / 2);
    const rw = 4 + rng.int(n / 2);
    const delta = (rng.next() - 0.5) * 0.7;
    for (let i = top; i < Math.min(n, top + rh); i++) {
      for (let j = left; j < Math.min(n, left + rw); j++) {
        data[i * n + j] += delta;
      }
    }
  }
  const nBlob = 2 + rng.int(3);
  for (let b = 0; b < nBlob; b++) {
    const ci = rng.int(n);
    const cj = rng.int(n);
    const rad = 3 + rng.next() * (n / 6);
    const amp = (rng.next() - 0.5) * 0.5;
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < n; j++) {
        const d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
        data[i * n + j] += amp * Math.exp(-d2 / (2 * rad * rad));
      }
    }
  }
  for (let i = 0; i < data.length; i++) {
    data[i] = Math.max(0, Math.min(1, data[i]));
  }
  return { data, height: n, width: n };
}

export function writeSynthDataset(dir: string, count: number, size: number): void {
  fs.mkdirSync(dir, { recursive: true });
  for (let i = 0; i < count; i++) {
    writePgm(path.join(dir, `synth_${String(i).padStart(3, "0")}.pgm`), synthImage(size, i));
  }
}

/** Random patch crop (uniform top-left corner). */
export function cropPatch(img: GrayImage, size: number, rng: Rng): Float32Array {
  const top = rng.int(img.height - size + 1);
  const left = rng.int(img.width - size + 1);
  const out = new Float32Array(size * size);
  for (let i = 0; i < size; i++) {
    for (let j = 0; j < size; j++) {
      out[i * size + j] = img.data[(top + i) * img.width + (left + j)];
    }
  }
  return out;
}

/**
 * Periodic forward differences of a square patch: channel 0 is the
 * horizontal difference x[i, j+1 mod n] - x[i, j], channel 1 the vertical.
 * Returned planar (2 * n * n), channel-major.
 */
export function gradField(patch: Float32Array, n: number): Float32Array {
  const out = new Float32Array(2 * n * n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const idx = i * n + j;
      out[idx] = patch[i * n + ((j + 1) % n)] - patch[idx];
      out[n * n + idx] = patch[((i + 1) % n) * n + j] - patch[idx];
    }
  }
  return out;
}
