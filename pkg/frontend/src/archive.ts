/**
 * Weight-archive export in the restoration library's binary format:
 *
 *   bytes 0..7    magic "APNPW1\0\0"
 *   bytes 8..11   little-endian uint32 header length N
 *   bytes 12..    UTF-8 JSON header (layers, tensor table, metadata)
 *   payload       float32 little-endian row-major tensors at declared offsets
 *   final 8 bytes little-endian uint64 CRC-64/ECMA-182 of the payload
 *
 * Tensor layouts follow the engine's convention: convolution weights
 * (out, in, kh, kw) and transposed-convolution weights (in, out, kh, kw),
 * so the framework-native [kh, kw, ...] kernels are transposed on export.
 */

import * as fs from "node:fs";
import { crc64 } from "./crc64.js";
import { Model } from "./model.js";

export const MAGIC = Buffer.from("APNPW1\x00\x00", "latin1");

/** [kh, kw, in, out] -> (out, in, kh, kw), flattened row-major. */
export function convToEngineLayout(vals: Float32Array, kh: number, kw: number, cin: number, cout: number): Float32Array {
  const out = new Float32Array(vals.length);
  for (let a = 0; a < kh; a++) {
    for (let b = 0; b < kw; b++) {
      for (let i = 0; i < cin; i++) {
        for (let o = 0; o < cout; o++) {
          out[((o * cin + i) * kh + a) * kw + b] = vals[((a * kw + b) * cin + i) * cout + o];
        }
      }
    }
  }
  return out;
}

/** [kh, kw, out, in] -> (in, out, kh, kw), flattened row-major. */
export function convTransposeToEngineLayout(vals: Float32Array, kh: number, kw: number, cout: number, cin: number): Float32Array {
  const out = new Float32Array(vals.length);
  for (let a = 0; a < kh; a++) {
    for (let b = 0; b < kw; b++) {
      for (let o = 0; o < cout; o++) {
        for (let i = 0; i < cin; i++) {
          out[((i * cout + o) * kh + a) * kw + b] = vals[((a * kw + b) * cout + o) * cin + i];
        }
      }
    }
  }
  return out;
}

interface TensorDecl {
  name: string;
  shape: number[];
  offset: number;
}

export function exportArchive(model: Model, path: string, noiseUpper: number): void {
  const layers: Record<string, unknown>[] = [];
  const decls: TensorDecl[] = [];
  const chunks: Float32Array[] = [];
  let offset = 0;
  let convIdx = 0;

  const pushTensor = (name: string, shape: number[], vals: Float32Array): void => {
    decls.push({ name, shape, offset });
    chunks.push(vals);
    offset += 4 * vals.length;
  };

  for (const layer of model.layers) {
    if (layer.type === "conv" || layer.type === "conv_transpose") {
      const wName = `w${convIdx}`;
      const bName = `b${convIdx}`;
      convIdx++;
      const raw = layer.w.dataSync() as Float32Array;
      const k = layer.kernel;
      let vals: Float32Array;
      let shape: number[];
      if (layer.type === "conv") {
        vals = convToEngineLayout(raw, k, k, layer.inCh, layer.outCh);
        shape = [layer.outCh, layer.inCh, k, k];
      } else {
        vals = convTransposeToEngineLayout(raw, k, k, layer.outCh, layer.inCh);
        shape = [layer.inCh, layer.outCh, k, k];
      }
      pushTensor(wName, shape, vals);
      pushTensor(bName, [layer.outCh], layer.b.dataSync() as Float32Array);
      const decl: Record<string, unknown> = {
        type: layer.type,
        in: layer.inCh,
        out: layer.outCh,
        kernel: k,
        weight: wName,
        bias: bName,
      };
      if (layer.stride !== 1) {
        decl.stride = layer.stride;
      }
      if (layer.saveAs !== undefined) {
        decl.save_as = layer.saveAs;
      }
      layers.push(decl);
    } else if (layer.type === "relu") {
      const decl: Record<string, unknown> = { type: "relu" };
      if (layer.saveAs !== undefined) {
        decl.save_as = layer.saveAs;
      }
      layers.push(decl);
    } else {
      const decl: Record<string, unknown> = { type: "add", from: layer.from };
      if (layer.saveAs !== undefined) {
        decl.save_as = layer.saveAs;
      }
      layers.push(decl);
    }
  }

  const header = {
    domain: "gradient",
    in_channels: model.inChannels,
    out_channels: model.outChannels,
    predicts: "residual",
    noise_range: [0.0, noiseUpper],
    layers,
    tensors: decls,
  };
  const headerBytes = Buffer.from(JSON.stringify(header), "utf-8");

  const payload = Buffer.alloc(offset);
  let pos = 0;
  for (const chunk of chunks) {
    for (const v of chunk) {
      payload.writeFloatLE(Math.fround(v), pos);
      pos += 4;
    }
  }

  const lenBuf = Buffer.alloc(4);
  lenBuf.writeUInt32LE(headerBytes.length, 0);
  const crcBuf = Buffer.alloc(8);
  crcBuf.writeBigUInt64LE(crc64(payload), 0);
  fs.writeFileSync(path, Buffer.concat([MAGIC, lenBuf, headerBytes, payload, crcBuf]));
}
