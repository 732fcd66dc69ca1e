/**
 * Small convolutional denoiser operating on gradient fields.
 *
 * The layer chain is restricted to what the restoration library's
 * inference engine supports: zero-padded cross-correlation convolutions
 * (stride-1 convs pad k/2, strided convs pad 0), zero-insertion transposed
 * convolutions, ReLU, and skip additions. Input is 3 channels (2 gradient
 * channels plus a constant noise map); output is the 2-channel predicted
 * noise (residual convention).
 */

import * as tf from "@tensorflow/tfjs";
import { Rng } from "./rng.js";

export interface ArchSpec {
  width: number; // channel width of the hidden layers
  depth: number; // number of 3x3 convolutions (excluding resampling convs)
  downUp: boolean; // include one stride-2 down/up stage with a skip add
}

export type Layer =
  | {
      type: "conv";
      inCh: number;
      outCh: number;
      kernel: number;
      stride: number;
      w: tf.Variable<tf.Rank.R4>; // tfjs layout [kh, kw, in, out]
      b: tf.Variable<tf.Rank.R1>;
      saveAs?: string;
    }
  | {
      type: "conv_transpose";
      inCh: number;
      outCh: number;
      kernel: number;
      stride: number;
      w: tf.Variable<tf.Rank.R4>; // tfjs layout [kh, kw, out, in]
      b: tf.Variable<tf.Rank.R1>;
      saveAs?: string;
    }
  | { type: "relu"; saveAs?: string }
  | { type: "add"; from: string; saveAs?: string };

export interface Model {
  arch: ArchSpec;
  inChannels: number;
  outChannels: number;
  layers: Layer[];
}

function heInit(rng: Rng, shape: number[], fanIn: number): tf.Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  const std = Math.sqrt(2 / fanIn);
  const vals = rng.normals(n);
  for (let i = 0; i < n; i++) {
    vals[i] *= std;
  }
  return tf.tensor(vals, shape);
}

function conv(rng: Rng, inCh: number, outCh: number, kernel: number, stride: number): Layer {
  return {
    type: "conv",
    inCh,
    outCh,
    kernel,
    stride,
    w: tf.variable(heInit(rng, [kernel, kernel, inCh, outCh], inCh * kernel * kernel)) as tf.Variable<tf.Rank.R4>,
    b: tf.variable(tf.zeros([outCh])) as tf.Variable<tf.Rank.R1>,
  };
}

function convTranspose(rng: Rng, inCh: number, outCh: number, kernel: number, stride: number): Layer {
  return {
    type: "conv_transpose",
    inCh,
    outCh,
    kernel,
    stride,
    w: tf.variable(heInit(rng, [kernel, kernel, outCh, inCh], inCh * kernel * kernel)) as tf.Variable<tf.Rank.R4>,
    b: tf.variable(tf.zeros([outCh])) as tf.Variable<tf.Rank.R1>,
  };
}

export function buildModel(arch: ArchSpec, seed: number): Model {
  if (arch.depth < 2) {
    throw new Error("depth must be at least 2 (first and last conv)");
  }
  const rng = new Rng(seed * 7919 + 13);
  const w = arch.width;
  const layers: Layer[] = [];
  const hidden = arch.depth - 2; // 3x3 convs between the first and last
  const preDown = arch.downUp ? Math.ceil(hidden / 2) : hidden;
  const inDown = hidden - preDown;

  layers.push(conv(rng, 3, w, 3, 1));
  layers.push({ type: "relu" });
  for (let i = 0; i < preDown; i++) {
    layers.push(conv(rng, w, w, 3, 1));
    layers.push({ type: "relu" });
  }
  if (arch.downUp) {
    layers[layers.length - 1].saveAs = "skip";
    layers.push(conv(rng, w, w, 2, 2));
    layers.push({ type: "relu" });
    for (let i = 0; i < inDown; i++) {
      layers.push(conv(rng, w, w, 3, 1));
      layers.push({ type: "relu" });
    }
    layers.push(convTranspose(rng, w, w, 2, 2));
    layers.push({ type: "add", from: "skip" });
    layers.push({ type: "relu" });
  }
  layers.push(conv(rng, w, 2, 3, 1));
  return { arch, inChannels: 3, outChannels: 2, layers };
}

/** Forward pass on an NHWC batch. Spatial size must be even when the
 * architecture has a down/up stage. */
export function forward(model: Model, x: tf.Tensor4D): tf.Tensor4D {
  return tf.tidy(() => {
    let h = x;
    const saved: Record<string, tf.Tensor4D> = {};
    for (const layer of model.layers) {
      if (layer.type === "conv") {
        const pad = layer.stride === 1 ? "same" : "valid";
        h = tf.add(
          tf.conv2d(h, layer.w, layer.stride, pad),
          layer.b
        ) as tf.Tensor4D;
      } else if (layer.type === "conv_transpose") {
        const [batch, hh, ww] = [h.shape[0], h.shape[1], h.shape[2]];
        const outH = (hh - 1) * layer.stride + layer.kernel;
        const outW = (ww - 1) * layer.stride + layer.kernel;
        h = tf.add(
          tf.conv2dTranspose(h, layer.w, [batch, outH, outW, layer.outCh], layer.stride, "valid"),
          layer.b
        ) as tf.Tensor4D;
      } else if (layer.type === "relu") {
        h = tf.relu(h);
      } else {
        h = tf.add(h, saved[layer.from]) as tf.Tensor4D;
      }
      if (layer.saveAs !== undefined) {
        saved[layer.saveAs] = h;
      }
    }
    return h;
  });
}

export function trainableVariables(model: Model): tf.Variable[] {
  const vars: tf.Variable[] = [];
  for (const layer of model.layers) {
    if (layer.type === "conv" || layer.type === "conv_transpose") {
      vars.push(layer.w, layer.b);
    }
  }
  return vars;
}
