/**
 * Desk-scale training of the gradient-domain denoising prior.
 *
 * Each step samples random patches from the dataset, takes their periodic
 * forward-difference gradient fields, draws a per-sample noise level sigma
 * uniform in (0, upper], adds white gaussian noise, and feeds the noisy
 * field plus a constant sigma channel to the network. The network predicts
 * the noise (residual convention) under an L1 loss, optimized with Adam.
 */

import * as tf from "@tensorflow/tfjs";
import { GrayImage, cropPatch, gradField, loadDataset } from "./data.js";
import { ArchSpec, Model, buildModel, forward, trainableVariables } from "./model.js";
import { Rng } from "./rng.js";

export interface TrainConfig {
  patchSize: number;
  batchSize: number;
  noiseUpper: number; // gradient-domain noise upper bound
  steps: number;
  learningRate: number;
  seed: number;
  arch: ArchSpec;
}

export const DEFAULT_CONFIG: TrainConfig = {
  patchSize: 64,
  batchSize: 32,
  noiseUpper: 71 / 255,
  steps: 2000,
  learningRate: 1e-3,
  seed: 0,
  arch: { width: 32, depth: 8, downUp: true },
};

export function validateConfig(cfg: TrainConfig): void {
  if (!(cfg.noiseUpper > 0)) {
    throw new Error(`noise upper bound must be positive, got ${cfg.noiseUpper}`);
  }
  if (cfg.patchSize < 16 || cfg.patchSize % 2 !== 0) {
    throw new Error(`patch size must be even and >= 16, got ${cfg.patchSize}`);
  }
  if (cfg.batchSize < 1 || cfg.steps < 1) {
    throw new Error("batch size and steps must be positive");
  }
}

export interface Batch {
  /** NHWC input: gradient-h, gradient-v, constant noise map. */
  input: tf.Tensor4D;
  /** NHWC 2-channel noise field (the residual target). */
  noise: tf.Tensor4D;
  /** NHWC 2-channel clean gradient field. */
  clean: tf.Tensor4D;
}

export function makeBatch(
  images: GrayImage[],
  count: number,
  patch: number,
  rng: Rng,
  sigmaOf: (rng: Rng) => number
): Batch {
  const n = patch;
  const input = new Float32Array(count * n * n * 3);
  const noise = new Float32Array(count * n * n * 2);
  const clean = new Float32Array(count * n * n * 2);
  for (let s = 0; s < count; s++) {
    const img = images[rng.int(images.length)];
    const g = gradField(cropPatch(img, n, rng), n);
    const sigma = sigmaOf(rng);
    for (let i = 0; i < n * n; i++) {
      const nh = sigma * rng.normal();
      const nv = sigma * rng.normal();
      const base = (s * n * n + i) * 3;
      input[base] = g[i] + nh;
      input[base + 1] = g[n * n + i] + nv;
      input[base + 2] = sigma;
      const nbase = (s * n * n + i) * 2;
      noise[nbase] = nh;
      noise[nbase + 1] = nv;
      clean[nbase] = g[i];
      clean[nbase + 1] = g[n * n + i];
    }
  }
  return {
    input: tf.tensor4d(input, [count, n, n, 3]),
    noise: tf.tensor4d(noise, [count, n, n, 2]),
    clean: tf.tensor4d(clean, [count, n, n, 2]),
  };
}

export interface TrainResult {
  model: Model;
  losses: number[]; // validation L1 loss at logged steps (step 0 first)
}

export function train(cfg: TrainConfig, datasetDir: string, log?: (msg: string) => void): TrainResult {
  validateConfig(cfg);
  const images = loadDataset(datasetDir);
  return trainOnImages(cfg, images, log);
}

export function trainOnImages(cfg: TrainConfig, images: GrayImage[], log?: (msg: string) => void): TrainResult {
  validateConfig(cfg);
  if (images.length === 0) {
    throw new Error("empty dataset");
  }
  const model = buildModel(cfg.arch, cfg.seed);
  const vars = trainableVariables(model);
  const optimizer = tf.train.adam(cfg.learningRate);
  const rng = new Rng(cfg.seed + 1);

  const valBatch = makeBatch(images, Math.min(8, cfg.batchSize), cfg.patchSize, new Rng(cfg.seed + 999), (r) => r.next() * cfg.noiseUpper);
  const valLoss = (): number =>
    tf.tidy(() => tf.mean(tf.abs(tf.sub(forward(model, valBatch.input), valBatch.noise))).dataSync()[0]);

  const losses: number[] = [valLoss()];
  for (let step = 0; step < cfg.steps; step++) {
    const batch = makeBatch(images, cfg.batchSize, cfg.patchSize, rng, (r) => r.next() * cfg.noiseUpper);
    optimizer.minimize(
      () => tf.mean(tf.abs(tf.sub(forward(model, batch.input), batch.noise))) as tf.Scalar,
      false,
      vars
    );
    batch.input.dispose();
    batch.noise.dispose();
    batch.clean.dispose();
    if ((step + 1) % 100 === 0 || step + 1 === cfg.steps) {
      const l = valLoss();
      losses.push(l);
      if (log) {
        log(`step ${step + 1}/${cfg.steps} val L1 ${l.toFixed(5)}`);
      }
    }
  }
  optimizer.dispose();
  return { model, losses };
}

/**
 * Held-out gradient-denoising PSNR at a fixed sigma: the mean over a batch
 * of 10 log10(1 / MSE) against the clean gradient field, for the noisy
 * input and for the denoised output (input minus predicted residual).
 */
export function evaluatePsnr(
  model: Model,
  images: GrayImage[],
  patch: number,
  sigma: number,
  count: number,
  seed: number
): { noisy: number; denoised: number } {
  const batch = makeBatch(images, count, patch, new Rng(seed), () => sigma);
  const result = tf.tidy(() => {
    const noisyField = tf.slice(batch.input, [0, 0, 0, 0], [-1, -1, -1, 2]);
    const denoisedField = tf.sub(noisyField, forward(model, batch.input));
    const mseNoisy = tf.mean(tf.square(tf.sub(noisyField, batch.clean))).dataSync()[0];
    const mseDen = tf.mean(tf.square(tf.sub(denoisedField, batch.clean))).dataSync()[0];
    return {
      noisy: 10 * Math.log10(1 / mseNoisy),
      denoised: 10 * Math.log10(1 / mseDen),
    };
  });
  batch.input.dispose();
  batch.noise.dispose();
  batch.clean.dispose();
  return result;
}
