/**
 * Trainer command line:
 *
 *   node dist/cli.js synth-data --out DIR [--count N] [--size N]
 *   node dist/cli.js train --data DIR --out archive.bin
 *       [--steps N] [--batch N] [--patch N] [--width N] [--depth N]
 *       [--lr F] [--seed N] [--no-down-up] [--fixtures DIR]
 */

import { parseArgs } from "node:util";
import { writeSynthDataset } from "./data.js";
import { exportArchive } from "./archive.js";
import { exportFixtures } from "./fixtures.js";
import { DEFAULT_CONFIG, TrainConfig, evaluatePsnr, train } from "./train.js";
import { loadDataset } from "./data.js";

function num(v: string | undefined, fallback: number): number {
  return v === undefined ? fallback : Number(v);
}

function main(): void {
  const [command, ...rest] = process.argv.slice(2);
  if (command === "synth-data") {
    const { values } = parseArgs({
      args: rest,
      options: {
        out: { type: "string" },
        count: { type: "string" },
        size: { type: "string" },
      },
    });
    if (!values.out) {
      throw new Error("synth-data requires --out DIR");
    }
    writeSynthDataset(values.out, num(values.count, 12), num(values.size, 96));
    console.log(`wrote ${num(values.count, 12)} images to ${values.out}`);
    return;
  }
  if (command === "train") {
    const { values } = parseArgs({
      args: rest,
      options: {
        data: { type: "string" },
        out: { type: "string" },
        steps: { type: "string" },
        batch: { type: "string" },
        patch: { type: "string" },
        width: { type: "string" },
        depth: { type: "string" },
        lr: { type: "string" },
        seed: { type: "string" },
        fixtures: { type: "string" },
        "no-down-up": { type: "boolean" },
      },
    });
    if (!values.data || !values.out) {
      throw new Error("train requires --data DIR and --out FILE");
    }
    const cfg: TrainConfig = {
      ...DEFAULT_CONFIG,
      steps: num(values.steps, DEFAULT_CONFIG.steps),
      batchSize: num(values.batch, DEFAULT_CONFIG.batchSize),
      patchSize: num(values.patch, DEFAULT_CONFIG.patchSize),
      learningRate: num(values.lr, DEFAULT_CONFIG.learningRate),
      seed: num(values.seed, DEFAULT_CONFIG.seed),
      arch: {
        width: num(values.width, DEFAULT_CONFIG.arch.width),
        depth: num(values.depth, DEFAULT_CONFIG.arch.depth),
        downUp: !values["no-down-up"],
      },
    };
    const { model, losses } = train(cfg, values.data, (m) => console.log(m));
    exportArchive(model, values.out, cfg.noiseUpper);
    console.log(`wrote ${values.out} (val L1 ${losses[0].toFixed(5)} -> ${losses[losses.length - 1].toFixed(5)})`);
    const images = loadDataset(values.data);
    const sigma = (25 * Math.SQRT2) / 255;
    const { noisy, denoised } = evaluatePsnr(model, images, cfg.patchSize, sigma, 8, cfg.seed + 31);
    console.log(`held-out gradient PSNR at sigma ${sigma.toFixed(4)}: noisy ${noisy.toFixed(2)} dB, denoised ${denoised.toFixed(2)} dB`);
    if (values.fixtures) {
      const files = exportFixtures(model, values.fixtures, 16, cfg.seed);
      console.log(`wrote ${files.length} fixtures to ${values.fixtures}`);
    }
    return;
  }
  console.error("usage: cli.js <synth-data|train> [options]");
  process.exit(2);
}

main();
