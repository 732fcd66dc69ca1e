export { crc64 } from "./crc64.js";
export { Rng } from "./rng.js";
export {
  GrayImage,
  cropPatch,
  gradField,
  loadDataset,
  readPgm,
  synthImage,
  writePgm,
  writeSynthDataset,
} from "./data.js";
export { ArchSpec, Layer, Model, buildModel, forward, trainableVariables } from "./model.js";
export { MAGIC, convToEngineLayout, convTransposeToEngineLayout, exportArchive } from "./archive.js";
export {
  DEFAULT_CONFIG,
  TrainConfig,
  TrainResult,
  evaluatePsnr,
  makeBatch,
  train,
  trainOnImages,
  validateConfig,
} from "./train.js";
export { FIXTURE_MAGIC, FIXTURE_TOLERANCE, exportFixtures, writeFixture } from "./fixtures.js";
