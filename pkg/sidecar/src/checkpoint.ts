/** JSON checkpoints: model config, vocabulary, and all weights. */

import { readFileSync, writeFileSync } from "node:fs";

import { MiniTransformer, ModelConfig, ModelParams } from "./model.js";

const FORMAT = "factcheck-sidecar-checkpoint";
const VERSION = 1;

interface CheckpointFile {
  format: string;
  version: number;
  name: string;
  config: ModelConfig;
  params: ModelParams;
}

export function saveCheckpoint(model: MiniTransformer, name: string, path: string): void {
  const payload: CheckpointFile = {
    format: FORMAT,
    version: VERSION,
    name,
    config: model.config,
    params: model.params,
  };
  writeFileSync(path, JSON.stringify(payload));
}

export function loadCheckpoint(path: string): { model: MiniTransformer; name: string } {
  let raw: CheckpointFile;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`${path}: unreadable checkpoint (${(err as Error).message})`);
  }
  if (raw.format !== FORMAT || raw.version !== VERSION) {
    throw new Error(`${path}: not a sidecar checkpoint`);
  }
  return { model: new MiniTransformer(raw.config, raw.params), name: raw.name };
}
