/** Sidecar commands: finetune-a, finetune-b, serve. */

import { writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { loadCheckpoint, saveCheckpoint } from "./checkpoint.js";
import { readPairs } from "./data.js";
import { createServer } from "./server.js";
import {
  MODEL_DEFAULTS,
  STAGE_A_DEFAULTS,
  STAGE_B_DEFAULTS,
  TrainOptions,
  buildModel,
  initFromCheckpoint,
  trainModel,
} from "./train.js";

const USAGE = `usage:
  sidecar finetune-a --pairs <pairs_a.jsonl> --out <model_a.json>
      [--lr 3e-5] [--epochs 3] [--batch 16] [--seed 0] [--val-fraction 0.2]
      [--d-model 32] [--ff-dim 64] [--layers 2] [--max-len 64] [--pooling mean|cls]
  sidecar finetune-b --pairs <pairs_b.jsonl> --init <model_a.json> --out <model_b.json>
      [--lr 1e-5] [--epochs 3] [--batch 16] [--seed 0] [--val-fraction 0.2]
  sidecar serve --encoder <model_a.json> [--classifier <model_b.json>] [--port 8600]

Environment: SIDECAR_PORT overrides the default port.`;

interface Flags {
  [key: string]: { type: "string" };
}

const TRAIN_FLAGS: Flags = {
  pairs: { type: "string" },
  out: { type: "string" },
  init: { type: "string" },
  lr: { type: "string" },
  epochs: { type: "string" },
  batch: { type: "string" },
  seed: { type: "string" },
  "val-fraction": { type: "string" },
  "d-model": { type: "string" },
  "ff-dim": { type: "string" },
  layers: { type: "string" },
  "max-len": { type: "string" },
  pooling: { type: "string" },
};

function num(value: string | undefined, fallback: number): number {
  if (value === undefined) return fallback;
  const parsed = Number(value);
  if (!Number.isFinite(parsed)) throw new Error(`not a number: ${value}`);
  return parsed;
}

function trainOptions(values: Record<string, string | undefined>, defaults: TrainOptions): TrainOptions {
  return {
    lr: num(values.lr, defaults.lr),
    epochs: num(values.epochs, defaults.epochs),
    batchSize: num(values.batch, defaults.batchSize),
    seed: num(values.seed, defaults.seed),
    valFraction: num(values["val-fraction"], defaults.valFraction),
  };
}

function requireFlag(values: Record<string, string | undefined>, name: string): string {
  const value = values[name];
  if (!value) throw new Error(`--${name} is required\n${USAGE}`);
  return value;
}

function writeReport(outPath: string, report: unknown): void {
  const reportPath = outPath.replace(/\.json$/, "") + ".report.json";
  writeFileSync(reportPath, JSON.stringify(report, null, 2) + "\n");
  console.log(`report -> ${reportPath}`);
}

function cmdFinetuneA(argv: string[]): void {
  const { values } = parseArgs({ args: argv, options: TRAIN_FLAGS });
  const pairs = readPairs(requireFlag(values, "pairs"));
  const out = requireFlag(values, "out");
  const options = trainOptions(values, STAGE_A_DEFAULTS);
  const model = buildModel(pairs, {
    ...MODEL_DEFAULTS,
    dModel: num(values["d-model"], MODEL_DEFAULTS.dModel),
    ffDim: num(values["ff-dim"], MODEL_DEFAULTS.ffDim),
    layers: num(values.layers, MODEL_DEFAULTS.layers),
    maxLen: num(values["max-len"], MODEL_DEFAULTS.maxLen),
    pooling: values.pooling === "cls" ? "cls" : "mean",
    seed: options.seed,
  });
  const report = trainModel(model, pairs, "A", options);
  saveCheckpoint(model, `mini-transformer-a:seed${options.seed}`, out);
  console.log(
    `stage A: ${report.nTrain} pairs, final loss ${report.finalLoss.toFixed(4)}, ` +
      `val accuracy ${report.valAccuracy === null ? "n/a" : report.valAccuracy.toFixed(3)}`,
  );
  console.log(`checkpoint -> ${out}`);
  writeReport(out, report);
}

function cmdFinetuneB(argv: string[]): void {
  const { values } = parseArgs({ args: argv, options: TRAIN_FLAGS });
  const pairs = readPairs(requireFlag(values, "pairs"));
  const out = requireFlag(values, "out");
  const initPath = requireFlag(values, "init");
  const { model: stageA } = loadCheckpoint(initPath);
  const model = initFromCheckpoint(stageA.config, stageA.params);
  const options = trainOptions(values, STAGE_B_DEFAULTS);
  const report = trainModel(model, pairs, "B", options);
  saveCheckpoint(model, `mini-transformer-b:seed${options.seed}`, out);
  console.log(
    `stage B: ${report.nTrain} pairs, final loss ${report.finalLoss.toFixed(4)}, ` +
      `val accuracy ${report.valAccuracy === null ? "n/a" : report.valAccuracy.toFixed(3)}`,
  );
  console.log(`checkpoint -> ${out}`);
  writeReport(out, report);
}

function cmdServe(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      encoder: { type: "string" },
      classifier: { type: "string" },
      port: { type: "string" },
    },
  });
  const encoderPath = requireFlag(values, "encoder");
  const encoder = loadCheckpoint(encoderPath);
  const classifier = values.classifier ? loadCheckpoint(values.classifier) : encoder;
  const port = num(values.port ?? process.env.SIDECAR_PORT, 8600);

  const app = createServer({
    encoder: encoder.model,
    classifier: classifier.model,
    modelName: `${encoder.name}+${classifier.name}`,
  });
  const server = app.listen(port, () => {
    console.log(`sidecar listening on :${port}`);
  });
  const stop = () => server.close(() => process.exit(0));
  process.on("SIGINT", stop);
  process.on("SIGTERM", stop);
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "finetune-a") cmdFinetuneA(rest);
    else if (command === "finetune-b") cmdFinetuneB(rest);
    else if (command === "serve") cmdServe(rest);
    else {
      console.error(USAGE);
      return 1;
    }
    return 0;
  } catch (err) {
    console.error(`sidecar ${command}: ${(err as Error).message}`);
    return 2;
  }
}

const code = main(process.argv.slice(2));
if (code !== 0) process.exit(code);
