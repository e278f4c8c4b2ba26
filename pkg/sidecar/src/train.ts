/** Adam fine-tuning of the encoder on pair-classification data.
 *
 * Stage A (relevance) trains from scratch at lr 3e-5; stage B (alignment)
 * starts from the stage-A weights and fine-tunes further at lr 1e-5.
 */

import { Tensor, MiniTransformer, ModelConfig, ModelParams, cloneParams, tensorsOf, zerosLike } from "./model.js";
import { mulberry32 } from "./math.js";
import { buildVocabulary, encodePair, EncodedInput } from "./tokenizer.js";

export interface PairRecord {
  claim: string;
  explanation: string;
  label: 0 | 1;
}

export interface TrainOptions {
  lr: number;
  epochs: number;
  batchSize: number;
  seed: number;
  valFraction: number;
}

export interface TrainReport {
  stage: "A" | "B";
  nTrain: number;
  nVal: number;
  epochs: number;
  lr: number;
  seed: number;
  finalLoss: number;
  valAccuracy: number | null;
  lossHistory: number[];
}

export const STAGE_A_DEFAULTS: TrainOptions = {
  lr: 3e-5,
  epochs: 3,
  batchSize: 16,
  seed: 0,
  valFraction: 0.2,
};

export const STAGE_B_DEFAULTS: TrainOptions = { ...STAGE_A_DEFAULTS, lr: 1e-5 };

class Adam {
  private readonly m: Tensor[];
  private readonly v: Tensor[];
  private t = 0;

  constructor(
    private readonly params: Tensor[],
    private readonly lr: number,
    private readonly beta1 = 0.9,
    private readonly beta2 = 0.999,
    private readonly eps = 1e-8,
  ) {
    this.m = params.map(zerosLike);
    this.v = params.map(zerosLike);
  }

  step(grads: Tensor[]): void {
    this.t += 1;
    const bc1 = 1 - this.beta1 ** this.t;
    const bc2 = 1 - this.beta2 ** this.t;
    for (let i = 0; i < this.params.length; i++) {
      this.updateTensor(this.params[i], grads[i], this.m[i], this.v[i], bc1, bc2);
    }
  }

  private updateTensor(p: Tensor, g: Tensor, m: Tensor, v: Tensor, bc1: number, bc2: number) {
    if (p.length === 0) return;
    if (typeof p[0] === "number") {
      const pv = p as number[];
      const gv = g as number[];
      const mv = m as number[];
      const vv = v as number[];
      for (let j = 0; j < pv.length; j++) {
        mv[j] = this.beta1 * mv[j] + (1 - this.beta1) * gv[j];
        vv[j] = this.beta2 * vv[j] + (1 - this.beta2) * gv[j] * gv[j];
        pv[j] -= (this.lr * (mv[j] / bc1)) / (Math.sqrt(vv[j] / bc2) + this.eps);
      }
    } else {
      for (let r = 0; r < p.length; r++) {
        this.updateTensor(
          (p as number[][])[r],
          (g as number[][])[r],
          (m as number[][])[r],
          (v as number[][])[r],
          bc1,
          bc2,
        );
      }
    }
  }
}

function shuffled<T>(items: T[], rand: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

function encodeAll(model: MiniTransformer, pairs: PairRecord[]) {
  return pairs.map((p) => ({
    input: encodePair(model.vocab, p.claim, p.explanation, model.config.maxLen),
    label: p.label,
  }));
}

export function evaluateAccuracy(model: MiniTransformer, pairs: PairRecord[]): number {
  if (pairs.length === 0) return 0;
  let correct = 0;
  for (const pair of pairs) {
    const { prob } = model.pairProbability(pair.claim, pair.explanation);
    if ((prob >= 0.5 ? 1 : 0) === pair.label) correct += 1;
  }
  return correct / pairs.length;
}

function splitTrainVal(pairs: PairRecord[], valFraction: number, rand: () => number) {
  const order = shuffled(pairs, rand);
  const nVal = Math.floor(order.length * valFraction);
  return { val: order.slice(0, nVal), train: order.slice(nVal) };
}

export function trainModel(
  model: MiniTransformer,
  pairs: PairRecord[],
  stage: "A" | "B",
  options: TrainOptions,
): TrainReport {
  if (pairs.length === 0) throw new Error("no training pairs");
  const labels = new Set(pairs.map((p) => p.label));
  if (labels.size < 2) throw new Error("training data contains a single class");

  const rand = mulberry32(options.seed);
  const { train, val } = splitTrainVal(pairs, options.valFraction, rand);
  const examples = encodeAll(model, train.length > 0 ? train : pairs);
  const params = tensorsOf(model.params);
  const adam = new Adam(params, options.lr);

  const history: number[] = [];
  for (let epoch = 0; epoch < options.epochs; epoch++) {
    const order = shuffled(examples, rand);
    let epochLoss = 0;
    for (let start = 0; start < order.length; start += options.batchSize) {
      const batch = order.slice(start, start + options.batchSize);
      const { loss, grads } = model.lossAndGrad(batch);
      adam.step(tensorsOf(grads));
      epochLoss += loss * batch.length;
    }
    history.push(epochLoss / order.length);
  }

  return {
    stage,
    nTrain: examples.length,
    nVal: val.length,
    epochs: options.epochs,
    lr: options.lr,
    seed: options.seed,
    finalLoss: history[history.length - 1] ?? NaN,
    valAccuracy: val.length > 0 ? evaluateAccuracy(model, val) : null,
    lossHistory: history,
  };
}

export interface ModelBuildOptions {
  dModel: number;
  ffDim: number;
  layers: number;
  maxLen: number;
  pooling: "mean" | "cls";
  maxWords: number;
  hashBuckets: number;
  seed: number;
}

export const MODEL_DEFAULTS: ModelBuildOptions = {
  dModel: 32,
  ffDim: 64,
  layers: 2,
  maxLen: 64,
  pooling: "mean",
  maxWords: 2000,
  hashBuckets: 256,
  seed: 0,
};

/** Fresh stage-A model whose vocabulary comes from the training texts. */
export function buildModel(pairs: PairRecord[], options: ModelBuildOptions): MiniTransformer {
  const texts = pairs.flatMap((p) => [p.claim, p.explanation]);
  const vocab = buildVocabulary(texts, options.maxWords, options.hashBuckets);
  const config: ModelConfig = {
    dModel: options.dModel,
    ffDim: options.ffDim,
    layers: options.layers,
    maxLen: options.maxLen,
    pooling: options.pooling,
    vocab: vocab.data,
  };
  return MiniTransformer.init(config, options.seed);
}

/** Stage-B model: same architecture and vocabulary, stage-A weights as the start. */
export function initFromCheckpoint(config: ModelConfig, params: ModelParams): MiniTransformer {
  return new MiniTransformer(config, cloneParams(params));
}
