/** Miniature transformer encoder with a 2-class head, trained by hand-rolled backprop.
 *
 * Single-head attention, relu feed-forward, post-block layer norms, learned
 * token/position/segment embeddings. Sentence vectors pool the final token
 * states (mean by default, [CLS] optionally). Small by design: the service
 * contract is the wire protocol, not a particular parameter count.
 */

import {
  Mat,
  Vec,
  cloneMat,
  glorot,
  matmul,
  meanRows,
  mulberry32,
  softmaxRow,
  softmaxRowBackward,
  transpose,
  zeros,
  zerosMat,
} from "./math.js";
import { EncodedInput, VocabData, Vocabulary, encodePair, encodeText } from "./tokenizer.js";

const LN_EPS = 1e-5;

export type Pooling = "mean" | "cls";

export interface ModelConfig {
  dModel: number;
  ffDim: number;
  layers: number;
  maxLen: number;
  pooling: Pooling;
  vocab: VocabData;
}

export interface BlockParams {
  wq: Mat;
  wk: Mat;
  wv: Mat;
  wo: Mat;
  g1: Vec;
  b1: Vec;
  wf1: Mat;
  bf1: Vec;
  wf2: Mat;
  bf2: Vec;
  g2: Vec;
  b2: Vec;
}

export interface ModelParams {
  embTok: Mat;
  embPos: Mat;
  embSeg: Mat;
  blocks: BlockParams[];
  headW: Mat; // dModel x 2
  headB: Vec;
}

export type Tensor = Mat | Vec;

function isVec(t: Tensor): t is Vec {
  return typeof t[0] === "number" || t.length === 0;
}

/** Stable flat ordering of every trainable tensor. */
export function tensorsOf(p: ModelParams): Tensor[] {
  const out: Tensor[] = [p.embTok, p.embPos, p.embSeg];
  for (const b of p.blocks) {
    out.push(b.wq, b.wk, b.wv, b.wo, b.g1, b.b1, b.wf1, b.bf1, b.wf2, b.bf2, b.g2, b.b2);
  }
  out.push(p.headW, p.headB);
  return out;
}

export function zerosLike(t: Tensor): Tensor {
  return isVec(t) ? zeros(t.length) : zerosMat(t.length, t[0].length);
}

function zeroBlockGrads(p: ModelParams): ModelParams {
  return {
    embTok: zerosMat(p.embTok.length, p.embTok[0].length),
    embPos: zerosMat(p.embPos.length, p.embPos[0].length),
    embSeg: zerosMat(p.embSeg.length, p.embSeg[0].length),
    blocks: p.blocks.map((b) => ({
      wq: zerosMat(b.wq.length, b.wq[0].length),
      wk: zerosMat(b.wk.length, b.wk[0].length),
      wv: zerosMat(b.wv.length, b.wv[0].length),
      wo: zerosMat(b.wo.length, b.wo[0].length),
      g1: zeros(b.g1.length),
      b1: zeros(b.b1.length),
      wf1: zerosMat(b.wf1.length, b.wf1[0].length),
      bf1: zeros(b.bf1.length),
      wf2: zerosMat(b.wf2.length, b.wf2[0].length),
      bf2: zeros(b.bf2.length),
      g2: zeros(b.g2.length),
      b2: zeros(b.b2.length),
    })),
    headW: zerosMat(p.headW.length, p.headW[0].length),
    headB: zeros(p.headB.length),
  };
}

interface LayerNormCache {
  xhat: Mat;
  sigma: Vec; // per row
}

function layerNorm(x: Mat, g: Vec, b: Vec): { y: Mat; cache: LayerNormCache } {
  const rows = x.length;
  const d = g.length;
  const y = zerosMat(rows, d);
  const xhat = zerosMat(rows, d);
  const sigma = zeros(rows);
  for (let i = 0; i < rows; i++) {
    let mean = 0;
    for (let j = 0; j < d; j++) mean += x[i][j];
    mean /= d;
    let variance = 0;
    for (let j = 0; j < d; j++) {
      const c = x[i][j] - mean;
      variance += c * c;
    }
    variance /= d;
    const s = Math.sqrt(variance + LN_EPS);
    sigma[i] = s;
    for (let j = 0; j < d; j++) {
      xhat[i][j] = (x[i][j] - mean) / s;
      y[i][j] = g[j] * xhat[i][j] + b[j];
    }
  }
  return { y, cache: { xhat, sigma } };
}

function layerNormBackward(
  dy: Mat,
  g: Vec,
  cache: LayerNormCache,
  dg: Vec,
  db: Vec,
): Mat {
  const rows = dy.length;
  const d = g.length;
  const dx = zerosMat(rows, d);
  for (let i = 0; i < rows; i++) {
    let meanDxhat = 0;
    let meanDxhatXhat = 0;
    for (let j = 0; j < d; j++) {
      dg[j] += dy[i][j] * cache.xhat[i][j];
      db[j] += dy[i][j];
      const dxhat = dy[i][j] * g[j];
      meanDxhat += dxhat;
      meanDxhatXhat += dxhat * cache.xhat[i][j];
    }
    meanDxhat /= d;
    meanDxhatXhat /= d;
    for (let j = 0; j < d; j++) {
      const dxhat = dy[i][j] * g[j];
      dx[i][j] = (dxhat - meanDxhat - cache.xhat[i][j] * meanDxhatXhat) / cache.sigma[i];
    }
  }
  return dx;
}

interface BlockCache {
  x: Mat;
  q: Mat;
  k: Mat;
  v: Mat;
  attn: Mat; // softmax rows
  h: Mat; // attn @ v
  n1: Mat;
  ln1: LayerNormCache;
  fPre: Mat;
  f: Mat;
  ln2: LayerNormCache;
}

interface ForwardCache {
  input: EncodedInput;
  blocks: BlockCache[];
  finalX: Mat;
  pooled: Vec;
}

export class MiniTransformer {
  readonly vocab: Vocabulary;

  constructor(readonly config: ModelConfig, readonly params: ModelParams) {
    this.vocab = new Vocabulary(config.vocab);
  }

  static init(config: ModelConfig, seed = 0): MiniTransformer {
    const rand = mulberry32(seed);
    const d = config.dModel;
    const vocabSize = new Vocabulary(config.vocab).size;
    const block = (): BlockParams => ({
      wq: glorot(d, d, rand),
      wk: glorot(d, d, rand),
      wv: glorot(d, d, rand),
      wo: glorot(d, d, rand),
      g1: new Array(d).fill(1),
      b1: zeros(d),
      wf1: glorot(d, config.ffDim, rand),
      bf1: zeros(config.ffDim),
      wf2: glorot(config.ffDim, d, rand),
      bf2: zeros(d),
      g2: new Array(d).fill(1),
      b2: zeros(d),
    });
    const params: ModelParams = {
      embTok: glorot(vocabSize, d, rand),
      embPos: glorot(config.maxLen, d, rand),
      embSeg: glorot(2, d, rand),
      blocks: Array.from({ length: config.layers }, block),
      headW: glorot(d, 2, rand),
      headB: zeros(2),
    };
    return new MiniTransformer(config, params);
  }

  get dimension(): number {
    return this.config.dModel;
  }

  private forwardSequence(input: EncodedInput): ForwardCache {
    const { dModel: d } = this.config;
    const t = input.ids.length;
    const invSqrtD = 1 / Math.sqrt(d);
    let x = zerosMat(t, d);
    for (let i = 0; i < t; i++) {
      const tok = this.params.embTok[input.ids[i]];
      const pos = this.params.embPos[i];
      const seg = this.params.embSeg[input.segments[i]];
      for (let j = 0; j < d; j++) x[i][j] = tok[j] + pos[j] + seg[j];
    }

    const blocks: BlockCache[] = [];
    for (const b of this.params.blocks) {
      const q = matmul(x, b.wq);
      const k = matmul(x, b.wk);
      const v = matmul(x, b.wv);
      const kT = transpose(k);
      const scores = matmul(q, kT);
      const attn = scores.map((row) => softmaxRow(row.map((s) => s * invSqrtD)));
      const h = matmul(attn, v);
      const o = matmul(h, b.wo);
      const r1 = x.map((row, i) => row.map((val, j) => val + o[i][j]));
      const { y: n1, cache: ln1 } = layerNorm(r1, b.g1, b.b1);
      const fPre = matmul(n1, b.wf1).map((row, i) => row.map((val, j) => val + b.bf1[j]));
      const f = fPre.map((row) => row.map((val) => (val > 0 ? val : 0)));
      const g = matmul(f, b.wf2).map((row, i) => row.map((val, j) => val + b.bf2[j]));
      const r2 = n1.map((row, i) => row.map((val, j) => val + g[i][j]));
      const { y: n2, cache: ln2 } = layerNorm(r2, b.g2, b.b2);
      blocks.push({ x, q, k, v, attn, h, n1, ln1, fPre, f, ln2 });
      x = n2;
    }

    const pooled = this.config.pooling === "cls" ? x[0].slice() : meanRows(x);
    return { input, blocks, finalX: x, pooled };
  }

  embed(text: string): { vector: Vec; truncated: boolean } {
    const input = encodeText(this.vocab, text, this.config.maxLen);
    return { vector: this.forwardSequence(input).pooled, truncated: input.truncated };
  }

  pairProbability(claim: string, explanation: string): { prob: number; truncated: boolean } {
    const input = encodePair(this.vocab, claim, explanation, this.config.maxLen);
    const probs = this.headProbs(this.forwardSequence(input).pooled);
    return { prob: probs[1], truncated: input.truncated };
  }

  private headProbs(pooled: Vec): Vec {
    const logits = this.params.headB.slice();
    for (let j = 0; j < 2; j++) {
      for (let i = 0; i < pooled.length; i++) logits[j] += pooled[i] * this.params.headW[i][j];
    }
    return softmaxRow(logits);
  }

  /** Mean cross-entropy over encoded pairs plus gradients for every tensor. */
  lossAndGrad(batch: { input: EncodedInput; label: 0 | 1 }[]): {
    loss: number;
    grads: ModelParams;
  } {
    if (batch.length === 0) throw new Error("empty batch");
    const grads = zeroBlockGrads(this.params);
    let loss = 0;
    const scale = 1 / batch.length;
    for (const example of batch) {
      const cache = this.forwardSequence(example.input);
      const probs = this.headProbs(cache.pooled);
      loss += -Math.log(Math.max(probs[example.label], 1e-300)) * scale;

      const dLogits = probs.slice();
      dLogits[example.label] -= 1;
      for (let j = 0; j < 2; j++) dLogits[j] *= scale;

      const d = this.config.dModel;
      const dPooled = zeros(d);
      for (let i = 0; i < d; i++) {
        grads.headW[i][0] += cache.pooled[i] * dLogits[0];
        grads.headW[i][1] += cache.pooled[i] * dLogits[1];
        dPooled[i] = this.params.headW[i][0] * dLogits[0] + this.params.headW[i][1] * dLogits[1];
      }
      grads.headB[0] += dLogits[0];
      grads.headB[1] += dLogits[1];

      this.backwardSequence(cache, dPooled, grads);
    }
    return { loss, grads };
  }

  /** Backprop from a pooled-vector gradient down to the embeddings. */
  private backwardSequence(cache: ForwardCache, dPooled: Vec, grads: ModelParams): void {
    const { dModel: d } = this.config;
    const t = cache.input.ids.length;
    const invSqrtD = 1 / Math.sqrt(d);

    let dx: Mat;
    if (this.config.pooling === "cls") {
      dx = zerosMat(t, d);
      dx[0] = dPooled.slice();
    } else {
      dx = Array.from({ length: t }, () => dPooled.map((v) => v / t));
    }

    for (let layer = this.params.blocks.length - 1; layer >= 0; layer--) {
      const b = this.params.blocks[layer];
      const g = grads.blocks[layer];
      const c = cache.blocks[layer];

      // layer norm 2 over r2 = n1 + ffn(n1)
      const dR2 = layerNormBackward(dx, b.g2, c.ln2, g.g2, g.b2);

      // feed-forward: fPre = n1 wf1 + bf1; f = relu; out = f wf2 + bf2
      const dG = dR2;
      for (let i = 0; i < t; i++) {
        for (let j = 0; j < d; j++) g.bf2[j] += dG[i][j];
      }
      const fT = transpose(c.f);
      addMat(g.wf2, matmul(fT, dG));
      const dF = matmul(dG, transpose(b.wf2));
      const dFPre = dF.map((row, i) => row.map((val, j) => (c.fPre[i][j] > 0 ? val : 0)));
      for (let i = 0; i < t; i++) {
        for (let j = 0; j < dFPre[i].length; j++) g.bf1[j] += dFPre[i][j];
      }
      addMat(g.wf1, matmul(transpose(c.n1), dFPre));
      const dN1 = matmul(dFPre, transpose(b.wf1));
      addMat(dN1, dR2); // residual branch r2 = n1 + g

      // layer norm 1 over r1 = x + attention(x)
      const dR1 = layerNormBackward(dN1, b.g1, c.ln1, g.g1, g.b1);

      // attention output: o = h wo
      const dO = dR1;
      addMat(g.wo, matmul(transpose(c.h), dO));
      const dH = matmul(dO, transpose(b.wo));

      // h = attn v
      const dAttn = matmul(dH, transpose(c.v));
      const dV = matmul(transpose(c.attn), dH);

      // attn = softmax(q k^T / sqrt(d)) rows
      const dScores = c.attn.map((row, i) => softmaxRowBackward(row, dAttn[i]));
      for (const row of dScores) {
        for (let j = 0; j < row.length; j++) row[j] *= invSqrtD;
      }
      const dQ = matmul(dScores, c.k);
      const dK = matmul(transpose(dScores), c.q);

      const dXNext = dR1.map((row) => row.slice()); // residual branch r1 = x + o
      addMat(g.wq, matmul(transpose(c.x), dQ));
      addMat(dXNext, matmul(dQ, transpose(b.wq)));
      addMat(g.wk, matmul(transpose(c.x), dK));
      addMat(dXNext, matmul(dK, transpose(b.wk)));
      addMat(g.wv, matmul(transpose(c.x), dV));
      addMat(dXNext, matmul(dV, transpose(b.wv)));
      dx = dXNext;
    }

    for (let i = 0; i < t; i++) {
      const tok = cache.input.ids[i];
      const seg = cache.input.segments[i];
      for (let j = 0; j < d; j++) {
        grads.embTok[tok][j] += dx[i][j];
        grads.embPos[i][j] += dx[i][j];
        grads.embSeg[seg][j] += dx[i][j];
      }
    }
  }
}

function addMat(target: Mat, source: Mat): void {
  for (let i = 0; i < target.length; i++) {
    for (let j = 0; j < target[i].length; j++) target[i][j] += source[i][j];
  }
}

export function cloneParams(p: ModelParams): ModelParams {
  return {
    embTok: cloneMat(p.embTok),
    embPos: cloneMat(p.embPos),
    embSeg: cloneMat(p.embSeg),
    blocks: p.blocks.map((b) => ({
      wq: cloneMat(b.wq),
      wk: cloneMat(b.wk),
      wv: cloneMat(b.wv),
      wo: cloneMat(b.wo),
      g1: b.g1.slice(),
      b1: b.b1.slice(),
      wf1: cloneMat(b.wf1),
      bf1: b.bf1.slice(),
      wf2: cloneMat(b.wf2),
      bf2: b.bf2.slice(),
      g2: b.g2.slice(),
      b2: b.b2.slice(),
    })),
    headW: cloneMat(p.headW),
    headB: p.headB.slice(),
  };
}
