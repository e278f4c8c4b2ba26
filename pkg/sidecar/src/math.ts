/** Dense matrix/vector helpers over plain number arrays (rows of a matrix). */

export type Vec = number[];
export type Mat = number[][];

export function zeros(n: number): Vec {
  return new Array(n).fill(0);
}

export function zerosMat(rows: number, cols: number): Mat {
  return Array.from({ length: rows }, () => zeros(cols));
}

/** Deterministic PRNG (mulberry32); seeds every weight init and shuffle. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Uniform init in [-limit, +limit] with limit = sqrt(6 / (fanIn + fanOut)). */
export function glorot(rows: number, cols: number, rand: () => number): Mat {
  const limit = Math.sqrt(6 / (rows + cols));
  return Array.from({ length: rows }, () =>
    Array.from({ length: cols }, () => (rand() * 2 - 1) * limit),
  );
}

export function matmul(a: Mat, b: Mat): Mat {
  const n = a.length;
  const k = b.length;
  const m = b[0]?.length ?? 0;
  const out = zerosMat(n, m);
  for (let i = 0; i < n; i++) {
    const row = a[i];
    const outRow = out[i];
    for (let p = 0; p < k; p++) {
      const v = row[p];
      if (v === 0) continue;
      const bRow = b[p];
      for (let j = 0; j < m; j++) outRow[j] += v * bRow[j];
    }
  }
  return out;
}

export function transpose(a: Mat): Mat {
  const rows = a.length;
  const cols = a[0]?.length ?? 0;
  const out = zerosMat(cols, rows);
  for (let i = 0; i < rows; i++) {
    for (let j = 0; j < cols; j++) out[j][i] = a[i][j];
  }
  return out;
}

export function addInPlace(a: Mat, b: Mat): void {
  for (let i = 0; i < a.length; i++) {
    for (let j = 0; j < a[i].length; j++) a[i][j] += b[i][j];
  }
}

export function scaleInPlace(a: Mat, s: number): void {
  for (const row of a) {
    for (let j = 0; j < row.length; j++) row[j] *= s;
  }
}

export function cloneMat(a: Mat): Mat {
  return a.map((row) => row.slice());
}

export function softmaxRow(row: Vec): Vec {
  const max = Math.max(...row);
  const exps = row.map((v) => Math.exp(v - max));
  const sum = exps.reduce((s, v) => s + v, 0);
  return exps.map((v) => v / sum);
}

/** Backward through one softmax row: ds = (dy - (dy . y)) * y. */
export function softmaxRowBackward(y: Vec, dy: Vec): Vec {
  let dot = 0;
  for (let i = 0; i < y.length; i++) dot += dy[i] * y[i];
  return y.map((v, i) => (dy[i] - dot) * v);
}

export function meanRows(a: Mat): Vec {
  const out = zeros(a[0].length);
  for (const row of a) {
    for (let j = 0; j < row.length; j++) out[j] += row[j];
  }
  return out.map((v) => v / a.length);
}

export function dot(a: Vec, b: Vec): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

export function norm(a: Vec): number {
  return Math.sqrt(dot(a, a));
}

export function cosine(a: Vec, b: Vec): number {
  const na = norm(a);
  const nb = norm(b);
  if (na === 0 || nb === 0) return 0;
  return dot(a, b) / (na * nb);
}
