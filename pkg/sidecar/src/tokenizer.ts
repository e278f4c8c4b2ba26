/** Tokenization and the trainable vocabulary with hash buckets for unknowns. */

export const CLS_ID = 0;
export const SEP_ID = 1;
const FIRST_WORD_ID = 2;

export interface VocabData {
  words: string[];
  hashBuckets: number;
}

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[a-z0-9]+/g) ?? [];
}

/** FNV-1a 32-bit; stable across runs so unknown words bucket deterministically. */
export function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

export class Vocabulary {
  private readonly wordToId = new Map<string, number>();

  constructor(readonly data: VocabData) {
    data.words.forEach((w, i) => this.wordToId.set(w, FIRST_WORD_ID + i));
  }

  /** Total id space: [CLS], [SEP], known words, then hash buckets. */
  get size(): number {
    return FIRST_WORD_ID + this.data.words.length + this.data.hashBuckets;
  }

  tokenId(token: string): number {
    const known = this.wordToId.get(token);
    if (known !== undefined) return known;
    const bucket = fnv1a(token) % this.data.hashBuckets;
    return FIRST_WORD_ID + this.data.words.length + bucket;
  }

  encodeTokens(tokens: string[]): number[] {
    return tokens.map((t) => this.tokenId(t));
  }
}

/** Most frequent words from the training texts, ties broken alphabetically. */
export function buildVocabulary(
  texts: string[],
  maxWords = 2000,
  hashBuckets = 256,
): Vocabulary {
  const counts = new Map<string, number>();
  for (const text of texts) {
    for (const token of tokenize(text)) {
      counts.set(token, (counts.get(token) ?? 0) + 1);
    }
  }
  const words = [...counts.entries()]
    .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
    .slice(0, maxWords)
    .map(([w]) => w);
  return new Vocabulary({ words, hashBuckets });
}

export interface EncodedInput {
  ids: number[];
  segments: number[]; // 0 = claim side (incl. [CLS] and first [SEP]), 1 = explanation side
  truncated: boolean;
}

/** Single text: [CLS] tokens [SEP], truncated to maxLen. */
export function encodeText(vocab: Vocabulary, text: string, maxLen: number): EncodedInput {
  const tokens = vocab.encodeTokens(tokenize(text));
  const budget = maxLen - 2;
  const truncated = tokens.length > budget;
  const kept = tokens.slice(0, budget);
  return {
    ids: [CLS_ID, ...kept, SEP_ID],
    segments: new Array(kept.length + 2).fill(0),
    truncated,
  };
}

/** Pair: [CLS] claim [SEP] explanation [SEP]; both sides share the budget. */
export function encodePair(
  vocab: Vocabulary,
  claim: string,
  explanation: string,
  maxLen: number,
): EncodedInput {
  const a = vocab.encodeTokens(tokenize(claim));
  const b = vocab.encodeTokens(tokenize(explanation));
  const budget = maxLen - 3;
  let keepA = Math.min(a.length, Math.ceil(budget / 2));
  let keepB = Math.min(b.length, budget - keepA);
  keepA = Math.min(a.length, budget - keepB); // give unused claim budget to the explanation
  const truncated = keepA < a.length || keepB < b.length;
  const ids = [CLS_ID, ...a.slice(0, keepA), SEP_ID, ...b.slice(0, keepB), SEP_ID];
  const segments = [
    ...new Array(keepA + 2).fill(0),
    ...new Array(keepB + 1).fill(1),
  ];
  return { ids, segments, truncated };
}
