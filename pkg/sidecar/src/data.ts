/** Pair-export JSON-lines reader (the format the core CLI writes with --pairs-out). */

import { readFileSync } from "node:fs";

import { PairRecord } from "./train.js";

export function readPairs(path: string): PairRecord[] {
  const pairs: PairRecord[] = [];
  const lines = readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new Error(`${path} line ${i + 1}: invalid JSON`);
    }
    const record = raw as { claim?: unknown; explanation?: unknown; label?: unknown };
    if (
      typeof record.claim !== "string" ||
      typeof record.explanation !== "string" ||
      (record.label !== 0 && record.label !== 1)
    ) {
      throw new Error(`${path} line ${i + 1}: expected {claim, explanation, label}`);
    }
    pairs.push({ claim: record.claim, explanation: record.explanation, label: record.label });
  });
  if (pairs.length === 0) throw new Error(`${path}: no pairs found`);
  return pairs;
}
