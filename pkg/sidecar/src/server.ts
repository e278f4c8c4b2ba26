/** Express service implementing the wire protocol consumed by the core package.
 *
 *   POST /embed    {"texts": [..]}             -> {"dim", "vectors", "truncated"}
 *   POST /classify {"pairs": [[claim, exp]..]} -> {"probs", "truncated"}
 *   GET  /health                               -> {"status": "ok", "model": ..}
 *
 * Errors are always {"error": string} with a 4xx/5xx status. Handlers run on
 * the single event loop, which serializes inference naturally.
 */

import express, { Express, NextFunction, Request, Response } from "express";
import { z } from "zod";

import { MiniTransformer } from "./model.js";

export interface ServerConfig {
  encoder: MiniTransformer;
  classifier: MiniTransformer;
  modelName: string;
}

const embedRequest = z.object({ texts: z.array(z.string()) });
const classifyRequest = z.object({ pairs: z.array(z.tuple([z.string(), z.string()])) });

export function createServer(config: ServerConfig): Express {
  const app = express();
  app.use(express.json({ limit: "4mb" }));

  app.post("/embed", (req: Request, res: Response) => {
    const parsed = embedRequest.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: `bad /embed request: ${parsed.error.message}` });
      return;
    }
    const vectors: number[][] = [];
    let truncated = false;
    for (const text of parsed.data.texts) {
      const result = config.encoder.embed(text);
      vectors.push(result.vector);
      truncated = truncated || result.truncated;
    }
    res.json({ dim: config.encoder.dimension, vectors, truncated });
  });

  app.post("/classify", (req: Request, res: Response) => {
    const parsed = classifyRequest.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: `bad /classify request: ${parsed.error.message}` });
      return;
    }
    const probs: number[] = [];
    let truncated = false;
    for (const [claim, explanation] of parsed.data.pairs) {
      const result = config.classifier.pairProbability(claim, explanation);
      probs.push(result.prob);
      truncated = truncated || result.truncated;
    }
    res.json({ probs, truncated });
  });

  app.get("/health", (_req: Request, res: Response) => {
    res.json({ status: "ok", model: config.modelName });
  });

  app.use((_req: Request, res: Response) => {
    res.status(404).json({ error: "no such endpoint" });
  });

  // malformed JSON bodies land here via express.json()
  app.use((err: Error, _req: Request, res: Response, _next: NextFunction) => {
    const status = (err as { status?: number }).status ?? 500;
    res.status(status).json({ error: err.message });
  });

  return app;
}
