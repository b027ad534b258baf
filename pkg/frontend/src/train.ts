/** SGD training loop with momentum and global-norm gradient clipping over
 * the manual-backprop attention model. Everything is seeded, so a fixed
 * config reproduces the identical weight file byte for byte. */

import { Corpus, Pair } from "./corpus.js";
import { frobeniusNormSq, zeros } from "./matrix.js";
import {
  Gradients, MATRIX_NAMES, ModelWeights, backward, expectedShape, forward,
  predictAttention, predictPersistence, zeroGradients,
} from "./model.js";
import { gaussian, mulberry32 } from "./rng.js";

export interface TrainConfig {
  dModel: number;
  dFf: number;
  seqLenMax: number;
  seed: number;
  epochs: number;
  batchSize: number;
  learningRate: number;
  momentum: number;
  clipNorm: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  dModel: 16,
  dFf: 32,
  seqLenMax: 64,
  seed: 7,
  epochs: 30,
  batchSize: 32,
  learningRate: 0.05,
  momentum: 0.9,
  clipNorm: 1.0,
};

export function initWeights(cfg: TrainConfig, mean: number, scale: number): ModelWeights {
  const rand = mulberry32(cfg.seed);
  const norm = gaussian(rand);
  const matrices = {} as ModelWeights["matrices"];
  for (const name of MATRIX_NAMES) {
    const [r, c] = expectedShape(name, cfg.dModel, cfg.dFf);
    const m = zeros(r, c);
    const std = name.startsWith("ln") || name.endsWith("_b") || name === "head_b"
      ? 0 : Math.sqrt(2.0 / (r + c));
    for (let i = 0; i < r; i++) {
      for (let j = 0; j < c; j++) m[i][j] = std === 0 ? 0 : std * norm();
    }
    matrices[name] = m;
  }
  for (const g of ["ln1_gamma", "ln2_gamma"] as const) {
    matrices[g] = matrices[g].map((row) => row.map(() => 1));
  }
  return {
    dModel: cfg.dModel, dFf: cfg.dFf, seqLenMax: cfg.seqLenMax,
    normMean: mean, normScale: scale, posenc: "sinusoidal", matrices,
  };
}

function normalizePairs(corpus: Corpus): { xs: number[][]; ys: number[] } {
  const xs = corpus.pairs.map((p) =>
    p.x.map((v) => (v - corpus.mean) / corpus.scale));
  const ys = corpus.pairs.map((p) => (p.y - corpus.mean) / corpus.scale);
  return { xs, ys };
}

export interface TrainResult {
  weights: ModelWeights;
  lossHistory: number[]; // mean squared error per epoch, normalized units
}

export function train(corpus: Corpus, cfg: TrainConfig = DEFAULT_CONFIG): TrainResult {
  const { xs, ys } = normalizePairs(corpus);
  const weights = initWeights(cfg, corpus.mean, corpus.scale);
  const velocity: Gradients = zeroGradients(cfg.dModel, cfg.dFf);
  const order = xs.map((_, i) => i);
  const rand = mulberry32(cfg.seed ^ 0x5eed);
  const lossHistory: number[] = [];

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    // Fisher-Yates shuffle with the seeded stream
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let epochLoss = 0;
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const batch = order.slice(start, start + cfg.batchSize);
      const grads = zeroGradients(cfg.dModel, cfg.dFf);
      for (const idx of batch) {
        const cache = forward(xs[idx], weights);
        const err = cache.yNorm - ys[idx];
        epochLoss += err * err;
        backward(cache, (2 * err) / batch.length, weights, grads);
      }
      clipGlobalNorm(grads, cfg.clipNorm);
      for (const name of MATRIX_NAMES) {
        const g = grads[name];
        const vmat = velocity[name];
        const wmat = weights.matrices[name];
        for (let i = 0; i < g.length; i++) {
          for (let j = 0; j < g[i].length; j++) {
            vmat[i][j] = cfg.momentum * vmat[i][j] - cfg.learningRate * g[i][j];
            wmat[i][j] += vmat[i][j];
          }
        }
      }
    }
    lossHistory.push(epochLoss / xs.length);
  }
  return { weights, lossHistory };
}

function clipGlobalNorm(grads: Gradients, maxNorm: number): void {
  let total = 0;
  for (const name of MATRIX_NAMES) total += frobeniusNormSq(grads[name]);
  const norm = Math.sqrt(total);
  if (norm <= maxNorm) return;
  const s = maxNorm / norm;
  for (const name of MATRIX_NAMES) {
    const g = grads[name];
    for (let i = 0; i < g.length; i++) {
      for (let j = 0; j < g[i].length; j++) g[i][j] *= s;
    }
  }
}

export interface Benchmark {
  attentionMae: number;
  persistenceMae: number;
  improvementPct: number;
}

/** Held-out MAE of the trained model vs the persistence baseline. */
export function benchmark(weights: ModelWeights, pairs: Pair[],
    persistenceWindow = 10): Benchmark {
  let attSum = 0;
  let perSum = 0;
  for (const p of pairs) {
    attSum += Math.abs(predictAttention(p.x, weights) - p.y);
    perSum += Math.abs(predictPersistence(p.x, persistenceWindow) - p.y);
  }
  const attentionMae = attSum / pairs.length;
  const persistenceMae = perSum / pairs.length;
  return {
    attentionMae,
    persistenceMae,
    improvementPct: (1 - attentionMae / persistenceMae) * 100,
  };
}
