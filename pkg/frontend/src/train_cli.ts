/** Trains the queue predictor on the synthetic corpus and exports the
 * artifacts the simulator consumes:
 *   ../artifacts/qpred_weights.json    — the weight file (crc32-protected)
 *   ../artifacts/parity_fixtures.json  — 10 input traces with this
 *       trainer's predictions, for cross-runtime agreement checks.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { genTrace, makeCorpus } from "./corpus.js";
import { predictAttention, predictPersistence } from "./model.js";
import { DEFAULT_CONFIG, benchmark, train } from "./train.js";
import { serializeWeights } from "./weights.js";

const HORIZON = 4;

const here = dirname(fileURLToPath(import.meta.url));
const artifactsDir = join(here, "..", "..", "artifacts");
mkdirSync(artifactsDir, { recursive: true });

const cfg = DEFAULT_CONFIG;
const corpus = makeCorpus(cfg.seed, 24, 400, cfg.seqLenMax, HORIZON);
console.log(`corpus: ${corpus.pairs.length} pairs, ` +
  `mean ${corpus.mean.toExponential(3)}, scale ${corpus.scale.toExponential(3)}`);

const { weights, lossHistory } = train(corpus, cfg);
console.log(`train MSE: first ${lossHistory[0].toFixed(4)} -> ` +
  `last ${lossHistory[lossHistory.length - 1].toFixed(4)}`);

// held-out benchmark from a disjoint seed
const holdout = makeCorpus(cfg.seed + 1000, 9, 400, cfg.seqLenMax, HORIZON);
const bench = benchmark(weights, holdout.pairs);
console.log(`holdout MAE: attention ${bench.attentionMae.toExponential(4)} ` +
  `persistence ${bench.persistenceMae.toExponential(4)} ` +
  `(+${bench.improvementPct.toFixed(1)}%)`);

const weightsPath = join(artifactsDir, "qpred_weights.json");
writeFileSync(weightsPath, serializeWeights(weights));
console.log(`wrote ${weightsPath}`);

// parity fixtures: raw traces of assorted lengths plus our predictions
const fixtures = [];
for (let i = 0; i < 10; i++) {
  const kind = (["square", "ramp", "mixed"] as const)[i % 3];
  const len = 16 + i * 12; // covers shorter- and longer-than-window traces
  const trace = genTrace(kind, len, 424200 + i);
  fixtures.push({
    trace,
    attention: predictAttention(trace, weights),
    persistence: predictPersistence(trace, 10),
  });
}
const fixturesPath = join(artifactsDir, "parity_fixtures.json");
writeFileSync(fixturesPath, JSON.stringify({
  weights_file: "qpred_weights.json",
  tolerance: 1e-5,
  fixtures,
}, null, 2));
console.log(`wrote ${fixturesPath}`);
