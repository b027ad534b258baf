/** Synthetic queue-depth corpus: traces that look like switch egress
 * occupancy under bursty training traffic — square-wave buildup/drain
 * plateaus, sawtooth ramps, and noisy mixtures — cut into
 * (window, future value) training pairs. */

import { gaussian, mulberry32 } from "./rng.js";

export interface Pair {
  x: number[]; // window of depths (bits)
  y: number;   // depth `horizon` steps after the window
}

export type TraceKind = "square" | "ramp" | "mixed";

export function genTrace(kind: TraceKind, length: number, seed: number): number[] {
  const rand = mulberry32(seed);
  const norm = gaussian(rand);
  const amp = 0.5e6 + rand() * 3.5e6;   // plateau depth, bits
  const period = 24 + Math.floor(rand() * 72);
  const noise = amp * 0.02;
  const phase = Math.floor(rand() * period);
  const out = new Array<number>(length);
  for (let t = 0; t < length; t++) {
    const ph = (t + phase) % period;
    let base: number;
    if (kind === "square") {
      base = ph < period / 2 ? amp : amp * 0.1;
    } else if (kind === "ramp") {
      base = (amp * ph) / period;
    } else {
      const square = ph < period / 2 ? amp : amp * 0.1;
      const ramp = (amp * ph) / period;
      base = 0.5 * square + 0.5 * ramp;
    }
    out[t] = Math.max(base + noise * norm(), 0);
  }
  return out;
}

/** Sliding-window pairs: with N samples, window W and horizon H there are
 * N - W - H + 1 pairs (e.g. 100 samples, W=64, H=4 -> 33 pairs). */
export function buildPairs(trace: number[], window: number, horizon: number): Pair[] {
  const pairs: Pair[] = [];
  for (let i = 0; i + window + horizon - 1 < trace.length; i++) {
    pairs.push({ x: trace.slice(i, i + window), y: trace[i + window + horizon - 1] });
  }
  return pairs;
}

export interface Corpus {
  pairs: Pair[];
  mean: number;
  scale: number;
}

export function makeCorpus(seed: number, nTraces: number, traceLen: number,
    window: number, horizon: number): Corpus {
  const kinds: TraceKind[] = ["square", "ramp", "mixed"];
  const pairs: Pair[] = [];
  for (let i = 0; i < nTraces; i++) {
    const kind = kinds[i % kinds.length];
    pairs.push(...buildPairs(genTrace(kind, traceLen, seed * 1000 + i),
      window, horizon));
  }
  let sum = 0;
  let count = 0;
  for (const p of pairs) {
    for (const v of p.x) {
      sum += v;
      count++;
    }
  }
  const mean = sum / count;
  let varSum = 0;
  for (const p of pairs) for (const v of p.x) varSum += (v - mean) ** 2;
  const scale = Math.sqrt(varSum / count) || 1.0;
  return { pairs, mean, scale };
}
