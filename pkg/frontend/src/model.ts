/** Single-layer, single-head self-attention regressor over a normalized
 * queue-depth window, written to match the simulator's inference pass
 * bit-for-bit in structure: embed + sinusoidal positions, softmax attention
 * with residual + layernorm, ReLU feed-forward with residual + layernorm,
 * then a linear head on the last position. Backprop is manual so the
 * package has no ML-framework dependency and the forward stays auditable.
 */

import { Matrix, matmul, transpose, zeros } from "./matrix.js";

export const LAYERNORM_EPS = 1e-5;

export const MATRIX_NAMES = [
  "embed_w", "embed_b", "wq", "wk", "wv", "ln1_gamma", "ln1_beta",
  "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2", "ln2_gamma", "ln2_beta",
  "head_w", "head_b",
] as const;

export type MatrixName = (typeof MATRIX_NAMES)[number];

export interface ModelWeights {
  dModel: number;
  dFf: number;
  seqLenMax: number;
  normMean: number;
  normScale: number;
  posenc: "sinusoidal" | "none";
  matrices: Record<MatrixName, Matrix>;
}

export function expectedShape(name: MatrixName, d: number, f: number): [number, number] {
  const shapes: Record<MatrixName, [number, number]> = {
    embed_w: [1, d], embed_b: [1, d],
    wq: [d, d], wk: [d, d], wv: [d, d],
    ln1_gamma: [1, d], ln1_beta: [1, d],
    ffn_w1: [d, f], ffn_b1: [1, f],
    ffn_w2: [f, d], ffn_b2: [1, d],
    ln2_gamma: [1, d], ln2_beta: [1, d],
    head_w: [d, 1], head_b: [1, 1],
  };
  return shapes[name];
}

export function sinusoidalEncoding(nPos: number, dModel: number): Matrix {
  const pe = zeros(nPos, dModel);
  for (let pos = 0; pos < nPos; pos++) {
    for (let i = 0; i < dModel; i += 2) {
      const div = Math.pow(10000.0, i / dModel);
      pe[pos][i] = Math.sin(pos / div);
      if (i + 1 < dModel) pe[pos][i + 1] = Math.cos(pos / div);
    }
  }
  return pe;
}

interface LayerNormCache {
  xhat: Matrix;   // normalized pre-scale activations
  invStd: number[];
}

function layerNorm(x: Matrix, gamma: Matrix, beta: Matrix):
    { out: Matrix; cache: LayerNormCache } {
  const n = x.length;
  const d = x[0].length;
  const out = zeros(n, d);
  const xhat = zeros(n, d);
  const invStd = new Array<number>(n);
  for (let i = 0; i < n; i++) {
    let mu = 0;
    for (let j = 0; j < d; j++) mu += x[i][j];
    mu /= d;
    let varSum = 0;
    for (let j = 0; j < d; j++) {
      const c = x[i][j] - mu;
      varSum += c * c;
    }
    const inv = 1.0 / Math.sqrt(varSum / d + LAYERNORM_EPS);
    invStd[i] = inv;
    for (let j = 0; j < d; j++) {
      xhat[i][j] = (x[i][j] - mu) * inv;
      out[i][j] = xhat[i][j] * gamma[0][j] + beta[0][j];
    }
  }
  return { out, cache: { xhat, invStd } };
}

function layerNormBackward(dOut: Matrix, cache: LayerNormCache, gamma: Matrix,
    grads: { dGamma: Matrix; dBeta: Matrix }): Matrix {
  const n = dOut.length;
  const d = dOut[0].length;
  const dx = zeros(n, d);
  for (let i = 0; i < n; i++) {
    let meanDxhat = 0;
    let meanDxhatXhat = 0;
    const dxhat = new Array<number>(d);
    for (let j = 0; j < d; j++) {
      grads.dGamma[0][j] += dOut[i][j] * cache.xhat[i][j];
      grads.dBeta[0][j] += dOut[i][j];
      dxhat[j] = dOut[i][j] * gamma[0][j];
      meanDxhat += dxhat[j];
      meanDxhatXhat += dxhat[j] * cache.xhat[i][j];
    }
    meanDxhat /= d;
    meanDxhatXhat /= d;
    for (let j = 0; j < d; j++) {
      dx[i][j] = cache.invStd[i] *
        (dxhat[j] - meanDxhat - cache.xhat[i][j] * meanDxhatXhat);
    }
  }
  return dx;
}

function softmaxRows(x: Matrix): Matrix {
  return x.map((row) => {
    const mx = Math.max(...row);
    const e = row.map((v) => Math.exp(v - mx));
    const s = e.reduce((a, b) => a + b, 0);
    return e.map((v) => v / s);
  });
}

export interface ForwardCache {
  xNorm: number[];
  x0: Matrix;
  attnProbs: Matrix;
  q: Matrix;
  k: Matrix;
  v: Matrix;
  ln1: LayerNormCache;
  x1: Matrix;
  preRelu: Matrix;
  hidden: Matrix;
  ln2: LayerNormCache;
  out: Matrix;
  yNorm: number;
}

/** Forward pass over a normalized window; returns the normalized scalar
 * prediction for the step after the window plus everything backprop needs. */
export function forward(xNorm: number[], w: ModelWeights): ForwardCache {
  const m = w.matrices;
  const T = xNorm.length;
  const d = w.dModel;
  const x0 = zeros(T, d);
  const pe = w.posenc === "sinusoidal" ? sinusoidalEncoding(T, d) : null;
  for (let t = 0; t < T; t++) {
    for (let j = 0; j < d; j++) {
      x0[t][j] = xNorm[t] * m.embed_w[0][j] + m.embed_b[0][j]
        + (pe ? pe[t][j] : 0);
    }
  }
  const q = matmul(x0, m.wq);
  const k = matmul(x0, m.wk);
  const v = matmul(x0, m.wv);
  const scale = 1.0 / Math.sqrt(d);
  const scores = matmul(q, transpose(k)).map((row) => row.map((s) => s * scale));
  const attnProbs = softmaxRows(scores);
  const attn = matmul(attnProbs, v);
  const sum1 = x0.map((row, i) => row.map((xv, j) => xv + attn[i][j]));
  const { out: x1, cache: ln1 } = layerNorm(sum1, m.ln1_gamma, m.ln1_beta);
  const preRelu = matmul(x1, m.ffn_w1).map((row) =>
    row.map((hv, j) => hv + m.ffn_b1[0][j]));
  const hidden = preRelu.map((row) => row.map((hv) => Math.max(hv, 0)));
  const f = matmul(hidden, m.ffn_w2).map((row) =>
    row.map((fv, j) => fv + m.ffn_b2[0][j]));
  const sum2 = x1.map((row, i) => row.map((xv, j) => xv + f[i][j]));
  const { out, cache: ln2 } = layerNorm(sum2, m.ln2_gamma, m.ln2_beta);
  let yNorm = m.head_b[0][0];
  for (let j = 0; j < d; j++) yNorm += out[T - 1][j] * m.head_w[0 + j][0];
  return { xNorm, x0, attnProbs, q, k, v, ln1, x1, preRelu, hidden, ln2, out, yNorm };
}

export type Gradients = Record<MatrixName, Matrix>;

export function zeroGradients(d: number, f: number): Gradients {
  const g = {} as Gradients;
  for (const name of MATRIX_NAMES) {
    const [r, c] = expectedShape(name, d, f);
    g[name] = zeros(r, c);
  }
  return g;
}

/** Accumulate gradients of (dLoss/dyNorm) into `grads` for one sample. */
export function backward(cache: ForwardCache, dY: number, w: ModelWeights,
    grads: Gradients): void {
  const m = w.matrices;
  const T = cache.xNorm.length;
  const d = w.dModel;

  // head: y = out[T-1] . head_w + head_b
  grads.head_b[0][0] += dY;
  const dOut = zeros(T, d);
  for (let j = 0; j < d; j++) {
    grads.head_w[j][0] += cache.out[T - 1][j] * dY;
    dOut[T - 1][j] = m.head_w[j][0] * dY;
  }

  // second layernorm over x1 + f
  const dSum2 = layerNormBackward(dOut, cache.ln2, m.ln2_gamma,
    { dGamma: grads.ln2_gamma, dBeta: grads.ln2_beta });

  // feed-forward: f = relu(x1 @ w1 + b1) @ w2 + b2; residual adds dSum2 to dx1
  const dF = dSum2;
  const dHidden = matmul(dF, transpose(m.ffn_w2));
  const w2Grad = matmul(transpose(cache.hidden), dF);
  addMat(grads.ffn_w2, w2Grad);
  addRowSum(grads.ffn_b2, dF);
  const dPre = dHidden.map((row, i) =>
    row.map((v, j) => (cache.preRelu[i][j] > 0 ? v : 0)));
  addMat(grads.ffn_w1, matmul(transpose(cache.x1), dPre));
  addRowSum(grads.ffn_b1, dPre);
  const dX1 = matmul(dPre, transpose(m.ffn_w1));
  addMat(dX1, dSum2); // residual path

  // first layernorm over x0 + attn
  const dSum1 = layerNormBackward(dX1, cache.ln1, m.ln1_gamma,
    { dGamma: grads.ln1_gamma, dBeta: grads.ln1_beta });

  // attention: attn = softmax(q k^T / sqrt(d)) v
  const dAttn = dSum1;
  const dX0 = dSum1.map((row) => row.slice()); // residual path
  const dV = matmul(transpose(cache.attnProbs), dAttn);
  const dProbs = matmul(dAttn, transpose(cache.v));
  const dScores = zeros(T, T);
  for (let i = 0; i < T; i++) {
    let dot = 0;
    for (let j = 0; j < T; j++) dot += dProbs[i][j] * cache.attnProbs[i][j];
    for (let j = 0; j < T; j++) {
      dScores[i][j] = cache.attnProbs[i][j] * (dProbs[i][j] - dot);
    }
  }
  const scale = 1.0 / Math.sqrt(d);
  const dQ = matmul(dScores, cache.k).map((row) => row.map((v) => v * scale));
  const dK = matmul(transpose(dScores), cache.q).map((row) =>
    row.map((v) => v * scale));
  addMat(grads.wq, matmul(transpose(cache.x0), dQ));
  addMat(grads.wk, matmul(transpose(cache.x0), dK));
  addMat(grads.wv, matmul(transpose(cache.x0), dV));
  addMat(dX0, matmul(dQ, transpose(m.wq)));
  addMat(dX0, matmul(dK, transpose(m.wk)));
  addMat(dX0, matmul(dV, transpose(m.wv)));

  // embedding: x0 = xNorm[:,None] @ embed_w + embed_b (+ fixed positions)
  for (let t = 0; t < T; t++) {
    for (let j = 0; j < d; j++) {
      grads.embed_w[0][j] += cache.xNorm[t] * dX0[t][j];
      grads.embed_b[0][j] += dX0[t][j];
    }
  }
}

function addMat(a: Matrix, b: Matrix): void {
  for (let i = 0; i < a.length; i++) {
    for (let j = 0; j < a[i].length; j++) a[i][j] += b[i][j];
  }
}

function addRowSum(acc: Matrix, m: Matrix): void {
  for (const row of m) {
    for (let j = 0; j < row.length; j++) acc[0][j] += row[j];
  }
}

/** Denormalized prediction from a raw depth trace (inference-side contract). */
export function predictAttention(samples: number[], w: ModelWeights): number {
  if (samples.length === 0) throw new Error("empty queue trace");
  const tail = samples.slice(-w.seqLenMax);
  const xNorm = tail.map((s) => (s - w.normMean) / w.normScale);
  const { yNorm } = forward(xNorm, w);
  if (!Number.isFinite(yNorm)) throw new Error("non-finite prediction");
  return yNorm * w.normScale + w.normMean;
}

/** Persistence baseline: mean of the last `windowLen` samples. */
export function predictPersistence(samples: number[], windowLen = 10): number {
  if (samples.length === 0) throw new Error("empty queue trace");
  const tail = samples.slice(-windowLen);
  return tail.reduce((a, b) => a + b, 0) / tail.length;
}
