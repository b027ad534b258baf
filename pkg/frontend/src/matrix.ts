/** Minimal dense float64 matrix helpers. Sizes here are tiny (d_model <= 32,
 * sequence <= 64), so plain number[][] keeps everything readable. */

export type Matrix = number[][];

export function zeros(rows: number, cols: number): Matrix {
  return Array.from({ length: rows }, () => new Array<number>(cols).fill(0));
}

export function matmul(a: Matrix, b: Matrix): Matrix {
  const n = a.length;
  const k = b.length;
  const m = b[0].length;
  const out = zeros(n, m);
  for (let i = 0; i < n; i++) {
    const ai = a[i];
    const oi = out[i];
    for (let p = 0; p < k; p++) {
      const v = ai[p];
      if (v === 0) continue;
      const bp = b[p];
      for (let j = 0; j < m; j++) oi[j] += v * bp[j];
    }
  }
  return out;
}

export function transpose(a: Matrix): Matrix {
  const out = zeros(a[0].length, a.length);
  for (let i = 0; i < a.length; i++) {
    for (let j = 0; j < a[i].length; j++) out[j][i] = a[i][j];
  }
  return out;
}

export function clone(a: Matrix): Matrix {
  return a.map((row) => row.slice());
}

export function addInPlace(a: Matrix, b: Matrix, scale = 1): void {
  for (let i = 0; i < a.length; i++) {
    for (let j = 0; j < a[i].length; j++) a[i][j] += scale * b[i][j];
  }
}

export function frobeniusNormSq(a: Matrix): number {
  let s = 0;
  for (const row of a) for (const v of row) s += v * v;
  return s;
}
