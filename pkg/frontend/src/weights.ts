/** Weight-file contract shared with the simulator: JSON with explicit
 * shapes, row-major float64 arrays, normalization stats, and a crc32 over a
 * canonical byte encoding (ASCII header + IEEE-754 LE floats) so both
 * runtimes compute the identical checksum. */

import { Matrix } from "./matrix.js";
import { MATRIX_NAMES, MatrixName, ModelWeights, expectedShape } from "./model.js";

export const SCHEMA_VERSION = 1;

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function floatBytes(values: number[]): Uint8Array {
  const buf = new ArrayBuffer(values.length * 8);
  const view = new DataView(buf);
  values.forEach((v, i) => view.setFloat64(i * 8, v, true));
  return new Uint8Array(buf);
}

function ascii(s: string): Uint8Array {
  return new TextEncoder().encode(s);
}

export function canonicalPayload(w: ModelWeights): Uint8Array {
  const parts: Uint8Array[] = [];
  parts.push(ascii(`dcnsim-qpred|v${SCHEMA_VERSION}|${w.dModel}|${w.dFf}|` +
    `${w.seqLenMax}|${w.posenc}|`));
  parts.push(floatBytes([w.normMean, w.normScale]));
  for (const name of MATRIX_NAMES) {
    const m = w.matrices[name];
    parts.push(ascii(`${name}|${m.length},${m[0].length}|`));
    parts.push(floatBytes(m.flat()));
  }
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

export function weightsChecksum(w: ModelWeights): number {
  return crc32(canonicalPayload(w));
}

export function validateWeights(w: ModelWeights): void {
  if (w.normScale <= 0) throw new Error("norm scale must be > 0");
  for (const name of MATRIX_NAMES) {
    const m = w.matrices[name];
    if (!m) throw new Error(`missing matrix ${name}`);
    const [r, c] = expectedShape(name, w.dModel, w.dFf);
    if (m.length !== r || m[0].length !== c) {
      throw new Error(`matrix ${name} has shape ${m.length}x${m[0].length}, ` +
        `expected ${r}x${c}`);
    }
    for (const row of m) {
      for (const v of row) {
        if (!Number.isFinite(v)) throw new Error(`matrix ${name} non-finite`);
      }
    }
  }
}

export function serializeWeights(w: ModelWeights): string {
  validateWeights(w);
  const matrices: Record<string, { shape: number[]; data: number[] }> = {};
  for (const name of MATRIX_NAMES) {
    const m = w.matrices[name];
    matrices[name] = { shape: [m.length, m[0].length], data: m.flat() };
  }
  return JSON.stringify({
    schema_version: SCHEMA_VERSION,
    d_model: w.dModel,
    d_ff: w.dFf,
    seq_len_max: w.seqLenMax,
    posenc: w.posenc,
    norm: { mean: w.normMean, scale: w.normScale },
    matrices,
    crc32: weightsChecksum(w),
  });
}

export function deserializeWeights(text: string): ModelWeights {
  const doc = JSON.parse(text);
  if (doc.schema_version !== SCHEMA_VERSION) {
    throw new Error(`unsupported schema_version ${doc.schema_version}`);
  }
  const matrices = {} as Record<MatrixName, Matrix>;
  for (const name of MATRIX_NAMES) {
    const spec = doc.matrices[name];
    if (!spec) throw new Error(`missing matrix ${name}`);
    const [r, c] = spec.shape;
    if (spec.data.length !== r * c) {
      throw new Error(`matrix ${name}: ${spec.data.length} values for ` +
        `shape ${r}x${c}`);
    }
    const m: Matrix = [];
    for (let i = 0; i < r; i++) m.push(spec.data.slice(i * c, (i + 1) * c));
    matrices[name] = m;
  }
  const w: ModelWeights = {
    dModel: doc.d_model,
    dFf: doc.d_ff,
    seqLenMax: doc.seq_len_max,
    normMean: doc.norm.mean,
    normScale: doc.norm.scale,
    posenc: doc.posenc,
    matrices,
  };
  validateWeights(w);
  if (weightsChecksum(w) !== doc.crc32) {
    throw new Error("crc32 mismatch: weight file corrupted");
  }
  return w;
}
