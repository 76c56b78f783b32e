/**
 * Fixed seeded random projection to the 64-dim export size. The seed is
 * recorded in the JSONL header so a projection can be reproduced exactly.
 */

export const OUTPUT_DIM = 64

/** mulberry32: small deterministic PRNG over a 32-bit state */
function mulberry32(seed: number): () => number {
  let state = seed | 0
  return () => {
    state = (state + 0x6d2b79f5) | 0
    let t = Math.imul(state ^ (state >>> 15), 1 | state)
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

export function projectionMatrix(inputDim: number, seed: number): Float64Array {
  const rand = mulberry32(seed)
  const scale = 1 / Math.sqrt(inputDim)
  const matrix = new Float64Array(OUTPUT_DIM * inputDim)
  for (let i = 0; i < matrix.length; i++) {
    matrix[i] = (2 * rand() - 1) * scale
  }
  return matrix
}

export function project(matrix: Float64Array, vec: Float64Array): Float64Array {
  const inputDim = vec.length
  const out = new Float64Array(OUTPUT_DIM)
  let norm = 0
  for (let d = 0; d < OUTPUT_DIM; d++) {
    let acc = 0
    const base = d * inputDim
    for (let i = 0; i < inputDim; i++) {
      acc += matrix[base + i] * vec[i]
    }
    out[d] = acc
    norm += acc * acc
  }
  norm = Math.sqrt(norm)
  if (norm > 0) {
    for (let d = 0; d < OUTPUT_DIM; d++) {
      out[d] /= norm
    }
  }
  return out
}
