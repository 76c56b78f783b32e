import { existsSync, readFileSync, readdirSync } from 'fs'
import * as path from 'path'
import { fileURLToPath } from 'url'

/**
 * Checkpoint format for the patch encoder:
 * non-overlapping patches -> linear + tanh -> mean pool -> linear -> L2.
 *
 * Weights are row-major: w1 is hidden x (patch*patch*3), w2 is dim x hidden.
 * Checkpoints are plain JSON so they can be exported from any training
 * stack; the bundled `dev-tiny` checkpoint exists for contract tests and
 * is not a trained model.
 */
export interface Checkpoint {
  name: string
  input_size: number
  patch: number
  hidden: number
  dim: number
  w1: number[]
  b1: number[]
  w2: number[]
  b2: number[]
}

const MODELS_DIR = path.join(path.dirname(fileURLToPath(import.meta.url)), '..', 'models')

export function resolveModelPath(model: string): string {
  if (model.endsWith('.json') && existsSync(model)) {
    return model
  }
  const bundled = path.join(MODELS_DIR, `${model}.json`)
  if (existsSync(bundled)) {
    return bundled
  }
  const available = existsSync(MODELS_DIR)
    ? readdirSync(MODELS_DIR).filter(f => f.endsWith('.json')).map(f => f.replace(/\.json$/, ''))
    : []
  throw new Error(
    `model checkpoint not found: ${model}\n` +
      `Bundled checkpoints live in ${MODELS_DIR} (available: ${available.join(', ') || 'none'}).\n` +
      `Pass --model <name> for a bundled one, or --model /path/to/checkpoint.json ` +
      `with fields {name, input_size, patch, hidden, dim, w1, b1, w2, b2}.`,
  )
}

export function loadCheckpoint(model: string): Checkpoint {
  const file = resolveModelPath(model)
  const ckpt = JSON.parse(readFileSync(file, 'utf-8')) as Checkpoint
  const patchDim = ckpt.patch * ckpt.patch * 3
  if (ckpt.w1.length !== ckpt.hidden * patchDim || ckpt.b1.length !== ckpt.hidden) {
    throw new Error(`checkpoint ${file}: w1/b1 shapes do not match hidden=${ckpt.hidden}`)
  }
  if (ckpt.w2.length !== ckpt.dim * ckpt.hidden || ckpt.b2.length !== ckpt.dim) {
    throw new Error(`checkpoint ${file}: w2/b2 shapes do not match dim=${ckpt.dim}`)
  }
  if (ckpt.input_size % ckpt.patch !== 0) {
    throw new Error(`checkpoint ${file}: input_size must be a multiple of patch`)
  }
  return ckpt
}

/** Forward pass over one resized image (input_size x input_size RGB). */
export function encode(ckpt: Checkpoint, pixels: Float64Array): Float64Array {
  const grid = ckpt.input_size / ckpt.patch
  const patchDim = ckpt.patch * ckpt.patch * 3
  const pooled = new Float64Array(ckpt.hidden)

  const patch = new Float64Array(patchDim)
  for (let gy = 0; gy < grid; gy++) {
    for (let gx = 0; gx < grid; gx++) {
      let p = 0
      for (let y = 0; y < ckpt.patch; y++) {
        const row = (gy * ckpt.patch + y) * ckpt.input_size + gx * ckpt.patch
        for (let x = 0; x < ckpt.patch; x++) {
          const s = (row + x) * 3
          patch[p++] = pixels[s]
          patch[p++] = pixels[s + 1]
          patch[p++] = pixels[s + 2]
        }
      }
      for (let h = 0; h < ckpt.hidden; h++) {
        let acc = ckpt.b1[h]
        const base = h * patchDim
        for (let i = 0; i < patchDim; i++) {
          acc += ckpt.w1[base + i] * patch[i]
        }
        pooled[h] += Math.tanh(acc)
      }
    }
  }
  const nPatches = grid * grid
  for (let h = 0; h < ckpt.hidden; h++) {
    pooled[h] /= nPatches
  }

  const out = new Float64Array(ckpt.dim)
  let norm = 0
  for (let d = 0; d < ckpt.dim; d++) {
    let acc = ckpt.b2[d]
    const base = d * ckpt.hidden
    for (let h = 0; h < ckpt.hidden; h++) {
      acc += ckpt.w2[base + h] * pooled[h]
    }
    out[d] = acc
    norm += acc * acc
  }
  norm = Math.sqrt(norm)
  if (norm > 0) {
    for (let d = 0; d < ckpt.dim; d++) {
      out[d] /= norm
    }
  }
  return out
}
