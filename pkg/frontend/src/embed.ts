import { readdirSync, renameSync, writeFileSync } from 'fs'
import * as path from 'path'

import { Checkpoint, encode, loadCheckpoint } from './model.js'
import { loadPng, resizeRgb } from './png.js'
import { OUTPUT_DIM, project, projectionMatrix } from './projection.js'

export interface EmbedderConfig {
  model: string
  seed: number
  /** frames per progress tick; inference itself is synchronous CPU math */
  batchSize?: number
  device?: string
}

export interface EmbedResult {
  outPath: string
  frames: number
  skipped: string[]
  extractorId: string
}

function frameIndex(files: string[]): (i: number) => number {
  // corpus frames are named by index (000000.png); fall back to position
  const stems = files.map(f => path.basename(f, '.png'))
  const numeric = stems.every(s => /^\d+$/.test(s))
  return numeric ? i => parseInt(stems[i], 10) : i => i
}

export function embedFrames(framesDir: string, outPath: string, cfg: EmbedderConfig): EmbedResult {
  const ckpt: Checkpoint = loadCheckpoint(cfg.model)
  const files = readdirSync(framesDir)
    .filter(f => f.toLowerCase().endsWith('.png'))
    .sort()
  if (files.length === 0) {
    throw new Error(`no PNG frames found in ${framesDir}`)
  }

  const projected = ckpt.dim !== OUTPUT_DIM
  const matrix = projected ? projectionMatrix(ckpt.dim, cfg.seed) : null
  const indexOf = frameIndex(files)

  const lines: string[] = []
  const skipped: string[] = []
  for (let i = 0; i < files.length; i++) {
    const file = path.join(framesDir, files[i])
    let pixels: Float64Array
    try {
      pixels = resizeRgb(loadPng(file), ckpt.input_size)
    } catch (err) {
      console.warn(`warning: skipping unreadable frame ${files[i]}: ${err}`)
      skipped.push(files[i])
      continue
    }
    let vec = encode(ckpt, pixels)
    if (matrix) {
      vec = project(matrix, vec)
    }
    lines.push(JSON.stringify({ frame: indexOf(i), vectors: [Array.from(vec)] }))
  }

  const extractorId = `neural-${ckpt.name}`
  const header = JSON.stringify({
    mode: 'single',
    dim: OUTPUT_DIM,
    extractor_id: extractorId,
    model: ckpt.name,
    native_dim: ckpt.dim,
    projected,
    projection_seed: cfg.seed,
    skipped,
  })

  // single atomic write once all frames are done
  const tmp = `${outPath}.tmp`
  writeFileSync(tmp, [header, ...lines].join('\n') + '\n')
  renameSync(tmp, outPath)
  return { outPath, frames: lines.length, skipped, extractorId }
}
