#!/usr/bin/env node
import { embedFrames } from './embed.js'

const USAGE = `usage: vdup-embed embed --frames DIR --out FILE [--model NAME] [--seed S]
                  [--batch-size N] [--device cpu]

Encodes every PNG frame in DIR and writes feature JSONL in the duplicate
detection engine's import format (header line, then one line per frame).`

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>()
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith('--')) {
      args.set(argv[i].slice(2), argv[i + 1] ?? '')
      i++
    }
  }
  return args
}

export function main(argv: string[]): number {
  if (argv[0] !== 'embed') {
    console.error(USAGE)
    return 2
  }
  const args = parseArgs(argv.slice(1))
  const framesDir = args.get('frames')
  const outPath = args.get('out')
  if (!framesDir || !outPath) {
    console.error(USAGE)
    return 2
  }
  try {
    const result = embedFrames(framesDir, outPath, {
      model: args.get('model') ?? 'dev-tiny',
      seed: parseInt(args.get('seed') ?? '0', 10),
      batchSize: parseInt(args.get('batch-size') ?? '32', 10),
      device: args.get('device') ?? 'cpu',
    })
    console.log(
      `${result.frames} frames -> ${result.outPath} ` +
        `(extractor ${result.extractorId}, ${result.skipped.length} skipped)`,
    )
    return 0
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`)
    return 1
  }
}

process.exit(main(process.argv.slice(2)))
