import { readFileSync } from 'fs'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** row-major RGB triples in [0, 1] */
  data: Float64Array
}

export function loadPng(path: string): RgbImage {
  const png = PNG.sync.read(readFileSync(path))
  const { width, height } = png
  const data = new Float64Array(width * height * 3)
  for (let i = 0; i < width * height; i++) {
    data[i * 3] = png.data[i * 4] / 255
    data[i * 3 + 1] = png.data[i * 4 + 1] / 255
    data[i * 3 + 2] = png.data[i * 4 + 2] / 255
  }
  return { width, height, data }
}

/** Area-average resize to size x size; deterministic for identical pixels. */
export function resizeRgb(img: RgbImage, size: number): Float64Array {
  const out = new Float64Array(size * size * 3)
  for (let ty = 0; ty < size; ty++) {
    const y0 = Math.floor((ty * img.height) / size)
    const y1 = Math.max(y0 + 1, Math.floor(((ty + 1) * img.height) / size))
    for (let tx = 0; tx < size; tx++) {
      const x0 = Math.floor((tx * img.width) / size)
      const x1 = Math.max(x0 + 1, Math.floor(((tx + 1) * img.width) / size))
      let r = 0
      let g = 0
      let b = 0
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) {
          const s = (y * img.width + x) * 3
          r += img.data[s]
          g += img.data[s + 1]
          b += img.data[s + 2]
        }
      }
      const n = (y1 - y0) * (x1 - x0)
      const t = (ty * size + tx) * 3
      out[t] = r / n
      out[t + 1] = g / n
      out[t + 2] = b / n
    }
  }
  return out
}
