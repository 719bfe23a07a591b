import * as tf from '@tensorflow/tfjs'
import { spawnSync } from 'child_process'
import { mkdirSync, writeFileSync } from 'fs'
import * as path from 'path'
import { PNG } from 'pngjs'
import { saveLocalModel } from '../src/model'

export const INPUT_SIZE = 8
export const LABELS = ['cat', 'dog', 'frog']

/** Tiny deterministic byte stream so fixture images differ but reproduce. */
export function lcg(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0
    return state >>> 24
  }
}

export function writePng(filePath: string, seed: number, size: number = INPUT_SIZE): void {
  const png = new PNG({ width: size, height: size })
  const next = lcg(seed)
  for (let i = 0; i < size * size; i++) {
    png.data[i * 4] = next()
    png.data[i * 4 + 1] = next()
    png.data[i * 4 + 2] = next()
    png.data[i * 4 + 3] = 255
  }
  mkdirSync(path.dirname(filePath), { recursive: true })
  writeFileSync(filePath, PNG.sync.write(png))
}

/** Class-named subfolders with deterministic images: {cat: 4, dog: 3} etc. */
export function writeFixture(root: string, counts: Record<string, number>, size: number = INPUT_SIZE): void {
  mkdirSync(root, { recursive: true })
  let seed = 1
  for (const folder of Object.keys(counts).sort()) {
    for (let i = 0; i < counts[folder]; i++) {
      writePng(path.join(root, folder, `img_${i}.png`), seed++, size)
    }
  }
}

export function makeClassifier(numClasses: number = LABELS.length, size: number = INPUT_SIZE): tf.LayersModel {
  return tf.sequential({
    layers: [
      tf.layers.flatten({ inputShape: [size, size, 3] }),
      tf.layers.dense({ units: numClasses, kernelInitializer: tf.initializers.glorotUniform({ seed: 7 }) }),
    ],
  })
}

export function makeEncoder(dim: number = 4, size: number = INPUT_SIZE): tf.LayersModel {
  return tf.sequential({
    layers: [
      tf.layers.flatten({ inputShape: [size, size, 3] }),
      tf.layers.dense({ units: dim, kernelInitializer: tf.initializers.glorotUniform({ seed: 11 }) }),
    ],
  })
}

export async function saveClassifier(dir: string, labels: string[] = LABELS): Promise<void> {
  await saveLocalModel(makeClassifier(labels.length), dir, labels)
}

export async function saveEncoder(dir: string): Promise<void> {
  await saveLocalModel(makeEncoder(), dir)
}

const CLI = path.join(__dirname, '..', 'dist', 'cli.js')

export function runCli(args: string[], cwd?: string) {
  return spawnSync(process.execPath, [CLI, ...args], { cwd, encoding: 'utf8' })
}

/** The difficulty toolkit's own CLI; the manifest contract lives there. */
export function runValidate(args: string[]) {
  return spawnSync('dgs', ['validate', ...args], { encoding: 'utf8' })
}
