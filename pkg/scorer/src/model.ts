import * as tf from '@tensorflow/tfjs'
import { readFileSync, writeFileSync, mkdirSync } from 'fs'
import * as path from 'path'

/**
 * A model directory holds the standard layers-model files plus the label
 * set the classifier was trained on:
 *
 *   model.json    topology + weights manifest
 *   weights.bin   binary weight shards (paths listed in the manifest)
 *   labels.json   output classes, in output order
 */

function toArrayBuffer(buf: Buffer): ArrayBuffer {
  const out = new ArrayBuffer(buf.byteLength)
  new Uint8Array(out).set(buf)
  return out
}

function concat(buffers: ArrayBuffer[]): ArrayBuffer {
  const total = buffers.reduce((n, b) => n + b.byteLength, 0)
  const out = new Uint8Array(total)
  let offset = 0
  for (const b of buffers) {
    out.set(new Uint8Array(b), offset)
    offset += b.byteLength
  }
  return out.buffer
}

/** Load a layers model from a local directory. */
export async function loadLocalModel(dir: string): Promise<tf.LayersModel> {
  const modelJson = JSON.parse(readFileSync(path.join(dir, 'model.json'), 'utf8'))
  const weightSpecs: tf.io.WeightsManifestEntry[] = []
  const buffers: ArrayBuffer[] = []
  for (const group of modelJson.weightsManifest ?? []) {
    weightSpecs.push(...group.weights)
    for (const p of group.paths) {
      buffers.push(toArrayBuffer(readFileSync(path.join(dir, p))))
    }
  }
  const artifacts: tf.io.ModelArtifacts = {
    modelTopology: modelJson.modelTopology,
    weightSpecs,
    weightData: concat(buffers),
  }
  return tf.loadLayersModel({ load: async () => artifacts })
}

/** Save a layers model into the directory layout loadLocalModel reads. */
export async function saveLocalModel(model: tf.LayersModel, dir: string, labels?: string[]): Promise<void> {
  mkdirSync(dir, { recursive: true })
  await model.save(
    tf.io.withSaveHandler(async artifacts => {
      const weightData = artifacts.weightData as ArrayBuffer
      writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weightData))
      const modelJson = {
        modelTopology: artifacts.modelTopology,
        format: 'layers-model',
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      }
      writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson))
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } }
    }),
  )
  if (labels !== undefined) {
    writeFileSync(path.join(dir, 'labels.json'), JSON.stringify(labels))
  }
}

/** Read the classifier's label set from its model directory. */
export function loadLabels(dir: string): string[] {
  const labels = JSON.parse(readFileSync(path.join(dir, 'labels.json'), 'utf8'))
  if (!Array.isArray(labels) || labels.length === 0 || labels.some(l => typeof l !== 'string')) {
    throw new Error(`labels.json in ${dir} must be a non-empty array of strings`)
  }
  return labels
}
