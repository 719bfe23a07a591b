import * as tf from '@tensorflow/tfjs'
import { existsSync, readFileSync } from 'fs'
import * as path from 'path'
import { DEFAULT_SIZE, FolderImage, listImages, prepareImage } from './images'
import { ManifestRecord } from './manifest'
import { loadLabels, loadLocalModel } from './model'

/** Bad inputs (folders, labels, config); the CLI reports these as exit 2. */
export class ScorerInputError extends Error {}

export interface ScorerConfig {
  imageRoot: string
  modelDir: string
  encoderDir?: string
  batch?: number
  resize?: number
}

export interface ScoreResult {
  records: ManifestRecord[]
  skipped: string[]
}

/** Optional folder-to-class sidecar for folders not named after model labels. */
export function readLabelMap(imageRoot: string): Record<string, string> {
  const mapPath = path.join(imageRoot, 'label_map.json')
  if (!existsSync(mapPath)) return {}
  const raw = JSON.parse(readFileSync(mapPath, 'utf8'))
  if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
    throw new ScorerInputError('label_map.json must map folder names to class names')
  }
  for (const [k, v] of Object.entries(raw)) {
    if (typeof v !== 'string') {
      throw new ScorerInputError(`label_map.json entry ${JSON.stringify(k)} is not a string`)
    }
  }
  return raw as Record<string, string>
}

function resolveClasses(images: FolderImage[], labelMap: Record<string, string>, labels: string[]): Map<string, string> {
  const known = new Set(labels)
  const byFolder = new Map<string, string>()
  const unmapped: string[] = []
  for (const folder of [...new Set(images.map(im => im.folder))].sort()) {
    const cls = labelMap[folder] ?? folder
    if (!known.has(cls)) {
      unmapped.push(`${folder} -> ${cls}`)
    } else {
      byFolder.set(folder, cls)
    }
  }
  if (unmapped.length > 0) {
    throw new ScorerInputError(
      `labels not in the classifier's label set: ${unmapped.join(', ')} (add them to label_map.json)`,
    )
  }
  return byFolder
}

/**
 * Score every readable image under the root's class folders.
 *
 * prob_true is the softmax probability the classifier assigns to the
 * image's own class, so the model is expected to emit logits. Images run
 * through the model in fixed-size batches; batch size never changes the
 * output order (sorted by relative path) or the per-image scores.
 * Unreadable files are skipped and reported through onWarn.
 */
export async function scoreFolder(config: ScorerConfig, onWarn: (msg: string) => void = () => {}): Promise<ScoreResult> {
  const batch = config.batch ?? 16
  const size = config.resize ?? DEFAULT_SIZE
  if (!Number.isInteger(batch) || batch < 1) {
    throw new ScorerInputError(`batch must be a positive integer, got ${batch}`)
  }
  if (!Number.isInteger(size) || size < 1) {
    throw new ScorerInputError(`resize must be a positive integer, got ${size}`)
  }

  const images = listImages(config.imageRoot)
  if (images.length === 0) {
    throw new ScorerInputError(`no .png images under ${config.imageRoot}`)
  }
  const labels = loadLabels(config.modelDir)
  const classByFolder = resolveClasses(images, readLabelMap(config.imageRoot), labels)
  const model = await loadLocalModel(config.modelDir)
  const encoder = config.encoderDir !== undefined ? await loadLocalModel(config.encoderDir) : null

  const records: ManifestRecord[] = []
  const skipped: string[] = []
  let pending: { image: FolderImage; tensor: tf.Tensor3D }[] = []

  const flush = () => {
    if (pending.length === 0) return
    const batchItems = pending
    pending = []
    const input = tf.stack(batchItems.map(p => p.tensor)) as tf.Tensor4D
    batchItems.forEach(p => p.tensor.dispose())
    const probs = tf.tidy(() => {
      const logits = model.predict(input) as tf.Tensor2D
      if (logits.shape[1] !== labels.length) {
        throw new ScorerInputError(
          `model emits ${logits.shape[1]} classes but labels.json lists ${labels.length}`,
        )
      }
      return tf.softmax(logits).arraySync()
    }) as number[][]
    const latents = encoder === null
      ? null
      : (tf.tidy(() => (encoder.predict(input) as tf.Tensor2D).arraySync()) as number[][])
    input.dispose()
    batchItems.forEach((p, row) => {
      const cls = classByFolder.get(p.image.folder) as string
      const rec: ManifestRecord = {
        id: p.image.relPath,
        label: cls,
        prob_true: probs[row][labels.indexOf(cls)],
        path: p.image.relPath,
      }
      if (latents !== null) rec.latent = latents[row]
      records.push(rec)
    })
  }

  for (const image of images) {
    let tensor: tf.Tensor3D
    try {
      tensor = prepareImage(image.absPath, size)
    } catch (err) {
      skipped.push(image.relPath)
      onWarn(`skipping unreadable image ${image.relPath}: ${(err as Error).message}`)
      continue
    }
    pending.push({ image, tensor })
    if (pending.length === batch) flush()
  }
  flush()

  if (records.length === 0) {
    throw new ScorerInputError(`every image under ${config.imageRoot} was unreadable`)
  }
  return { records, skipped }
}
