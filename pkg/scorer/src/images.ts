import * as tf from '@tensorflow/tfjs'
import { readFileSync, readdirSync, statSync } from 'fs'
import * as path from 'path'
import { PNG } from 'pngjs'

export const DEFAULT_SIZE = 224

/** One image file found under a class folder. */
export interface FolderImage {
  relPath: string
  absPath: string
  folder: string
}

function walkFiles(dir: string): string[] {
  let out: string[] = []
  for (const entry of readdirSync(dir)) {
    const full = path.join(dir, entry)
    if (statSync(full).isDirectory()) {
      out = out.concat(walkFiles(full))
    } else {
      out.push(full)
    }
  }
  return out
}

/**
 * Find every .png under the root's class subfolders.
 *
 * The first path segment names the folder (and, via the label map, the
 * class). Results come back sorted by relative path so downstream output
 * is deterministic regardless of filesystem order.
 */
export function listImages(root: string): FolderImage[] {
  const images: FolderImage[] = []
  for (const entry of readdirSync(root)) {
    const full = path.join(root, entry)
    if (!statSync(full).isDirectory()) continue
    for (const file of walkFiles(full)) {
      if (!file.toLowerCase().endsWith('.png')) continue
      const rel = path.relative(root, file).split(path.sep).join('/')
      images.push({ relPath: rel, absPath: file, folder: entry })
    }
  }
  images.sort((a, b) => (a.relPath < b.relPath ? -1 : a.relPath > b.relPath ? 1 : 0))
  return images
}

/** Decode a PNG into an RGB float tensor in [0, 1]. Throws on bad files. */
export function decodePng(filePath: string): tf.Tensor3D {
  const png = PNG.sync.read(readFileSync(filePath))
  const { width, height, data } = png
  const rgb = new Float32Array(width * height * 3)
  for (let i = 0; i < width * height; i++) {
    rgb[i * 3] = data[i * 4] / 255
    rgb[i * 3 + 1] = data[i * 4 + 1] / 255
    rgb[i * 3 + 2] = data[i * 4 + 2] / 255
  }
  return tf.tensor3d(rgb, [height, width, 3])
}

/** Decode and resize to the model's square input size. */
export function prepareImage(filePath: string, size: number = DEFAULT_SIZE): tf.Tensor3D {
  return tf.tidy(() => {
    const img = decodePng(filePath)
    if (img.shape[0] === size && img.shape[1] === size) return img
    return tf.image.resizeBilinear(img, [size, size])
  })
}
