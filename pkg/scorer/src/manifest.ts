import { writeFileSync } from 'fs'

/** One manifest line: an image scored against its true class. */
export interface ManifestRecord {
  id: string
  label: string
  prob_true: number
  latent?: number[]
  path: string
}

/** Serialize one record with a fixed key order so reruns are byte-identical. */
export function recordLine(rec: ManifestRecord): string {
  const out: Record<string, unknown> = { id: rec.id, label: rec.label, prob_true: rec.prob_true }
  if (rec.latent !== undefined) out.latent = rec.latent
  out.path = rec.path
  return JSON.stringify(out)
}

export function writeManifest(records: ManifestRecord[], outPath: string): void {
  const body = records.map(recordLine).join('\n')
  writeFileSync(outPath, body.length > 0 ? body + '\n' : body)
}
