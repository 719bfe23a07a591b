#!/usr/bin/env node
import * as tf from '@tensorflow/tfjs'
import { existsSync, statSync } from 'fs'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { DEFAULT_SIZE } from './images'
import { writeManifest } from './manifest'
import { ScorerInputError, scoreFolder } from './scorer'

function fail(code: number, msg: string): never {
  console.error(`error: ${msg}`)
  process.exit(code)
}

function requireDir(p: string, what: string): void {
  if (!existsSync(p) || !statSync(p).isDirectory()) {
    fail(2, `${what} ${p} is not a directory`)
  }
}

async function main(): Promise<void> {
  const argv = yargs(hideBin(process.argv))
    .scriptName('dgs-score')
    .usage('$0 --images DIR --model DIR [options]\n\nScore a folder of class-named image subfolders and write a JSONL manifest.')
    .option('images', { type: 'string', demandOption: true, describe: 'root folder; subfolder names are class labels' })
    .option('model', { type: 'string', demandOption: true, describe: 'classifier directory (model.json, weights, labels.json)' })
    .option('encoder', { type: 'string', describe: 'optional encoder directory; adds a latent vector per record' })
    .option('out', { type: 'string', default: 'manifest.jsonl', describe: 'output manifest path' })
    .option('batch', { type: 'number', default: 16, describe: 'inference batch size' })
    .option('resize', { type: 'number', default: DEFAULT_SIZE, describe: 'square input size fed to the models' })
    .option('device', { type: 'string', default: 'cpu', describe: 'backend hint passed to the runtime' })
    .strict()
    .fail((msg, err) => {
      fail(2, msg ?? (err ? err.message : 'bad arguments'))
    })
    .parseSync()

  requireDir(argv.images, '--images')
  requireDir(argv.model, '--model')
  if (argv.encoder !== undefined) requireDir(argv.encoder, '--encoder')

  if (!(await tf.setBackend(argv.device))) {
    console.error(`warning: backend ${argv.device} unavailable, using ${tf.getBackend()}`)
  }

  const { records, skipped } = await scoreFolder(
    {
      imageRoot: argv.images,
      modelDir: argv.model,
      encoderDir: argv.encoder,
      batch: argv.batch,
      resize: argv.resize,
    },
    msg => console.error(`warning: ${msg}`),
  )
  writeManifest(records, argv.out)
  console.error(`scored ${records.length} images, skipped ${skipped.length} -> ${argv.out}`)
}

main().catch(err => {
  if (err instanceof ScorerInputError) fail(2, err.message)
  if (err instanceof Error && err.message.includes('ENOENT')) fail(2, err.message)
  fail(1, err instanceof Error ? err.message : String(err))
})
