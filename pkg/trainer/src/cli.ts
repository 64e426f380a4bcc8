#!/usr/bin/env node
/**
 * chartfolio-train: fine-tune the chart classifier head and export
 * replay-format probabilities plus a portable model.
 *
 *   chartfolio-train --data splits/ --epochs 50 --seed 7 --out run1/
 *
 * The data directory must contain train.csv and validation.csv from the
 * pipeline's split step (test.csv, when present, is what gets exported),
 * with image_path columns resolving to rendered PNGs.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';
import { parseArgs } from 'node:util';

import { DEFAULT_CONFIG, TrainConfig } from './config';
import { loadBackbone } from './backbone';
import { loadDataset, readSamplesCsv } from './data';
import { exportProbs } from './exporter';
import { saveModel } from './io';
import { assembleModel } from './model';
import { train, writeEpochLog } from './train';

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      data: { type: 'string' },
      out: { type: 'string' },
      epochs: { type: 'string' },
      seed: { type: 'string' },
      'batch-size': { type: 'string' },
      backbone: { type: 'string' },
      'images-root': { type: 'string' },
    },
  });
  if (!values.data || !values.out) {
    console.error('usage: chartfolio-train --data DIR --out DIR [--epochs N] [--seed S]');
    return 64;
  }

  const cfg: TrainConfig = {
    ...DEFAULT_CONFIG,
    epochs: values.epochs ? Number(values.epochs) : DEFAULT_CONFIG.epochs,
    seed: values.seed ? Number(values.seed) : DEFAULT_CONFIG.seed,
    batchSize: values['batch-size'] ? Number(values['batch-size']) : DEFAULT_CONFIG.batchSize,
  };

  const dataDir = values.data;
  const imagesRoot = values['images-root'];
  const trainRows = readSamplesCsv(path.join(dataDir, 'train.csv'), imagesRoot);
  const valRows = readSamplesCsv(path.join(dataDir, 'validation.csv'), imagesRoot);
  const testCsv = path.join(dataDir, 'test.csv');
  const exportRows = fs.existsSync(testCsv) ? readSamplesCsv(testCsv, imagesRoot) : valRows;

  console.log(`loaded ${trainRows.length} train / ${valRows.length} validation samples`);
  const trainSet = loadDataset(trainRows);
  const valSet = loadDataset(valRows);

  const backbone = await loadBackbone(values.backbone, cfg.seed);
  const result = train(backbone, trainSet, valSet, cfg);
  console.log(
    `trained ${cfg.epochs} epochs; best validation accuracy ` +
      `${result.bestValAcc.toFixed(4)} at epoch ${result.bestEpoch}`,
  );

  fs.mkdirSync(values.out, { recursive: true });
  writeEpochLog(result.log, path.join(values.out, 'epochs.csv'));

  const model = assembleModel(backbone, result.head);
  await saveModel(model, path.join(values.out, 'model'));

  const exportSet = loadDataset(exportRows);
  exportProbs(model, exportSet, path.join(values.out, 'replay.csv'));
  console.log(`artifacts written to ${values.out}: epochs.csv, model/, replay.csv`);
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err.message}`);
    process.exit(1);
  },
);
