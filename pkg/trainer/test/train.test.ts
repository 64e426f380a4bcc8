import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { beforeAll, describe, expect, it } from 'vitest';

import { DEFAULT_CONFIG, TrainConfig } from '../src/config';
import { buildFallbackBackbone, weightBytes } from '../src/backbone';
import { LoadedDataset, loadDataset, readSamplesCsv } from '../src/data';
import { train, writeEpochLog } from '../src/train';
import { writeToySplit } from './helpers';

let trainSet: LoadedDataset;
let valSet: LoadedDataset;

const SMOKE_CFG: TrainConfig = { ...DEFAULT_CONFIG, epochs: 2, batchSize: 8, seed: 5 };

beforeAll(() => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'train-'));
  writeToySplit(dir, 10); // 30 training images
  trainSet = loadDataset(readSamplesCsv(path.join(dir, 'train.csv')));
  valSet = loadDataset(readSamplesCsv(path.join(dir, 'validation.csv')));
});

describe('head-only training', () => {
  it('runs a 2-epoch smoke train on the 30-image toy set', () => {
    const backbone = buildFallbackBackbone(SMOKE_CFG.seed);
    const result = train(backbone, trainSet, valSet, SMOKE_CFG);
    expect(result.log).toHaveLength(2);
    for (const entry of result.log) {
      expect(entry.trainAcc).toBeGreaterThanOrEqual(0);
      expect(entry.trainAcc).toBeLessThanOrEqual(1);
      expect(entry.valAcc).toBeGreaterThanOrEqual(0);
      expect(entry.valAcc).toBeLessThanOrEqual(1);
    }
    expect(result.log.map((e) => e.epoch)).toEqual([1, 2]);
  });

  it('leaves every backbone weight bitwise unchanged', () => {
    const backbone = buildFallbackBackbone(11);
    const before = weightBytes(backbone);
    train(backbone, trainSet, valSet, SMOKE_CFG);
    const after = weightBytes(backbone);
    expect(after).toHaveLength(before.length);
    before.forEach((bytes, i) => {
      expect(Buffer.compare(Buffer.from(bytes), Buffer.from(after[i]))).toBe(0);
    });
  });

  it('is deterministic for a fixed seed', () => {
    const resultA = train(buildFallbackBackbone(3), trainSet, valSet, SMOKE_CFG);
    const resultB = train(buildFallbackBackbone(3), trainSet, valSet, SMOKE_CFG);
    expect(resultA.log).toEqual(resultB.log);
    const weightsA = resultA.head.dense.getWeights().map((w) => Array.from(w.dataSync()));
    const weightsB = resultB.head.dense.getWeights().map((w) => Array.from(w.dataSync()));
    expect(weightsA).toEqual(weightsB);
  });

  it('rejects a training split with a missing class', () => {
    const backbone = buildFallbackBackbone(1);
    const twoClass: LoadedDataset = {
      rows: trainSet.rows.filter((r) => r.label !== 2),
      images: trainSet.images,
      labels: Int32Array.from(trainSet.labels.map(() => 0)),
    };
    expect(() => train(backbone, twoClass, valSet, SMOKE_CFG)).toThrow(/missing from the training split/);
  });

  it('beats the learnability smoke bound with enough epochs', () => {
    const cfg: TrainConfig = { ...DEFAULT_CONFIG, epochs: 40, batchSize: 8, seed: 13 };
    const result = train(buildFallbackBackbone(cfg.seed), trainSet, valSet, cfg);
    const finalTrainAcc = result.log[result.log.length - 1].trainAcc;
    expect(finalTrainAcc).toBeGreaterThan(1 / 3 + 0.15);
  });

  it('writes the epoch log CSV in the documented shape', () => {
    const backbone = buildFallbackBackbone(2);
    const result = train(backbone, trainSet, valSet, SMOKE_CFG);
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'log-'));
    const file = path.join(dir, 'epochs.csv');
    writeEpochLog(result.log, file);
    const lines = fs.readFileSync(file, 'utf-8').trim().split('\n');
    expect(lines[0]).toBe('epoch,train_acc,val_acc');
    expect(lines).toHaveLength(3);
    expect(lines[1].startsWith('1,')).toBe(true);
  });
});
