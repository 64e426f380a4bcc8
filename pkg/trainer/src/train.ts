import * as fs from 'node:fs';
import * as tf from '@tensorflow/tfjs';

import { NUM_CLASSES, TrainConfig, lrAtEpoch } from './config';
import { LoadedDataset, classesPresent } from './data';
import { ClassifierHead, buildHead, headLogits } from './model';

export interface EpochLogEntry {
  epoch: number; // 1-based
  trainAcc: number;
  valAcc: number;
}

export interface TrainResult {
  head: ClassifierHead;
  log: EpochLogEntry[];
  bestValAcc: number;
  bestEpoch: number;
}

/** Deterministic PRNG for the per-epoch shuffles. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffledIndices(n: number, seed: number): number[] {
  const rand = mulberry32(seed);
  const order = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}

function headVariables(head: ClassifierHead): tf.Variable[] {
  // LayerVariable.val is protected in the typings but is the actual
  // tf.Variable that variableGrads needs
  const wrapped = head.dense.trainableWeights as unknown as Array<{ val: tf.Variable }>;
  return wrapped.map((w) => w.val);
}

function accuracy(head: ClassifierHead, features: tf.Tensor2D, labels: Int32Array): number {
  return tf.tidy(() => {
    const logits = headLogits(head, features, false);
    const calls = logits.argMax(1).dataSync();
    let hits = 0;
    for (let i = 0; i < labels.length; i++) if (calls[i] === labels[i]) hits++;
    return hits / labels.length;
  });
}

function snapshotWeights(head: ClassifierHead): Float32Array[] {
  return head.dense.getWeights().map((w) => new Float32Array(w.dataSync() as Float32Array));
}

function restoreWeights(head: ClassifierHead, snapshot: Float32Array[]): void {
  const shapes = head.dense.getWeights().map((w) => w.shape);
  head.dense.setWeights(snapshot.map((data, i) => tf.tensor(data, shapes[i])));
}

/**
 * Head-only training on frozen backbone features.
 *
 * The optimizer is plain SGD with classical momentum in the decoupled
 * convention: d = g + weightDecay*w; buf = momentum*buf + d; and the
 * Nesterov step applies d + momentum*buf. The learning rate decays by the
 * configured factor on the configured epoch boundaries. The checkpoint
 * with the best validation accuracy is restored before returning.
 */
export function train(
  backbone: tf.LayersModel,
  trainSet: LoadedDataset,
  valSet: LoadedDataset,
  cfg: TrainConfig,
): TrainResult {
  const present = classesPresent(trainSet.labels);
  for (let c = 0; c < NUM_CLASSES; c++) {
    if (!present.has(c)) {
      throw new Error(`class ${c} missing from the training split`);
    }
  }

  // the backbone never trains, so its features are constants
  const trainFeatures = backbone.predict(trainSet.images) as tf.Tensor2D;
  const valFeatures = backbone.predict(valSet.images) as tf.Tensor2D;
  const featureDim = trainFeatures.shape[1];
  const head = buildHead(cfg, featureDim);
  const vars = headVariables(head);

  const n = trainSet.labels.length;
  const oneHot = tf.oneHot(tf.tensor1d(trainSet.labels, 'int32'), NUM_CLASSES) as tf.Tensor2D;

  const velocities = new Map<string, tf.Tensor>();
  const log: EpochLogEntry[] = [];
  let bestValAcc = -1;
  let bestEpoch = 0;
  let bestSnapshot: Float32Array[] | null = null;

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const lr = lrAtEpoch(cfg, epoch);
    const order = shuffledIndices(n, cfg.seed * 10007 + epoch);

    for (let start = 0; start < n; start += cfg.batchSize) {
      const idx = order.slice(start, start + cfg.batchSize);
      const idxT = tf.tensor1d(idx, 'int32');
      const batchX = tf.gather(trainFeatures, idxT) as tf.Tensor2D;
      const batchY = tf.gather(oneHot, idxT) as tf.Tensor2D;

      const { value, grads } = tf.variableGrads(
        () =>
          tf.losses.softmaxCrossEntropy(
            batchY,
            headLogits(head, batchX, true),
          ) as tf.Scalar,
        vars,
      );
      value.dispose();

      for (const v of vars) {
        const g = grads[v.name];
        const prev = velocities.get(v.name);
        const update = tf.tidy(() => {
          const d = g.add(v.mul(cfg.weightDecay));
          const buf = (prev ?? tf.zerosLike(v)).mul(cfg.momentum).add(d);
          const step = cfg.nesterov ? d.add(buf.mul(cfg.momentum)) : buf;
          return { buf: tf.keep(buf), next: tf.keep(v.sub(step.mul(lr))) };
        });
        prev?.dispose();
        velocities.set(v.name, update.buf);
        v.assign(update.next as tf.Tensor<tf.Rank>);
        update.next.dispose();
        g.dispose();
      }
      idxT.dispose();
      batchX.dispose();
      batchY.dispose();
    }

    const entry: EpochLogEntry = {
      epoch: epoch + 1,
      trainAcc: accuracy(head, trainFeatures, trainSet.labels),
      valAcc: accuracy(head, valFeatures, valSet.labels),
    };
    log.push(entry);
    if (entry.valAcc > bestValAcc) {
      bestValAcc = entry.valAcc;
      bestEpoch = entry.epoch;
      bestSnapshot = snapshotWeights(head);
    }
  }

  if (bestSnapshot) restoreWeights(head, bestSnapshot);

  oneHot.dispose();
  trainFeatures.dispose();
  valFeatures.dispose();
  for (const buf of velocities.values()) buf.dispose();

  return { head, log, bestValAcc, bestEpoch };
}

export function writeEpochLog(log: EpochLogEntry[], path: string): void {
  const lines = ['epoch,train_acc,val_acc'];
  for (const entry of log) {
    lines.push(`${entry.epoch},${entry.trainAcc},${entry.valAcc}`);
  }
  fs.writeFileSync(path, lines.join('\n') + '\n');
}
