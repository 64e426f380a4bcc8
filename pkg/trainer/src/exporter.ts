import * as fs from 'node:fs';
import * as tf from '@tensorflow/tfjs';

import { LoadedDataset } from './data';
import { predictProbs } from './model';

/**
 * Write per-sample softmax probabilities in the replay format the analysis
 * pipeline consumes: sample_id,true_label,prob0,prob1,prob2. Rows sum to 1
 * within 1e-6 (the downstream loader's tolerance).
 */
export function exportProbs(
  model: tf.LayersModel,
  dataset: LoadedDataset,
  csvPath: string,
): void {
  const probs = predictProbs(model, dataset.images);
  const values = probs.arraySync() as number[][];
  probs.dispose();

  const lines = ['sample_id,true_label,prob0,prob1,prob2'];
  dataset.rows.forEach((row, i) => {
    const [p0, p1, p2] = values[i];
    const total = p0 + p1 + p2;
    if (Math.abs(total - 1) > 1e-6) {
      throw new Error(`sample ${row.sampleId}: probabilities sum to ${total}`);
    }
    lines.push(`${row.sampleId},${row.label},${p0},${p1},${p2}`);
  });
  fs.writeFileSync(csvPath, lines.join('\n') + '\n');
}

export interface ParityReport {
  maxAbsDelta: number;
}

/** Compare two models' probabilities on the same batch (export parity). */
export function probParity(
  a: tf.LayersModel,
  b: tf.LayersModel,
  images: tf.Tensor4D,
): ParityReport {
  const pa = predictProbs(a, images);
  const pb = predictProbs(b, images);
  const delta = tf.tidy(() => pa.sub(pb).abs().max().dataSync()[0]);
  pa.dispose();
  pb.dispose();
  return { maxAbsDelta: delta };
}
