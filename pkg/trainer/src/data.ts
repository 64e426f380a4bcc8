import * as fs from 'node:fs';
import * as path from 'node:path';
import * as tf from '@tensorflow/tfjs';

import { IMAGE_SIZE } from './config';
import { loadImage } from './preprocess';

export interface SampleRow {
  sampleId: string;
  label: number; // 0 | 1 | 2
  imagePath: string;
}

/** Parse the samples CSV (sample_id,...,label,image_path) the pipeline emits. */
export function readSamplesCsv(csvPath: string, imageRoot?: string): SampleRow[] {
  const text = fs.readFileSync(csvPath, 'utf-8');
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error(`${csvPath}: empty file`);
  const header = lines[0].split(',');
  const col = (name: string) => {
    const i = header.indexOf(name);
    if (i < 0) throw new Error(`${csvPath}: missing column ${name}`);
    return i;
  };
  const idCol = col('sample_id');
  const labelCol = col('label');
  const imageCol = col('image_path');
  const root = imageRoot ?? path.dirname(csvPath);

  const rows: SampleRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(',');
    const label = Number(parts[labelCol]);
    if (!Number.isInteger(label) || label < 0 || label > 2) {
      throw new Error(`${csvPath}:${i + 1}: bad label ${parts[labelCol]}`);
    }
    const rawImage = parts[imageCol];
    if (!rawImage) {
      throw new Error(`${csvPath}:${i + 1}: sample ${parts[idCol]} has no image_path`);
    }
    rows.push({
      sampleId: parts[idCol],
      label,
      imagePath: path.isAbsolute(rawImage) ? rawImage : path.join(root, rawImage),
    });
  }
  return rows;
}

export interface LoadedDataset {
  rows: SampleRow[];
  /** NHWC normalized image batch. */
  images: tf.Tensor4D;
  labels: Int32Array;
}

export function loadDataset(rows: SampleRow[]): LoadedDataset {
  const n = rows.length;
  const data = new Float32Array(n * IMAGE_SIZE * IMAGE_SIZE * 3);
  const labels = new Int32Array(n);
  rows.forEach((row, i) => {
    data.set(loadImage(row.imagePath), i * IMAGE_SIZE * IMAGE_SIZE * 3);
    labels[i] = row.label;
  });
  return {
    rows,
    images: tf.tensor4d(data, [n, IMAGE_SIZE, IMAGE_SIZE, 3]),
    labels,
  };
}

export function classesPresent(labels: Int32Array): Set<number> {
  return new Set(Array.from(labels));
}
