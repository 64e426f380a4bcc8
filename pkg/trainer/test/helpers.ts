import * as fs from 'node:fs';
import * as path from 'node:path';
import { PNG } from 'pngjs';

import { IMAGE_SIZE } from '../src/config';

/** Class-distinct base colors so even fixed random features separate them. */
const CLASS_COLORS: Array<[number, number, number]> = [
  [235, 235, 235], // bright
  [80, 180, 90], // green-ish
  [60, 40, 45], // dark red-ish
];

function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (1664525 * state + 1013904223) >>> 0;
    return state / 4294967296;
  };
}

export function writeToyPng(filePath: string, classIdx: number, seed: number): void {
  const png = new PNG({ width: IMAGE_SIZE, height: IMAGE_SIZE });
  const [r, g, b] = CLASS_COLORS[classIdx];
  const rand = lcg(seed);
  for (let i = 0; i < IMAGE_SIZE * IMAGE_SIZE; i++) {
    const noise = Math.floor(rand() * 20) - 10;
    png.data[i * 4] = Math.min(255, Math.max(0, r + noise));
    png.data[i * 4 + 1] = Math.min(255, Math.max(0, g + noise));
    png.data[i * 4 + 2] = Math.min(255, Math.max(0, b + noise));
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(filePath, PNG.sync.write(png));
}

const CLASS_PT = ['100.0', '103.0', '97.0'];

/**
 * A toy split directory shaped like the pipeline's output: train.csv,
 * validation.csv, test.csv plus an images/ directory, with `perClass`
 * training images per class and 2 validation/test images per class.
 */
export function writeToySplit(root: string, perClass = 10): void {
  const imagesDir = path.join(root, 'images');
  fs.mkdirSync(imagesDir, { recursive: true });
  const header = 'sample_id,ticker,date,p0,pT,yield,label,image_path';

  const makeRows = (tag: string, count: number) => {
    const rows: string[] = [];
    for (let cls = 0; cls < 3; cls++) {
      for (let k = 0; k < count; k++) {
        const name = `${tag}_${cls}_${k}.png`;
        writeToyPng(path.join(imagesDir, name), cls, cls * 1000 + k + tag.length * 77);
        const pT = CLASS_PT[cls];
        rows.push(
          `${tag}:${cls}:${k},TOY,2022-03-01,100.0,${pT},${Number(pT) / 100},${cls},` +
            path.join('images', name),
        );
      }
    }
    return rows;
  };

  fs.writeFileSync(path.join(root, 'train.csv'), [header, ...makeRows('tr', perClass)].join('\n') + '\n');
  fs.writeFileSync(path.join(root, 'validation.csv'), [header, ...makeRows('va', 2)].join('\n') + '\n');
  fs.writeFileSync(path.join(root, 'test.csv'), [header, ...makeRows('te', 2)].join('\n') + '\n');
}
