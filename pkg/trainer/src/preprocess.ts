import * as fs from 'node:fs';
import { PNG } from 'pngjs';

import { CHANNEL_MEAN, CHANNEL_STDEV, IMAGE_SIZE } from './config';

/**
 * Decode an RGB PNG and normalize each channel: (byte/255 - mean) / stdev.
 * Returns HWC float data ready to stack into an NHWC batch tensor.
 */
export function loadImage(path: string): Float32Array {
  const png = PNG.sync.read(fs.readFileSync(path));
  if (png.width !== IMAGE_SIZE || png.height !== IMAGE_SIZE) {
    throw new Error(
      `${path}: expected ${IMAGE_SIZE}x${IMAGE_SIZE}, got ${png.width}x${png.height}`,
    );
  }
  return normalizeRgba(png.data, png.width, png.height);
}

export function normalizeRgba(
  rgba: Uint8Array | Buffer,
  width: number,
  height: number,
): Float32Array {
  const out = new Float32Array(width * height * 3);
  for (let idx = 0; idx < width * height; idx++) {
    const src = idx * 4;
    for (let c = 0; c < 3; c++) {
      out[idx * 3 + c] = (rgba[src + c] / 255 - CHANNEL_MEAN[c]) / CHANNEL_STDEV[c];
    }
  }
  return out;
}
