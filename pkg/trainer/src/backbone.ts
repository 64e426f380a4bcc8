import * as tf from '@tensorflow/tfjs';

import { IMAGE_SIZE } from './config';
import { loadModel } from './io';

/**
 * Feature extractor the classifier head sits on. Always frozen.
 *
 * When a saved model directory is given (a pretrained backbone exported in
 * the portable format), it is loaded as-is. Otherwise a compact seeded
 * convolutional stack stands in: fixed random features are sufficient for
 * the head-only training contract, and no pretrained weights can be fetched
 * in an offline environment.
 */
export async function loadBackbone(
  savedDir: string | undefined,
  seed: number,
): Promise<tf.LayersModel> {
  const model = savedDir ? await loadModel(savedDir) : buildFallbackBackbone(seed);
  model.trainable = false;
  for (const layer of model.layers) layer.trainable = false;
  return model;
}

export function buildFallbackBackbone(seed: number): tf.LayersModel {
  const init = (offset: number) => tf.initializers.glorotUniform({ seed: seed + offset });
  const model = tf.sequential({ name: 'fallback_backbone' });
  model.add(
    tf.layers.conv2d({
      inputShape: [IMAGE_SIZE, IMAGE_SIZE, 3],
      filters: 16,
      kernelSize: 3,
      strides: 2,
      activation: 'relu',
      kernelInitializer: init(1),
      name: 'feat_conv1',
    }),
  );
  model.add(
    tf.layers.conv2d({
      filters: 32,
      kernelSize: 3,
      strides: 2,
      activation: 'relu',
      kernelInitializer: init(2),
      name: 'feat_conv2',
    }),
  );
  model.add(
    tf.layers.conv2d({
      filters: 64,
      kernelSize: 3,
      strides: 2,
      activation: 'relu',
      kernelInitializer: init(3),
      name: 'feat_conv3',
    }),
  );
  model.add(tf.layers.globalAveragePooling2d({ name: 'feat_gap' }));
  return model;
}

/** Snapshot every backbone weight as raw bytes, for bitwise freeze checks. */
export function weightBytes(model: tf.LayersModel): Uint8Array[] {
  return model.getWeights().map((w) => {
    const data = w.dataSync() as Float32Array;
    return new Uint8Array(data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength));
  });
}
