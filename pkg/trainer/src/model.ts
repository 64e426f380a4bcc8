import * as tf from '@tensorflow/tfjs';

import { NUM_CLASSES, TrainConfig } from './config';

/**
 * The trainable head: dropout on the backbone features, then one linear
 * layer whose logits feed the softmax. Only these weights ever train.
 */
export interface ClassifierHead {
  dropout: tf.layers.Layer;
  dense: tf.layers.Layer;
}

export function buildHead(cfg: TrainConfig, featureDim: number): ClassifierHead {
  const dropout = tf.layers.dropout({ rate: cfg.dropout, seed: cfg.seed + 101, name: 'head_dropout' });
  const dense = tf.layers.dense({
    units: NUM_CLASSES,
    activation: 'linear',
    kernelInitializer: tf.initializers.glorotUniform({ seed: cfg.seed + 202 }),
    biasInitializer: 'zeros',
    name: 'head_dense',
  });
  // materialize weights now so they can be snapshotted/trained immediately
  dense.build([null, featureDim]);
  dropout.build([null, featureDim]);
  return { dropout, dense };
}

export function headLogits(
  head: ClassifierHead,
  features: tf.Tensor2D,
  training: boolean,
): tf.Tensor2D {
  const dropped = head.dropout.apply(features, { training }) as tf.Tensor2D;
  return head.dense.apply(dropped) as tf.Tensor2D;
}

/** Full inference graph (dropout inactive) over the frozen backbone.

 * Head layers are rebuilt inside the graph so their weights carry scoped
 * names (a standalone-built layer would serialize bare `kernel`/`bias`
 * entries the loader cannot match); the trained weights are then copied in.
 */
export function assembleModel(backbone: tf.LayersModel, head: ClassifierHead): tf.LayersModel {
  const features = backbone.outputs[0];
  const dropout = tf.layers.dropout({
    rate: (head.dropout as unknown as { rate: number }).rate,
    name: 'clf_dropout',
  });
  const dense = tf.layers.dense({ units: NUM_CLASSES, activation: 'linear', name: 'clf_dense' });
  const logits = dense.apply(dropout.apply(features)) as tf.SymbolicTensor;
  const probs = tf.layers.softmax({ name: 'clf_softmax' }).apply(logits) as tf.SymbolicTensor;
  const model = tf.model({ inputs: backbone.inputs, outputs: probs, name: 'chart_classifier' });
  dense.setWeights(head.dense.getWeights());
  return model;
}

export function predictProbs(model: tf.LayersModel, images: tf.Tensor4D): tf.Tensor2D {
  return tf.tidy(() => model.predict(images) as tf.Tensor2D);
}
