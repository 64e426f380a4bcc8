/** Training hyperparameters; defaults are the published recipe. */
export interface TrainConfig {
  epochs: number;
  /** Base learning rate; decays by 10x every `lrDecayEvery` epochs. */
  learningRate: number;
  lrDecayFactor: number;
  lrDecayEvery: number;
  momentum: number;
  nesterov: boolean;
  weightDecay: number;
  dropout: number;
  batchSize: number;
  seed: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  epochs: 50,
  learningRate: 0.001,
  lrDecayFactor: 0.1,
  lrDecayEvery: 30,
  momentum: 0.9,
  nesterov: true,
  weightDecay: 0.0001,
  dropout: 0.2,
  batchSize: 32,
  seed: 7,
};

/** Learning rate in effect for a 0-indexed epoch. */
export function lrAtEpoch(cfg: TrainConfig, epoch: number): number {
  const steps = Math.floor(epoch / cfg.lrDecayEvery);
  return cfg.learningRate * Math.pow(cfg.lrDecayFactor, steps);
}

/** Normalization constants shared with the chart renderer's consumers. */
export const CHANNEL_MEAN = [0.485, 0.456, 0.406] as const;
export const CHANNEL_STDEV = [0.229, 0.224, 0.225] as const;

export const IMAGE_SIZE = 224;
export const NUM_CLASSES = 3;
