export {
  CHANNEL_MEAN,
  CHANNEL_STDEV,
  DEFAULT_CONFIG,
  IMAGE_SIZE,
  NUM_CLASSES,
  lrAtEpoch,
} from './config';
export type { TrainConfig } from './config';
export { loadImage, normalizeRgba } from './preprocess';
export { classesPresent, loadDataset, readSamplesCsv } from './data';
export type { LoadedDataset, SampleRow } from './data';
export { buildFallbackBackbone, loadBackbone, weightBytes } from './backbone';
export { assembleModel, buildHead, headLogits, predictProbs } from './model';
export type { ClassifierHead } from './model';
export { train, writeEpochLog } from './train';
export type { EpochLogEntry, TrainResult } from './train';
export { exportProbs, probParity } from './exporter';
export { loadModel, saveModel } from './io';
