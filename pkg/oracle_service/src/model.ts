/**
 * Seeded convolutional classifier: build, train, persist, and predict.
 *
 * Everything is deterministic for a fixed seed: layer initializers are
 * seeded, the train/validation split comes from a seeded shuffle, and
 * fitting runs with shuffling disabled on the CPU backend, so retraining
 * with the same seed reproduces the same weights and the same accuracy.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { Dataset, DatasetMeta, Rng } from './data';

export interface TrainOptions {
  epochs: number;
  seed: number;
  /** Fraction of the dataset reserved for validation (default 0.2). */
  valFraction?: number;
  batchSize?: number;
  learningRate?: number;
}

export interface TrainedOracle {
  model: tf.LayersModel;
  meta: DatasetMeta;
  seed: number;
  epochs: number;
  /** Accuracy on the held-out split, recorded at the end of training. */
  valAccuracy: number;
}

/** Select the deterministic CPU backend; call once before any model work. */
export async function initBackend(): Promise<void> {
  await tf.setBackend('cpu');
  await tf.ready();
}

/**
 * Small CNN for `meta`-shaped images. The classification head starts at
 * zero, so an untrained model predicts the uniform distribution while the
 * seeded convolutional stack still breaks symmetry during training.
 */
export function buildModel(meta: DatasetMeta, seed: number, learningRate = 1e-3): tf.LayersModel {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [meta.height, meta.width, meta.channels],
      filters: 8,
      kernelSize: 5,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.heNormal({ seed }),
      biasInitializer: 'zeros',
    }),
  );
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.heNormal({ seed: seed + 1 }),
      biasInitializer: 'zeros',
    }),
  );
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: meta.classes,
      activation: 'softmax',
      kernelInitializer: 'zeros',
      biasInitializer: 'zeros',
    }),
  );
  model.compile({
    optimizer: tf.train.adam(learningRate),
    loss: 'categoricalCrossentropy',
    metrics: ['accuracy'],
  });
  return model;
}

function imagesToTensor(images: Uint8Array[], meta: DatasetMeta): tf.Tensor4D {
  const size = meta.height * meta.width * meta.channels;
  const buffer = new Float32Array(images.length * size);
  images.forEach((pixels, i) => {
    for (let j = 0; j < size; j += 1) {
      buffer[i * size + j] = pixels[j] / 255;
    }
  });
  return tf.tensor4d(buffer, [images.length, meta.height, meta.width, meta.channels]);
}

function labelsToTensor(labels: number[], classes: number): tf.Tensor2D {
  const buffer = new Float32Array(labels.length * classes);
  labels.forEach((label, i) => {
    buffer[i * classes + label] = 1;
  });
  return tf.tensor2d(buffer, [labels.length, classes]);
}

/** Probability vector for one image, renormalized in float64. */
export function predictProbs(model: tf.LayersModel, meta: DatasetMeta, pixels: Uint8Array): number[] {
  const raw = tf.tidy(() => {
    const x = imagesToTensor([pixels], meta);
    const probs = model.predict(x) as tf.Tensor;
    return Array.from(probs.dataSync());
  });
  const total = raw.reduce((sum, v) => sum + v, 0);
  return raw.map((v) => v / total);
}

/** Predicted label per image, evaluated in one batch. */
export function predictLabels(model: tf.LayersModel, meta: DatasetMeta, images: Uint8Array[]): number[] {
  return tf.tidy(() => {
    const x = imagesToTensor(images, meta);
    const probs = model.predict(x) as tf.Tensor2D;
    return Array.from(probs.argMax(-1).dataSync());
  });
}

/** Fraction of images whose predicted label matches the given one. */
export function accuracy(
  model: tf.LayersModel,
  meta: DatasetMeta,
  images: Uint8Array[],
  labels: number[],
): number {
  const predicted = predictLabels(model, meta, images);
  let hits = 0;
  predicted.forEach((p, i) => {
    if (p === labels[i]) hits += 1;
  });
  return hits / labels.length;
}

export interface SplitDataset {
  trainImages: Uint8Array[];
  trainLabels: number[];
  valImages: Uint8Array[];
  valLabels: number[];
}

/** Seeded shuffle of the dataset into train and validation parts. */
export function splitDataset(dataset: Dataset, seed: number, valFraction: number): SplitDataset {
  const order = new Rng(seed * 1000 + 5).shuffle(
    Array.from({ length: dataset.images.length }, (_, i) => i),
  );
  const valCount = Math.round(valFraction * order.length);
  const cut = order.length - valCount;
  const pick = (indices: number[]) => ({
    images: indices.map((i) => dataset.images[i]),
    labels: indices.map((i) => dataset.labels[i]),
  });
  const train = pick(order.slice(0, cut));
  const val = pick(order.slice(cut));
  return {
    trainImages: train.images,
    trainLabels: train.labels,
    valImages: val.images,
    valLabels: val.labels,
  };
}

/**
 * Train a fresh model on a seeded split of `dataset` and report accuracy
 * on the held-out part (on the training part when valFraction is 0).
 */
export async function train(dataset: Dataset, options: TrainOptions): Promise<TrainedOracle> {
  const { epochs, seed, valFraction = 0.2, batchSize = 16, learningRate = 1e-3 } = options;
  await initBackend();
  const meta: DatasetMeta = {
    classes: dataset.classes,
    height: dataset.height,
    width: dataset.width,
    channels: dataset.channels,
  };
  const split = splitDataset(dataset, seed, valFraction);
  const model = buildModel(meta, seed, learningRate);
  const xs = imagesToTensor(split.trainImages, meta);
  const ys = labelsToTensor(split.trainLabels, meta.classes);
  try {
    await model.fit(xs, ys, { epochs, batchSize, shuffle: false, verbose: 0 });
  } finally {
    xs.dispose();
    ys.dispose();
  }
  const valAccuracy =
    split.valImages.length > 0
      ? accuracy(model, meta, split.valImages, split.valLabels)
      : accuracy(model, meta, split.trainImages, split.trainLabels);
  return { model, meta, seed, epochs, valAccuracy };
}

const TOPOLOGY_FILE = 'model.json';
const WEIGHTS_FILE = 'weights.bin';
const METADATA_FILE = 'metadata.json';

/** Write the model topology, weights, and training record into `dir`. */
export async function saveOracle(oracle: TrainedOracle, dir: string): Promise<void> {
  let captured: tf.io.ModelArtifacts | null = null;
  await oracle.model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      captured = artifacts;
      return {
        modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' },
      };
    }),
  );
  const artifacts = captured as unknown as tf.io.ModelArtifacts;
  const weightData = tf.io.CompositeArrayBuffer.join(artifacts.weightData);
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(
    path.join(dir, TOPOLOGY_FILE),
    JSON.stringify(
      { modelTopology: artifacts.modelTopology, weightSpecs: artifacts.weightSpecs },
      null,
      2,
    ),
  );
  fs.writeFileSync(path.join(dir, WEIGHTS_FILE), Buffer.from(weightData));
  fs.writeFileSync(
    path.join(dir, METADATA_FILE),
    JSON.stringify(
      {
        ...oracle.meta,
        seed: oracle.seed,
        epochs: oracle.epochs,
        valAccuracy: oracle.valAccuracy,
      },
      null,
      2,
    ),
  );
}

/** Load a model previously written by saveOracle. */
export async function loadOracle(dir: string): Promise<TrainedOracle> {
  await initBackend();
  const topology = JSON.parse(fs.readFileSync(path.join(dir, TOPOLOGY_FILE), 'utf8'));
  const weights = fs.readFileSync(path.join(dir, WEIGHTS_FILE));
  const metadata = JSON.parse(fs.readFileSync(path.join(dir, METADATA_FILE), 'utf8'));
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: topology.modelTopology,
      weightSpecs: topology.weightSpecs,
      weightData: weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength),
    }),
  );
  return {
    model,
    meta: {
      classes: metadata.classes,
      height: metadata.height,
      width: metadata.width,
      channels: metadata.channels,
    },
    seed: metadata.seed,
    epochs: metadata.epochs,
    valAccuracy: metadata.valAccuracy,
  };
}
