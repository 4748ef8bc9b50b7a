/**
 * Checkpoint save/load for the pure-JS runtime (no filesystem IO handler
 * ships with the browser bundle): topology + weight specs go to
 * model.json, weight values to weights.bin, plus a meta.json with the
 * training-side information evaluate needs.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

export interface CheckpointMeta {
  labels: number[];
  inputSize: [number, number, number];
  inChannels: number;
  levels: number;
  baseFilters: number;
}

export async function saveModel(dir: string, model: tf.LayersModel, meta: CheckpointMeta): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      fs.writeFileSync(
        path.join(dir, 'model.json'),
        JSON.stringify({ modelTopology: artifacts.modelTopology, weightSpecs: artifacts.weightSpecs }),
      );
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(artifacts.weightData as ArrayBuffer));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
    }),
  );
  fs.writeFileSync(path.join(dir, 'meta.json'), JSON.stringify(meta, null, 1));
}

export async function loadModel(dir: string): Promise<{ model: tf.LayersModel; meta: CheckpointMeta }> {
  const spec = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf-8'));
  const weights = fs.readFileSync(path.join(dir, 'weights.bin'));
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: spec.modelTopology,
      weightSpecs: spec.weightSpecs,
      weightData: weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength),
    }),
  );
  const meta = JSON.parse(fs.readFileSync(path.join(dir, 'meta.json'), 'utf-8')) as CheckpointMeta;
  return { model, meta };
}
