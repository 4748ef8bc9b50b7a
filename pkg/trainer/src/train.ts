/**
 * Train a reduced 3D U-net on generated (image, labels) pairs with a
 * 1 - soft-Dice loss.
 *
 *   node dist/train.js --config train.json
 *
 * The config points at a directory of pairs produced by the generator;
 * a checkpoint directory and a metrics log are written on completion.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

import { Dataset, imagesTensor, intensityScale, loadPairs, shuffled, targetsTensor } from './data';
import { hardDicePerLabel, meanDice, softDiceLoss } from './metrics';
import { saveModel } from './modelio';
import { buildUnet } from './unet';

export interface TrainConfig {
  pairsDir: string;
  outDir: string;
  levels: number;
  baseFilters: number;
  epochs: number;
  batchSize: number;
  learningRate: number;
  valFraction: number;
  seed: number;
  maxPairs?: number;
  /** stop once validation (or training, if no validation split) mean Dice reaches this */
  targetDice?: number;
  maxSeconds?: number;
}

export function parseTrainConfig(file: string): TrainConfig {
  const doc = JSON.parse(fs.readFileSync(file, 'utf-8'));
  const config: TrainConfig = {
    pairsDir: doc.pairs_dir,
    outDir: doc.out_dir ?? 'checkpoint',
    levels: doc.levels ?? 3,
    baseFilters: doc.base_filters ?? 24,
    epochs: doc.epochs ?? 1,
    batchSize: doc.batch_size ?? 1,
    learningRate: doc.learning_rate ?? 1e-3,
    valFraction: doc.val_fraction ?? 0.0,
    seed: doc.seed ?? 0,
    maxPairs: doc.max_pairs ?? undefined,
    targetDice: doc.target_dice ?? undefined,
    maxSeconds: doc.max_seconds ?? undefined,
  };
  if (!config.pairsDir) throw new Error('train config needs pairs_dir');
  if (config.levels < 2) throw new Error('levels must be >= 2');
  if (config.baseFilters < 8) throw new Error('base filters must be >= 8');
  const base = path.dirname(path.resolve(file));
  if (!path.isAbsolute(config.pairsDir)) config.pairsDir = path.join(base, config.pairsDir);
  if (!path.isAbsolute(config.outDir)) config.outDir = path.join(base, config.outDir);
  return config;
}

/** Argmax segmentation (label ids) for one pair index. */
export function predictLabels(model: tf.LayersModel, ds: Dataset, idx: number, scale: number): Int32Array {
  return tf.tidy(() => {
    const x = imagesTensor(ds, [idx], scale);
    const p = model.predict(x) as tf.Tensor;
    const arg = tf.argMax(p, -1);
    const flat = arg.dataSync() as Int32Array;
    const out = new Int32Array(flat.length);
    for (let i = 0; i < flat.length; i++) out[i] = ds.labels[flat[i]];
    return out;
  });
}

function evalDice(model: tf.LayersModel, ds: Dataset, indices: number[], scale: number): number {
  let total = 0;
  for (const idx of indices) {
    const pred = predictLabels(model, ds, idx, scale);
    total += meanDice(hardDicePerLabel(pred, ds.pairs[idx].labels, ds.labels));
  }
  return total / indices.length;
}

export interface TrainResult {
  epochs: Array<{ epoch: number; loss: number; trainDice?: number; valDice?: number; seconds: number }>;
  finalDice: number;
  checkpointDir: string;
}

export async function train(config: TrainConfig): Promise<TrainResult> {
  await tf.ready();
  const ds = loadPairs(config.pairsDir, config.maxPairs);
  const stride = 2 ** (config.levels - 1);
  for (const n of ds.dims) {
    if (n % stride !== 0) {
      throw new Error(`volume size ${ds.dims} incompatible with ${config.levels} levels`);
    }
  }
  const scale = intensityScale(ds);
  const order = shuffled(ds.pairs.length, config.seed);
  const nVal = Math.floor(ds.pairs.length * config.valFraction);
  const valIdx = order.slice(0, nVal);
  const trainIdx = order.slice(nVal);
  console.log(
    `training on ${trainIdx.length} pairs (${nVal} held out), dims ${ds.dims}, ` +
      `labels [${ds.labels}], levels=${config.levels} filters=${config.baseFilters}`,
  );

  const model = buildUnet({
    inputSize: ds.dims,
    inChannels: ds.channels,
    nClasses: ds.labels.length,
    levels: config.levels,
    baseFilters: config.baseFilters,
    seed: config.seed,
  });
  const optimizer = tf.train.adam(config.learningRate);

  const t0 = Date.now();
  const result: TrainResult = { epochs: [], finalDice: 0, checkpointDir: config.outDir };
  let stop = false;
  for (let epoch = 0; epoch < config.epochs && !stop; epoch++) {
    const epochOrder = shuffled(trainIdx.length, config.seed + 1 + epoch).map((i) => trainIdx[i]);
    let lossSum = 0;
    let nBatches = 0;
    for (let start = 0; start < epochOrder.length; start += config.batchSize) {
      const batch = epochOrder.slice(start, start + config.batchSize);
      const xs = imagesTensor(ds, batch, scale);
      const ys = targetsTensor(ds, batch);
      const lossT = optimizer.minimize(
        () => softDiceLoss(model.apply(xs, { training: true }) as tf.Tensor, ys) as tf.Scalar,
        true,
      ) as tf.Scalar;
      lossSum += lossT.dataSync()[0];
      nBatches++;
      tf.dispose([xs, ys, lossT]);
      if (config.maxSeconds && (Date.now() - t0) / 1000 > config.maxSeconds) {
        stop = true;
        break;
      }
    }
    const entry: TrainResult['epochs'][number] = {
      epoch,
      loss: lossSum / Math.max(nBatches, 1),
      seconds: (Date.now() - t0) / 1000,
    };
    const probeIdx = valIdx.length ? valIdx : trainIdx.slice(0, Math.min(5, trainIdx.length));
    const dice = evalDice(model, ds, probeIdx, scale);
    if (valIdx.length) entry.valDice = dice;
    else entry.trainDice = dice;
    result.epochs.push(entry);
    result.finalDice = dice;
    console.log(
      `epoch ${epoch}: loss ${entry.loss.toFixed(4)} ` +
        `${valIdx.length ? 'val' : 'train'} dice ${dice.toFixed(4)} (${entry.seconds.toFixed(0)}s)`,
    );
    if (config.targetDice && dice >= config.targetDice) {
      console.log(`target dice ${config.targetDice} reached, stopping early`);
      break;
    }
  }

  await saveModel(config.outDir, model, {
    labels: ds.labels,
    inputSize: ds.dims,
    inChannels: ds.channels,
    levels: config.levels,
    baseFilters: config.baseFilters,
  });
  fs.writeFileSync(path.join(config.outDir, 'metrics.json'), JSON.stringify(result.epochs, null, 1));
  console.log(`checkpoint written to ${config.outDir}`);
  return result;
}

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  const at = args.indexOf('--config');
  if (at < 0 || at + 1 >= args.length) {
    console.error('usage: train --config train.json');
    return 2;
  }
  try {
    await train(parseTrainConfig(args[at + 1]));
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  main().then((code) => process.exit(code));
}
