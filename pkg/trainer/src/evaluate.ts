/**
 * Evaluate a trained checkpoint on a directory of (image, labels) pairs:
 * argmax segmentation against the reference labels, per-label and mean
 * hard Dice written as JSON.
 *
 *   node dist/evaluate.js --ckpt CKPT_DIR --pairs PAIR_DIR --out metrics.json
 */

import * as fs from 'fs';
import * as tf from '@tensorflow/tfjs';

import { intensityScale, loadPairs } from './data';
import { hardDicePerLabel, meanDice } from './metrics';
import { loadModel } from './modelio';
import { predictLabels } from './train';

export interface EvalReport {
  perLabel: Record<number, number>;
  mean: number;
  perPair: Array<{ index: number; mean: number }>;
  nPairs: number;
}

export async function evaluate(ckptDir: string, pairsDir: string): Promise<EvalReport> {
  await tf.ready();
  const { model, meta } = await loadModel(ckptDir);
  const ds = loadPairs(pairsDir);
  const extra = ds.labels.filter((l) => !meta.labels.includes(l));
  if (extra.length) {
    throw new Error(`pairs contain labels [${extra}] unknown to the checkpoint [${meta.labels}]`);
  }
  const scale = intensityScale(ds);
  const sums: Record<number, number> = Object.fromEntries(meta.labels.map((l) => [l, 0]));
  const perPair: EvalReport['perPair'] = [];
  for (let i = 0; i < ds.pairs.length; i++) {
    const evalDs = { ...ds, labels: meta.labels };
    const pred = predictLabels(model, evalDs, i, scale);
    const table = hardDicePerLabel(pred, ds.pairs[i].labels, meta.labels);
    for (const l of meta.labels) sums[l] += table[l];
    perPair.push({ index: i, mean: meanDice(table) });
  }
  const perLabel: Record<number, number> = {};
  for (const l of meta.labels) perLabel[l] = sums[l] / ds.pairs.length;
  return {
    perLabel,
    mean: meanDice(perLabel),
    perPair,
    nPairs: ds.pairs.length,
  };
}

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  const get = (flag: string) => {
    const at = args.indexOf(flag);
    return at >= 0 && at + 1 < args.length ? args[at + 1] : null;
  };
  const ckpt = get('--ckpt');
  const pairs = get('--pairs');
  const out = get('--out');
  if (!ckpt || !pairs || !out) {
    console.error('usage: evaluate --ckpt DIR --pairs DIR --out metrics.json');
    return 2;
  }
  try {
    const report = await evaluate(ckpt, pairs);
    fs.writeFileSync(out, JSON.stringify(report, null, 1));
    console.log('per-label Dice:');
    for (const [label, dice] of Object.entries(report.perLabel)) {
      console.log(`  label ${label}: ${(dice as number).toFixed(4)}`);
    }
    console.log(`mean Dice over ${report.nPairs} pairs: ${report.mean.toFixed(4)}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  main().then((code) => process.exit(code));
}
