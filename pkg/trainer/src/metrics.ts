/**
 * Soft Dice loss (differentiable, on probability maps) and hard per-label
 * Dice (on discrete segmentations).
 */

import * as tf from '@tensorflow/tfjs';

export const DICE_EPS = 1e-6;

/** Mean soft Dice over channels for (B, D, H, W, K) probabilities vs one-hot targets. */
export function softDice(pred: tf.Tensor, target: tf.Tensor, eps: number = DICE_EPS): tf.Tensor {
  return tf.tidy(() => {
    const axes = [1, 2, 3];
    const inter = tf.sum(tf.mul(pred, target), axes);
    const denom = tf.add(tf.sum(pred, axes), tf.sum(target, axes));
    const dice = tf.div(tf.add(tf.mul(inter, 2), eps), tf.add(denom, eps));
    return tf.mean(dice);
  });
}

/** Training loss: 1 - mean soft Dice. */
export function softDiceLoss(pred: tf.Tensor, target: tf.Tensor): tf.Tensor {
  return tf.tidy(() => tf.sub(1, softDice(pred, target)));
}

/** Hard Dice per label id between two integer segmentations. */
export function hardDicePerLabel(
  pred: Int32Array | Uint8Array,
  truth: Int32Array | Uint8Array,
  labels: number[],
): Record<number, number> {
  if (pred.length !== truth.length) {
    throw new Error(`segmentation sizes differ: ${pred.length} vs ${truth.length}`);
  }
  const out: Record<number, number> = {};
  for (const lab of labels) {
    let inter = 0;
    let nPred = 0;
    let nTruth = 0;
    for (let i = 0; i < pred.length; i++) {
      const p = pred[i] === lab;
      const t = truth[i] === lab;
      if (p) nPred++;
      if (t) nTruth++;
      if (p && t) inter++;
    }
    out[lab] = (2 * inter + DICE_EPS) / (nPred + nTruth + DICE_EPS);
  }
  return out;
}

export function meanDice(table: Record<number, number>, labels?: number[]): number {
  const keys = labels ?? Object.keys(table).map(Number);
  return keys.reduce((acc, k) => acc + table[k], 0) / keys.length;
}
