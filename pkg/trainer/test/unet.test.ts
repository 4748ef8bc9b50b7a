import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { describe, expect, it } from 'vitest';

import { loadModel, saveModel } from '../src/modelio';
import { buildUnet, nearestUpsample3d } from '../src/unet';

describe('nearest upsampling', () => {
  it('repeats each voxel into a 2x2x2 block', () => {
    const x = tf.range(0, 8).reshape([1, 2, 2, 2, 1]);
    const up = nearestUpsample3d(x);
    expect(up.shape).toEqual([1, 4, 4, 4, 1]);
    const a = up.arraySync() as number[][][][][];
    for (let d = 0; d < 4; d++) {
      for (let h = 0; h < 4; h++) {
        for (let w = 0; w < 4; w++) {
          const src = ((d >> 1) * 2 + (h >> 1)) * 2 + (w >> 1);
          expect(a[0][d][h][w][0]).toBe(src);
        }
      }
    }
  });

  it('gradients flow through it', () => {
    const g = tf.grad((x: tf.Tensor) => tf.sum(nearestUpsample3d(x)))(tf.ones([1, 2, 2, 2, 1]));
    // each input voxel feeds 8 output voxels
    expect(Array.from(g.dataSync())).toEqual([8, 8, 8, 8, 8, 8, 8, 8]);
  });
});

describe('u-net construction', () => {
  it('produces softmax maps of the input size', () => {
    const model = buildUnet({ inputSize: [16, 16, 16], inChannels: 1, nClasses: 4, levels: 2, baseFilters: 8 });
    const out = model.predict(tf.zeros([1, 16, 16, 16, 1])) as tf.Tensor;
    expect(out.shape).toEqual([1, 16, 16, 16, 4]);
    const sums = tf.sum(out, -1).dataSync();
    for (const s of sums) expect(s).toBeCloseTo(1, 5);
  });

  it('doubles filters per level and halves on the way up', () => {
    const model = buildUnet({ inputSize: [16, 16, 16], inChannels: 1, nClasses: 2, levels: 3, baseFilters: 8 });
    const filters = model.layers
      .filter((l) => l.getClassName() === 'Conv3D')
      .map((l) => (l.getConfig() as { filters: number }).filters);
    expect(filters).toEqual([8, 8, 16, 16, 32, 32, 16, 16, 8, 8, 2]);
  });

  it('rejects sizes not divisible by the pooling stride', () => {
    expect(() =>
      buildUnet({ inputSize: [18, 18, 18], inChannels: 1, nClasses: 2, levels: 3, baseFilters: 8 }),
    ).toThrow(/divisible/);
  });

  it('rejects too-small capacity settings', () => {
    expect(() =>
      buildUnet({ inputSize: [16, 16, 16], inChannels: 1, nClasses: 2, levels: 1, baseFilters: 8 }),
    ).toThrow(/levels/);
    expect(() =>
      buildUnet({ inputSize: [16, 16, 16], inChannels: 1, nClasses: 2, levels: 2, baseFilters: 4 }),
    ).toThrow(/filters/);
  });

  it('same seed gives identical weights, different seeds differ', () => {
    const spec = { inputSize: [8, 8, 8] as [number, number, number], inChannels: 1, nClasses: 2, levels: 2, baseFilters: 8 };
    const a = buildUnet({ ...spec, seed: 5 });
    const b = buildUnet({ ...spec, seed: 5 });
    const c = buildUnet({ ...spec, seed: 6 });
    const wa = a.getWeights()[0].dataSync();
    const wb = b.getWeights()[0].dataSync();
    const wc = c.getWeights()[0].dataSync();
    expect(Array.from(wa)).toEqual(Array.from(wb));
    expect(Array.from(wa)).not.toEqual(Array.from(wc));
  });
});

describe('checkpoint io', () => {
  it('save/load round trip preserves predictions', async () => {
    const model = buildUnet({ inputSize: [8, 8, 8], inChannels: 1, nClasses: 3, levels: 2, baseFilters: 8, seed: 1 });
    const x = tf.randomNormal([1, 8, 8, 8, 1], 0, 1, 'float32', 7);
    const before = (model.predict(x) as tf.Tensor).dataSync();
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'ckpt-'));
    await saveModel(dir, model, {
      labels: [0, 1, 2],
      inputSize: [8, 8, 8],
      inChannels: 1,
      levels: 2,
      baseFilters: 8,
    });
    const { model: loaded, meta } = await loadModel(dir);
    expect(meta.labels).toEqual([0, 1, 2]);
    const after = (loaded.predict(x) as tf.Tensor).dataSync();
    let maxDiff = 0;
    for (let i = 0; i < before.length; i++) maxDiff = Math.max(maxDiff, Math.abs(before[i] - after[i]));
    expect(maxDiff).toBe(0);
  });
});
