/**
 * Reduced 3D U-net: `levels` encoder stages of two 3x3x3 ELU convolutions,
 * max pooling between stages, nearest-neighbor upsampling with skip
 * concatenation on the way back, and a softmax output layer.
 *
 * Upsampling is a custom layer built from rank-4 reshape/tile because the
 * pure-JS runtime registers no gradient for transposed 3D convolution.
 */

import * as tf from '@tensorflow/tfjs';

function upsampleAxis(x: tf.Tensor, axis: number): tf.Tensor {
  const s = x.shape;
  const lead = s.slice(0, axis).reduce((a, b) => a * b, 1);
  const size = s[axis];
  const rest = s.slice(axis + 1).reduce((a, b) => a * b, 1);
  const out = s.slice();
  out[axis] = 2 * size;
  return x.reshape([lead, size, 1, rest]).tile([1, 1, 2, 1]).reshape(out);
}

/** Double every spatial axis of a (B, D, H, W, C) tensor (nearest neighbor). */
export function nearestUpsample3d(x: tf.Tensor): tf.Tensor {
  return tf.tidy(() => upsampleAxis(upsampleAxis(upsampleAxis(x, 1), 2), 3));
}

export class NearestUpsample3D extends tf.layers.Layer {
  static className = 'NearestUpsample3D';

  computeOutputShape(inputShape: tf.Shape): tf.Shape {
    const [b, d, h, w, c] = inputShape as number[];
    return [b, d === null ? null : 2 * d, h === null ? null : 2 * h, w === null ? null : 2 * w, c];
  }

  call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    return nearestUpsample3d(Array.isArray(inputs) ? inputs[0] : inputs);
  }
}
tf.serialization.registerClass(NearestUpsample3D);

export interface UnetSpec {
  inputSize: [number, number, number];
  inChannels: number;
  nClasses: number;
  levels: number;
  baseFilters: number;
  seed?: number;
}

export function buildUnet(spec: UnetSpec): tf.LayersModel {
  const { levels, baseFilters } = spec;
  if (levels < 2) throw new Error(`levels must be >= 2, got ${levels}`);
  if (baseFilters < 8) throw new Error(`base filters must be >= 8, got ${baseFilters}`);
  const size = spec.inputSize;
  const stride = 2 ** (levels - 1);
  for (const n of size) {
    if (n % stride !== 0) {
      throw new Error(`input size ${size} not divisible by ${stride} (levels=${levels})`);
    }
  }
  let seedCounter = spec.seed ?? 0;
  const conv = (filters: number, kernel: number, activation: 'elu' | 'softmax') =>
    tf.layers.conv3d({
      filters,
      kernelSize: kernel,
      padding: 'same',
      activation,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seedCounter++ }),
    });

  const input = tf.input({ shape: [...size, spec.inChannels] });
  let x: tf.SymbolicTensor = input;
  const skips: tf.SymbolicTensor[] = [];
  for (let level = 0; level < levels; level++) {
    const filters = baseFilters * 2 ** level;
    x = conv(filters, 3, 'elu').apply(x) as tf.SymbolicTensor;
    x = conv(filters, 3, 'elu').apply(x) as tf.SymbolicTensor;
    if (level < levels - 1) {
      skips.push(x);
      x = tf.layers.maxPooling3d({ poolSize: 2 }).apply(x) as tf.SymbolicTensor;
    }
  }
  for (let level = levels - 2; level >= 0; level--) {
    const filters = baseFilters * 2 ** level;
    x = new NearestUpsample3D({}).apply(x) as tf.SymbolicTensor;
    x = tf.layers.concatenate().apply([x, skips[level]]) as tf.SymbolicTensor;
    x = conv(filters, 3, 'elu').apply(x) as tf.SymbolicTensor;
    x = conv(filters, 3, 'elu').apply(x) as tf.SymbolicTensor;
  }
  const output = conv(spec.nClasses, 1, 'softmax').apply(x) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: output });
}
