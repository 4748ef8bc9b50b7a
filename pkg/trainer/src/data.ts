/**
 * Pair loading: reads image/labels volumes written by the generator
 * (via its manifest.json when present, else by filename pattern),
 * holds them as flat Float32/Uint8 arrays, and serves shuffled batches.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

import { readVolume, Volume } from './nifti';

export interface Pair {
  image: Volume;
  labels: Uint8Array;
}

export interface Dataset {
  pairs: Pair[];
  dims: [number, number, number];
  channels: number;
  labels: number[];
}

function volumeToLabels(vol: Volume): Uint8Array {
  const out = new Uint8Array(vol.data.length / vol.channels);
  for (let i = 0; i < out.length; i++) {
    out[i] = vol.data[i * vol.channels];
  }
  return out;
}

export function listPairFiles(dir: string): Array<{ image: string; labels: string }> {
  const manifestPath = path.join(dir, 'manifest.json');
  if (fs.existsSync(manifestPath)) {
    const manifest = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
    return manifest.entries.map((e: { image: string; labels: string }) => ({
      image: path.join(dir, e.image),
      labels: path.join(dir, e.labels),
    }));
  }
  const files = fs.readdirSync(dir).filter((f) => /^image_\d+\.(nii|raw)$/.test(f)).sort();
  return files.map((f) => ({
    image: path.join(dir, f),
    labels: path.join(dir, f.replace('image_', 'labels_')),
  }));
}

export function loadPairs(dir: string, limit?: number): Dataset {
  const files = listPairFiles(dir);
  if (files.length === 0) {
    throw new Error(`no image/labels pairs found in ${dir}`);
  }
  const chosen = limit ? files.slice(0, limit) : files;
  const pairs: Pair[] = [];
  const labelIds = new Set<number>();
  let dims: [number, number, number] | null = null;
  let channels = 0;
  for (const f of chosen) {
    const image = readVolume(f.image);
    const seg = readVolume(f.labels);
    if (!dims) {
      dims = image.dims;
      channels = image.channels;
    } else if (
      dims[0] !== image.dims[0] || dims[1] !== image.dims[1] || dims[2] !== image.dims[2] ||
      channels !== image.channels
    ) {
      throw new Error(`volume shapes differ across pairs: ${f.image}`);
    }
    if (seg.dims[0] !== dims[0] || seg.dims[1] !== dims[1] || seg.dims[2] !== dims[2]) {
      throw new Error(`labels/image shape mismatch: ${f.labels}`);
    }
    const labels = volumeToLabels(seg);
    labels.forEach((v) => labelIds.add(v));
    pairs.push({ image, labels });
  }
  return { pairs, dims: dims!, channels, labels: [...labelIds].sort((a, b) => a - b) };
}

/** (n, D, H, W, C) image tensor for a batch of pairs. */
export function imagesTensor(ds: Dataset, indices: number[], normalize: number): tf.Tensor {
  const [nx, ny, nz] = ds.dims;
  const n = indices.length;
  const buf = new Float32Array(n * nx * ny * nz * ds.channels);
  indices.forEach((idx, b) => {
    buf.set(ds.pairs[idx].image.data, b * ds.pairs[idx].image.data.length);
  });
  if (normalize !== 1) {
    for (let i = 0; i < buf.length; i++) buf[i] /= normalize;
  }
  return tf.tensor5d(buf, [n, nx, ny, nz, ds.channels]);
}

/** (n, D, H, W, K) one-hot target tensor. */
export function targetsTensor(ds: Dataset, indices: number[]): tf.Tensor {
  const [nx, ny, nz] = ds.dims;
  const k = ds.labels.length;
  const lut = new Int32Array(Math.max(...ds.labels) + 1);
  ds.labels.forEach((lab, i) => (lut[lab] = i));
  const n = indices.length;
  const buf = new Float32Array(n * nx * ny * nz * k);
  indices.forEach((idx, b) => {
    const labels = ds.pairs[idx].labels;
    const base = b * labels.length * k;
    for (let i = 0; i < labels.length; i++) {
      buf[base + i * k + lut[labels[i]]] = 1;
    }
  });
  return tf.tensor5d(buf, [n, nx, ny, nz, k]);
}

/** Robust scale for input normalization: the 99th percentile over a sample. */
export function intensityScale(ds: Dataset): number {
  const sample = ds.pairs[0].image.data;
  const sorted = Float32Array.from(sample).sort();
  const p99 = sorted[Math.min(sorted.length - 1, Math.floor(0.99 * sorted.length))];
  return p99 > 0 ? p99 : 1;
}

/** Deterministic shuffle (mulberry32). */
export function shuffled(n: number, seed: number): number[] {
  let state = seed >>> 0;
  const rand = () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const order = [...Array(n).keys()];
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}
