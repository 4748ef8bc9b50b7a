import * as fs from 'fs';
import * as path from 'path';
import { describe, expect, it } from 'vitest';

import { listPairFiles, loadPairs } from '../src/data';
import { readVolume } from '../src/nifti';

const fixtures = path.resolve(__dirname, '..', 'fixtures');
const crossCheck = () => JSON.parse(fs.readFileSync(path.join(fixtures, 'cross_check.json'), 'utf-8'));

describe('nifti reader', () => {
  it('reads dims, spacing and channels of a generated image', () => {
    const doc = crossCheck();
    const vol = readVolume(doc.image.file);
    expect(vol.dims).toEqual([32, 32, 32]);
    expect(vol.channels).toBe(1);
    expect(vol.spacing[0]).toBeCloseTo(doc.image.spacing[0], 6);
  });

  it('matches voxel values read back by the generator itself', () => {
    const doc = crossCheck();
    const vol = readVolume(doc.image.file);
    const [, ny, nz] = vol.dims;
    for (const [x, y, z, value] of doc.image.samples) {
      const got = vol.data[(x * ny + y) * nz + z];
      expect(got).toBeCloseTo(value, 5);
    }
  });

  it('reads integer label volumes exactly', () => {
    const doc = crossCheck();
    const vol = readVolume(doc.labels.file);
    const [, ny, nz] = vol.dims;
    for (const [x, y, z, value] of doc.labels.samples) {
      expect(vol.data[(x * ny + y) * nz + z]).toBe(value);
    }
  });

  it('raw fallback pair decodes to the same data as the nii of the same seed', () => {
    const nii = readVolume(path.join(fixtures, 'train', 'image_000000.nii'));
    const raw = readVolume(path.join(fixtures, 'raw_pair', 'image_000000.raw'));
    expect(raw.dims).toEqual(nii.dims);
    let maxDiff = 0;
    for (let i = 0; i < raw.data.length; i++) {
      maxDiff = Math.max(maxDiff, Math.abs(raw.data[i] - nii.data[i]));
    }
    expect(maxDiff).toBe(0);
  });

  it('rejects junk files', () => {
    const junk = path.join(fixtures, 'junk.nii');
    fs.writeFileSync(junk, Buffer.alloc(400));
    expect(() => readVolume(junk)).toThrow(/NIfTI/);
  });
});

describe('pair listing', () => {
  it('uses the manifest ordering', () => {
    const files = listPairFiles(path.join(fixtures, 'train'));
    expect(files.length).toBeGreaterThanOrEqual(12);
    expect(files[0].image.endsWith('image_000000.nii')).toBe(true);
    expect(files[0].labels.endsWith('labels_000000.nii')).toBe(true);
  });

  it('loads a dataset with consistent shapes and labels', () => {
    const ds = loadPairs(path.join(fixtures, 'train'), 4);
    expect(ds.pairs.length).toBe(4);
    expect(ds.dims).toEqual([32, 32, 32]);
    expect(ds.labels).toEqual([0, 1, 2, 3]);
  });
});
