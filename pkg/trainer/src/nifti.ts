/**
 * Reader for the volume formats the generator writes: uncompressed
 * NIfTI-1 (.nii, little or big endian, datatypes uint8/uint16/int32/float32)
 * and the raw little-endian array + JSON sidecar fallback.
 */

import * as fs from 'fs';
import * as path from 'path';

export interface Volume {
  dims: [number, number, number];
  spacing: [number, number, number];
  channels: number;
  /** channel-last C-order: value(x,y,z,c) = data[((x*ny + y)*nz + z)*channels + c] */
  data: Float32Array;
}

const HEADER_SIZE = 348;
const DTYPES: Record<number, { bytes: number; read: (dv: DataView, off: number, le: boolean) => number }> = {
  2: { bytes: 1, read: (dv, off) => dv.getUint8(off) },
  8: { bytes: 4, read: (dv, off, le) => dv.getInt32(off, le) },
  16: { bytes: 4, read: (dv, off, le) => dv.getFloat32(off, le) },
  512: { bytes: 2, read: (dv, off, le) => dv.getUint16(off, le) },
};

/**
 * Parse a .nii buffer into channel-last voxel data indexed as
 * value(x, y, z, c) = data[((x * ny + y) * nz + z) * channels + c],
 * matching the C-order layout the Python side uses.
 */
export function parseNifti(buffer: Buffer): Volume {
  if (buffer.length < HEADER_SIZE) {
    throw new Error('file shorter than a NIfTI-1 header');
  }
  const dv = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength);
  let le = true;
  if (dv.getInt32(0, true) !== HEADER_SIZE) {
    if (dv.getInt32(0, false) === HEADER_SIZE) {
      le = false;
    } else {
      throw new Error('not a NIfTI-1 file');
    }
  }
  const magic = buffer.toString('ascii', 344, 347);
  if (magic !== 'n+1') {
    throw new Error(`unsupported NIfTI magic '${magic}'`);
  }
  const ndim = dv.getInt16(40, le);
  if (ndim !== 3 && ndim !== 4) {
    throw new Error(`unsupported dimensionality ${ndim}`);
  }
  const nx = dv.getInt16(42, le);
  const ny = dv.getInt16(44, le);
  const nz = dv.getInt16(46, le);
  const channels = ndim === 4 ? dv.getInt16(48, le) : 1;
  const datatype = dv.getInt16(70, le);
  const spec = DTYPES[datatype];
  if (!spec) {
    throw new Error(`unsupported NIfTI datatype code ${datatype}`);
  }
  const spacing: [number, number, number] = [
    Math.abs(dv.getFloat32(80, le)),
    Math.abs(dv.getFloat32(84, le)),
    Math.abs(dv.getFloat32(88, le)),
  ];
  const voxOffset = dv.getFloat32(108, le);
  const sclSlope = dv.getFloat32(112, le);
  const sclInter = dv.getFloat32(116, le);

  const nvox = nx * ny * nz;
  const out = new Float32Array(nvox * channels);
  let off = voxOffset;
  // file order is Fortran (x fastest, channel slowest)
  for (let c = 0; c < channels; c++) {
    for (let z = 0; z < nz; z++) {
      for (let y = 0; y < ny; y++) {
        for (let x = 0; x < nx; x++) {
          let v = spec.read(dv, off, le);
          if (sclSlope !== 0 && sclSlope !== 1) v = v * sclSlope + sclInter;
          out[((x * ny + y) * nz + z) * channels + c] = v;
          off += spec.bytes;
        }
      }
    }
  }
  return { dims: [nx, ny, nz], spacing, channels, data: out };
}

/** Raw+JSON fallback pair: base.raw with sidecar base.json. */
export function parseRawPair(rawPath: string): Volume {
  const base = rawPath.replace(/\.(raw|json)$/, '');
  const header = JSON.parse(fs.readFileSync(`${base}.json`, 'utf-8'));
  const dims = header.dims as [number, number, number];
  const channels = header.channels ?? 1;
  const bytes = fs.readFileSync(`${base}.raw`);
  const n = dims[0] * dims[1] * dims[2] * channels;
  let data: Float32Array;
  switch (header.dtype) {
    case 'float32':
      data = new Float32Array(bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + 4 * n));
      break;
    case 'uint16':
      data = Float32Array.from(new Uint16Array(bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + 2 * n)));
      break;
    case 'uint8':
      data = Float32Array.from(new Uint8Array(bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + n)));
      break;
    case 'int32':
      data = Float32Array.from(new Int32Array(bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + 4 * n)));
      break;
    default:
      throw new Error(`unsupported raw dtype ${header.dtype}`);
  }
  // raw files are C-order [x][y][z][c] already
  return { dims, spacing: header.spacing, channels, data };
}

export function readVolume(file: string): Volume {
  if (file.endsWith('.raw') || file.endsWith('.json')) {
    return parseRawPair(file);
  }
  return parseNifti(fs.readFileSync(path.resolve(file)));
}
