import { describe, expect, it } from 'vitest';

import { Rng } from '../src/data';
import { RawImage, parseNetpbm, serializeNetpbm } from '../src/netpbm';

function randomImage(width: number, height: number, channels: 1 | 3, seed: number): RawImage {
  const rng = new Rng(seed);
  const pixels = new Uint8Array(width * height * channels);
  for (let i = 0; i < pixels.length; i += 1) {
    pixels[i] = Math.floor(rng.uniform(0, 256));
  }
  return { width, height, channels, pixels };
}

describe('serializeNetpbm', () => {
  it('writes the canonical P5 header', () => {
    const image = randomImage(4, 3, 1, 0);
    const data = serializeNetpbm(image);
    const header = 'P5\n4 3\n255\n';
    expect(data.subarray(0, header.length).toString('ascii')).toBe(header);
    expect(data.length).toBe(header.length + 12);
  });

  it('writes the canonical P6 header', () => {
    const image = randomImage(5, 2, 3, 1);
    const data = serializeNetpbm(image);
    const header = 'P6\n5 2\n255\n';
    expect(data.subarray(0, header.length).toString('ascii')).toBe(header);
    expect(data.length).toBe(header.length + 30);
  });

  it('rejects a pixel buffer of the wrong size', () => {
    const image = { width: 4, height: 4, channels: 1 as const, pixels: new Uint8Array(15) };
    expect(() => serializeNetpbm(image)).toThrow(/15 bytes/);
  });
});

describe('parseNetpbm', () => {
  it('round-trips grayscale and color images', () => {
    for (const channels of [1, 3] as const) {
      const image = randomImage(8, 6, channels, channels);
      const parsed = parseNetpbm(serializeNetpbm(image));
      expect(parsed.width).toBe(8);
      expect(parsed.height).toBe(6);
      expect(parsed.channels).toBe(channels);
      expect(Buffer.from(parsed.pixels).equals(Buffer.from(image.pixels))).toBe(true);
    }
  });

  it('accepts comments and mixed whitespace in the header', () => {
    const pixels = Buffer.from([1, 2, 3, 4, 5, 6]);
    const header = Buffer.from('P5 # magic\n# a comment line\n  3\t2 # dims\n\r\n255\n', 'ascii');
    const parsed = parseNetpbm(Buffer.concat([header, pixels]));
    expect(parsed.width).toBe(3);
    expect(parsed.height).toBe(2);
    expect(Buffer.from(parsed.pixels).equals(pixels)).toBe(true);
  });

  it('rejects an unsupported magic number', () => {
    expect(() => parseNetpbm(Buffer.from('P3\n2 2\n255\n', 'ascii'))).toThrow(/magic/);
  });

  it('rejects a maxval other than 255', () => {
    const data = Buffer.concat([
      Buffer.from('P5\n2 2\n127\n', 'ascii'),
      Buffer.alloc(4),
    ]);
    expect(() => parseNetpbm(data)).toThrow(/maxval/);
  });

  it('rejects truncated pixel data', () => {
    const data = Buffer.concat([Buffer.from('P5\n4 4\n255\n', 'ascii'), Buffer.alloc(10)]);
    expect(() => parseNetpbm(data)).toThrow(/truncated/);
  });

  it('rejects trailing bytes after the pixel data', () => {
    const data = Buffer.concat([Buffer.from('P5\n2 2\n255\n', 'ascii'), Buffer.alloc(5)]);
    expect(() => parseNetpbm(data)).toThrow(/trailing/);
  });

  it('rejects a header that ends early', () => {
    expect(() => parseNetpbm(Buffer.from('P6\n32 32\n', 'ascii'))).toThrow(/header/);
  });

  it('rejects non-numeric header fields', () => {
    expect(() => parseNetpbm(Buffer.from('P5\nwide 2\n255\n\0\0', 'ascii'))).toThrow(/width/);
  });
});
