/**
 * Binary netpbm (PGM/PPM) reading and writing.
 *
 * This is the image format of the classify wire protocol: `P5` carries one
 * grayscale channel, `P6` carries interleaved RGB, and the payload is
 * row-major uint8 samples. Serialization always emits the canonical header
 * `P5\n{width} {height}\n255\n`; parsing accepts any whitespace between
 * header tokens plus `#` comments running to end of line.
 */

export interface RawImage {
  width: number;
  height: number;
  channels: 1 | 3;
  /** Row-major samples with channels interleaved, length w * h * c. */
  pixels: Uint8Array;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0b, 0x0c, 0x0d]);
const HASH = 0x23;

class TokenReader {
  private pos = 0;

  constructor(private readonly data: Uint8Array) {}

  private skipFiller(): void {
    while (this.pos < this.data.length) {
      const byte = this.data[this.pos];
      if (WHITESPACE.has(byte)) {
        this.pos += 1;
      } else if (byte === HASH) {
        while (this.pos < this.data.length && this.data[this.pos] !== 0x0a) {
          this.pos += 1;
        }
      } else {
        return;
      }
    }
  }

  /** Next whitespace-delimited header token. */
  token(): string {
    this.skipFiller();
    const start = this.pos;
    while (this.pos < this.data.length && !WHITESPACE.has(this.data[this.pos])) {
      if (this.data[this.pos] === HASH) break;
      this.pos += 1;
    }
    if (this.pos === start) {
      throw new Error('netpbm header ended early');
    }
    return Buffer.from(this.data.subarray(start, this.pos)).toString('ascii');
  }

  /** Positive decimal header field. */
  integer(name: string): number {
    const text = this.token();
    if (!/^[0-9]+$/.test(text)) {
      throw new Error(`netpbm ${name} is not a number: ${JSON.stringify(text)}`);
    }
    return parseInt(text, 10);
  }

  /** Pixel payload: one whitespace byte after the maxval, then raw samples. */
  payload(expected: number): Uint8Array {
    if (this.pos >= this.data.length || !WHITESPACE.has(this.data[this.pos])) {
      throw new Error('netpbm header must end with a whitespace byte');
    }
    this.pos += 1;
    const rest = this.data.subarray(this.pos);
    if (rest.length < expected) {
      throw new Error(`netpbm pixel data truncated: ${rest.length} of ${expected} bytes`);
    }
    if (rest.length > expected) {
      throw new Error(`netpbm has ${rest.length - expected} trailing bytes`);
    }
    return rest;
  }
}

/** Decode P5/P6 bytes into a RawImage; throws Error with a reason if invalid. */
export function parseNetpbm(data: Uint8Array): RawImage {
  if (data.length < 2) {
    throw new Error('netpbm data too short for a magic number');
  }
  const magic = Buffer.from(data.subarray(0, 2)).toString('ascii');
  if (magic !== 'P5' && magic !== 'P6') {
    throw new Error(`unsupported netpbm magic ${JSON.stringify(magic)}`);
  }
  const channels = magic === 'P5' ? 1 : 3;
  const reader = new TokenReader(data.subarray(2));
  const width = reader.integer('width');
  const height = reader.integer('height');
  const maxval = reader.integer('maxval');
  if (width < 1 || height < 1) {
    throw new Error(`netpbm dimensions must be positive, got ${width}x${height}`);
  }
  if (maxval !== 255) {
    throw new Error(`netpbm maxval must be 255, got ${maxval}`);
  }
  const pixels = reader.payload(width * height * channels);
  return { width, height, channels, pixels };
}

/** Encode a RawImage as canonical P5 (1 channel) or P6 (3 channels) bytes. */
export function serializeNetpbm(image: RawImage): Buffer {
  const { width, height, channels, pixels } = image;
  if (channels !== 1 && channels !== 3) {
    throw new Error(`netpbm supports 1 or 3 channels, got ${channels}`);
  }
  if (pixels.length !== width * height * channels) {
    throw new Error(
      `pixel buffer has ${pixels.length} bytes, expected ${width * height * channels}`,
    );
  }
  const magic = channels === 1 ? 'P5' : 'P6';
  const header = Buffer.from(`${magic}\n${width} ${height}\n255\n`, 'ascii');
  return Buffer.concat([header, Buffer.from(pixels)]);
}
