/**
 * Seeded synthetic image world used to train and exercise the classifier.
 *
 * All classes share one smooth background; each class owns a pair of
 * zero-mean Gaussian spots confined to two distinct block-aligned cells,
 * with the spot energy split unevenly between the cells and the spot sign
 * alternating from class to class. Because the spots carry no brightness,
 * class identity lives entirely in local texture, which keeps single-cell
 * edits meaningful to a classifier trained on this world.
 */

export const BLOCK = 4;

export interface DatasetMeta {
  classes: number;
  height: number;
  width: number;
  channels: number;
}

export interface Dataset extends DatasetMeta {
  /** Row-major uint8 pixels, one buffer per image, channels interleaved. */
  images: Uint8Array[];
  labels: number[];
}

/** Deterministic PRNG (sfc32 seeded via splitmix32) with sampling helpers. */
export class Rng {
  private a: number;
  private b: number;
  private c: number;
  private d: number;
  private spare: number | null = null;

  constructor(seed: number) {
    let h = seed >>> 0;
    const next = (): number => {
      h = (h + 0x9e3779b9) >>> 0;
      let z = h;
      z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
      z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
      return (z ^ (z >>> 15)) >>> 0;
    };
    this.a = next();
    this.b = next();
    this.c = next();
    this.d = next();
    for (let i = 0; i < 12; i += 1) this.uint32();
  }

  uint32(): number {
    const t = (((this.a + this.b) >>> 0) + this.d) >>> 0;
    this.d = (this.d + 1) >>> 0;
    this.a = this.b ^ (this.b >>> 9);
    this.b = (this.c + (this.c << 3)) >>> 0;
    this.c = (((this.c << 21) | (this.c >>> 11)) + t) >>> 0;
    return t;
  }

  uniform(lo = 0, hi = 1): number {
    return lo + (hi - lo) * (this.uint32() / 4294967296);
  }

  /** Standard normal via Box-Muller, caching the second draw. */
  normal(): number {
    if (this.spare !== null) {
      const value = this.spare;
      this.spare = null;
      return value;
    }
    let u = 0;
    do {
      u = this.uint32() / 4294967296;
    } while (u === 0);
    const v = this.uint32() / 4294967296;
    const r = Math.sqrt(-2 * Math.log(u));
    this.spare = r * Math.sin(2 * Math.PI * v);
    return r * Math.cos(2 * Math.PI * v);
  }

  /** In-place Fisher-Yates shuffle; returns the same array. */
  shuffle<T>(items: T[]): T[] {
    for (let i = items.length - 1; i > 0; i -= 1) {
      const j = Math.floor(this.uniform(0, i + 1));
      const tmp = items[i];
      items[i] = items[j];
      items[j] = tmp;
    }
    return items;
  }
}

/**
 * Smooth random field in [-1, 1]: coarse uniform noise on a grid of
 * `cell`-sized tiles, bilinearly interpolated back to pixel resolution.
 */
export function smoothField(
  rng: Rng,
  height: number,
  width: number,
  channels: number,
  cell = 8,
): Float64Array {
  const gridH = Math.ceil(height / cell) + 1;
  const gridW = Math.ceil(width / cell) + 1;
  const coarse = new Float64Array(gridH * gridW * channels);
  for (let i = 0; i < coarse.length; i += 1) {
    coarse[i] = rng.uniform(-1, 1);
  }
  const at = (gy: number, gx: number, ch: number): number =>
    coarse[(gy * gridW + gx) * channels + ch];
  const out = new Float64Array(height * width * channels);
  for (let y = 0; y < height; y += 1) {
    const fy = y / cell;
    const y0 = Math.min(Math.floor(fy), gridH - 2);
    const ty = fy - y0;
    for (let x = 0; x < width; x += 1) {
      const fx = x / cell;
      const x0 = Math.min(Math.floor(fx), gridW - 2);
      const tx = fx - x0;
      for (let ch = 0; ch < channels; ch += 1) {
        const top = at(y0, x0, ch) * (1 - tx) + at(y0, x0 + 1, ch) * tx;
        const bottom = at(y0 + 1, x0, ch) * (1 - tx) + at(y0 + 1, x0 + 1, ch) * tx;
        out[(y * width + x) * channels + ch] = top * (1 - ty) + ty * bottom;
      }
    }
  }
  return out;
}

export interface TemplateOptions {
  backgroundAmplitude?: number;
  featureAmplitude?: number;
  featureSigma?: number;
  lobeSplit?: number;
}

/**
 * One float64 template per class, pixel values centered around 128.
 *
 * Every pair of templates differs in exactly four block cells (two per
 * class) and sits at the same Euclidean distance from every other pair,
 * so no class is intrinsically easier to reach than another.
 */
export function classTemplates(
  classes: number,
  height: number,
  width: number,
  channels: number,
  seed: number,
  options: TemplateOptions = {},
): Float64Array[] {
  const {
    backgroundAmplitude = 25.0,
    featureAmplitude = 220.0,
    featureSigma = 1.3,
    lobeSplit = 0.75,
  } = options;
  const gridH = Math.floor(height / BLOCK);
  const gridW = Math.floor(width / BLOCK);
  if (2 * classes > gridH * gridW) {
    throw new Error(
      `${classes} classes need ${2 * classes} cells but the grid has ${gridH * gridW}`,
    );
  }
  const rng = new Rng(seed * 1000 + 71);

  const background = new Float64Array(height * width * channels);
  const field = smoothField(rng, height, width, channels);
  for (let i = 0; i < background.length; i += 1) {
    background[i] = 128 + backgroundAmplitude * field[i];
  }

  // Zero-mean Gaussian lobe on one block, unit energy across all channels.
  const lobe = new Float64Array(BLOCK * BLOCK);
  let mean = 0;
  for (let y = 0; y < BLOCK; y += 1) {
    for (let x = 0; x < BLOCK; x += 1) {
      const dy = y - (BLOCK - 1) / 2;
      const dx = x - (BLOCK - 1) / 2;
      const value = Math.exp(-(dy * dy + dx * dx) / (2 * featureSigma * featureSigma));
      lobe[y * BLOCK + x] = value;
      mean += value;
    }
  }
  mean /= BLOCK * BLOCK;
  let energy = 0;
  for (let i = 0; i < lobe.length; i += 1) {
    lobe[i] -= mean;
    energy += lobe[i] * lobe[i];
  }
  const norm = Math.sqrt(energy * channels);
  for (let i = 0; i < lobe.length; i += 1) {
    lobe[i] /= norm;
  }

  const cells = rng.shuffle(Array.from({ length: gridH * gridW }, (_, i) => i));
  const templates: Float64Array[] = [];
  for (let k = 0; k < classes; k += 1) {
    const template = Float64Array.from(background);
    const sign = k % 2 === 0 ? 1.0 : -1.0;
    const lobes: Array<[number, number]> = [
      [cells[2 * k], Math.sqrt(lobeSplit)],
      [cells[2 * k + 1], Math.sqrt(1 - lobeSplit)],
    ];
    for (const [cellIndex, share] of lobes) {
      const cellY = Math.floor(cellIndex / gridW) * BLOCK;
      const cellX = (cellIndex % gridW) * BLOCK;
      for (let y = 0; y < BLOCK; y += 1) {
        for (let x = 0; x < BLOCK; x += 1) {
          const bump = sign * featureAmplitude * share * lobe[y * BLOCK + x];
          for (let ch = 0; ch < channels; ch += 1) {
            template[((cellY + y) * width + (cellX + x)) * channels + ch] += bump;
          }
        }
      }
    }
    templates.push(template);
  }
  return templates;
}

/** Round half up and clamp to the uint8 range. */
export function quantizePixel(value: number): number {
  const rounded = Math.floor(value + 0.5);
  return rounded < 0 ? 0 : rounded > 255 ? 255 : rounded;
}

/**
 * Labeled uint8 images: template of class `i % classes` plus Gaussian
 * pixel noise, quantized. Same seed, same dataset.
 */
export function makeDataset(
  templates: Float64Array[],
  meta: DatasetMeta,
  count: number,
  seed: number,
  noise = 12.0,
): Dataset {
  const rng = new Rng(seed * 1000 + 72);
  const images: Uint8Array[] = [];
  const labels: number[] = [];
  for (let i = 0; i < count; i += 1) {
    const label = i % templates.length;
    const template = templates[label];
    const pixels = new Uint8Array(template.length);
    for (let j = 0; j < template.length; j += 1) {
      pixels[j] = quantizePixel(template[j] + noise * rng.normal());
    }
    images.push(pixels);
    labels.push(label);
  }
  return { ...meta, images, labels };
}
