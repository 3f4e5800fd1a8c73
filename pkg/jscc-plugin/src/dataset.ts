/**
 * Binary PPM (P6) reading plus a deterministic synthetic dataset generator,
 * so desk-scale training needs no external downloads.
 */
import * as fs from "node:fs";
import * as path from "node:path";

export interface Frame {
  width: number;
  height: number;
  pixels: Uint8Array; // row-major, channel-interleaved RGB
}

/** xorshift32; good enough for reproducible image synthesis. */
export function makeRng(seed: number): () => number {
  let s = seed >>> 0 || 0x9e3779b9;
  return () => {
    s ^= s << 13; s >>>= 0;
    s ^= s >> 17;
    s ^= s << 5; s >>>= 0;
    return s / 0xffffffff;
  };
}

export function syntheticFrame(seed: number, width: number, height: number): Frame {
  const rng = makeRng(seed * 2654435761 + 1);
  const pixels = new Uint8Array(width * height * 3);
  for (let c = 0; c < 3; c++) {
    const waves = Array.from({ length: 5 }, () => ({
      fx: 0.3 + rng() * 3.5,
      fy: 0.3 + rng() * 3.5,
      phase: rng() * 2 * Math.PI,
      amp: 12 + rng() * 35,
    }));
    const base = 100 + rng() * 56;
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let v = base;
        for (const w of waves) {
          v += w.amp * Math.cos(2 * Math.PI * (w.fx * x / width + w.fy * y / height) + w.phase) / 2;
        }
        v += (rng() - 0.5) * 10;
        pixels[(y * width + x) * 3 + c] = Math.max(0, Math.min(255, Math.round(v)));
      }
    }
  }
  return { width, height, pixels };
}

export function writePpm(frame: Frame, file: string): void {
  const header = Buffer.from(`P6\n${frame.width} ${frame.height}\n255\n`);
  fs.writeFileSync(file, Buffer.concat([header, Buffer.from(frame.pixels)]));
}

export function readPpm(file: string): Frame {
  const data = fs.readFileSync(file);
  if (data.subarray(0, 2).toString() !== "P6") throw new Error(`${file}: not a P6 PPM`);
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < data.length && /\s/.test(String.fromCharCode(data[pos]))) pos++;
    if (data[pos] === 0x23) { // '#' comment
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      continue;
    }
    let token = "";
    while (pos < data.length && !/\s/.test(String.fromCharCode(data[pos]))) {
      token += String.fromCharCode(data[pos]);
      pos++;
    }
    fields.push(parseInt(token, 10));
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`${file}: only maxval 255 supported`);
  const pixels = data.subarray(pos, pos + width * height * 3);
  if (pixels.length !== width * height * 3) throw new Error(`${file}: truncated`);
  return { width, height, pixels: new Uint8Array(pixels) };
}

export function loadDataset(dir: string): Frame[] {
  if (!fs.existsSync(dir)) throw new Error(`dataset missing: ${dir}`);
  const files = fs.readdirSync(dir).filter((f) => f.endsWith(".ppm")).sort();
  if (files.length === 0) throw new Error(`dataset missing: no .ppm files in ${dir}`);
  return files.map((f) => readPpm(path.join(dir, f)));
}

export function generateDataset(dir: string, count: number, size: number): void {
  fs.mkdirSync(dir, { recursive: true });
  for (let i = 0; i < count; i++) {
    const name = path.join(dir, `img_${String(i).padStart(4, "0")}.ppm`);
    writePpm(syntheticFrame(i, size, size), name);
  }
}

function main(): void {
  const args = process.argv.slice(2);
  const get = (flag: string, fallback: string) => {
    const i = args.indexOf(flag);
    return i >= 0 ? args[i + 1] : fallback;
  };
  const dir = get("--out", "dataset");
  const count = parseInt(get("--count", "100"), 10);
  const size = parseInt(get("--size", "48"), 10);
  generateDataset(dir, count, size);
  console.log(`wrote ${count} ${size}x${size} frames to ${dir}`);
}

if (process.argv[1] && process.argv[1].endsWith("dataset.js")) {
  main();
}
