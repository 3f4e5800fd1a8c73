/**
 * Desk-scale end-to-end training through a simulated analog channel.
 *
 * Each batch: encode, normalize the latent to unit mean power per complex
 * symbol (two reals), add white Gaussian noise at an SNR drawn per batch,
 * undo the normalization and decode -- exactly the path the host simulator
 * drives at deployment. Loss is pixel MSE.
 */
import * as tf from "@tensorflow/tfjs";

import { Frame, loadDataset, makeRng } from "./dataset.js";
import { CodecModel, SNR_SCALE, buildModel, centerPixels } from "./model.js";
import { saveWeights } from "./weights.js";

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  learningRate: number;
  seed: number;
  snrRangeDb: [number, number];
  refine: boolean;
}

export const DEFAULT_OPTIONS: TrainOptions = {
  epochs: 3,
  batchSize: 8,
  learningRate: 1e-3,
  seed: 7,
  snrRangeDb: [0, 20],
  refine: false,
};

function framesToTensor(frames: Frame[]): tf.Tensor4D {
  return tf.tidy(() =>
    tf.stack(frames.map((f) => centerPixels(f.pixels, f.width, f.height))),
  ) as tf.Tensor4D;
}

function channelPass(
  latent: tf.Tensor4D,
  snrDb: number,
  noiseSeed: number,
): tf.Tensor4D {
  // per-sample gain to unit mean power per complex symbol (0.5 per real)
  const power = latent.square().mean([1, 2, 3], true);
  const gain = tf.sqrt(tf.div(0.5, power.add(1e-12)));
  const sigmaAxis = Math.sqrt(0.5 * 10 ** (-snrDb / 10));
  const noise = tf.randomNormal(latent.shape, 0, sigmaAxis, "float32", noiseSeed);
  return latent.mul(gain).add(noise).div(gain) as tf.Tensor4D;
}

function forward(
  model: CodecModel,
  batch: tf.Tensor4D,
  snrDb: number,
  noiseSeed: number,
): tf.Tensor {
  const [b, h, w] = batch.shape;
  const plane = tf.fill([b, h, w, 1], snrDb / SNR_SCALE);
  const latent = model.encoder.apply(tf.concat([batch, plane], 3)) as tf.Tensor4D;
  const rx = channelPass(latent, snrDb, noiseSeed);
  const lPlane = tf.fill([b, rx.shape[1], rx.shape[2], 1], snrDb / SNR_SCALE);
  let out = model.decoder.apply(tf.concat([rx, lPlane], 3)) as tf.Tensor;
  if (model.refiner) out = model.refiner.apply(out) as tf.Tensor;
  return out;
}

/** Train in place; returns the mean loss of each epoch. */
export function train(
  model: CodecModel,
  frames: Frame[],
  options: Partial<TrainOptions> = {},
): number[] {
  const opt = { ...DEFAULT_OPTIONS, ...options };
  const data = framesToTensor(frames);
  const n = data.shape[0];
  const optimizer = tf.train.adam(opt.learningRate);
  const rng = makeRng(opt.seed);
  const epochLosses: number[] = [];
  let noiseSeed = opt.seed * 1000 + 1;

  for (let epoch = 0; epoch < opt.epochs; epoch++) {
    const order = Array.from({ length: n }, (_, i) => i);
    for (let i = n - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let lossSum = 0;
    let batches = 0;
    for (let start = 0; start + opt.batchSize <= n; start += opt.batchSize) {
      const idx = order.slice(start, start + opt.batchSize);
      const snrDb = opt.snrRangeDb[0] + rng() * (opt.snrRangeDb[1] - opt.snrRangeDb[0]);
      const seed = noiseSeed++;
      const cost = optimizer.minimize(
        () =>
          tf.tidy(() => {
            const batch = tf.gather(data, idx) as tf.Tensor4D;
            const out = forward(model, batch, snrDb, seed);
            return tf.losses.meanSquaredError(batch, out) as tf.Scalar;
          }),
        true,
      )!;
      lossSum += cost.dataSync()[0];
      cost.dispose();
      batches++;
    }
    epochLosses.push(lossSum / batches);
  }
  data.dispose();
  optimizer.dispose();
  return epochLosses;
}

async function main(): Promise<void> {
  const args = process.argv.slice(2);
  const get = (flag: string, fallback: string) => {
    const i = args.indexOf(flag);
    return i >= 0 ? args[i + 1] : fallback;
  };
  const datasetDir = get("--dataset", "dataset");
  const out = get("--out", "weights.json");
  const epochs = parseInt(get("--epochs", "3"), 10);
  const seed = parseInt(get("--seed", "7"), 10);
  const refine = args.includes("--refine");

  let frames: Frame[];
  try {
    frames = loadDataset(datasetDir);
  } catch (e) {
    console.error(String(e));
    process.exit(2);
  }
  console.error(`training on ${frames.length} frames for ${epochs} epochs`);
  const model = buildModel(seed, refine);
  const losses = train(model, frames, { epochs, seed, refine });
  losses.forEach((l, i) => console.error(`epoch ${i + 1}: loss ${l.toFixed(6)}`));
  await saveWeights(out, model, epochs);
  console.error(`weights saved to ${out}`);
}

if (process.argv[1] && process.argv[1].endsWith("train.js")) {
  main().catch((e) => {
    console.error(e);
    process.exit(1);
  });
}
