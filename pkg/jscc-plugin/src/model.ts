/**
 * SNR-conditioned convolutional image codec (toy scale).
 *
 * The encoder maps a centered RGB frame plus a constant SNR plane to a
 * latent at 1/8 spatial resolution; the flat latent, truncated or
 * zero-padded to the host's exact 2*round(cbr*W*H*3) float budget, is what
 * travels as the analog code. The decoder mirrors the encoder with
 * transposed convolutions; an optional residual refiner cleans up the
 * reconstruction when enabled.
 */
import * as tf from "@tensorflow/tfjs";

import { symbolBudget } from "./protocol.js";

export const LATENT_CHANNELS = 20;
export const DOWN_FACTOR = 8;
export const SNR_SCALE = 20; // hint plane is snr_db / SNR_SCALE

export interface CodecModel {
  encoder: tf.LayersModel;
  decoder: tf.LayersModel;
  refiner: tf.LayersModel | null;
}

function convStack(input: tf.SymbolicTensor, seed: number): tf.SymbolicTensor {
  let x = input;
  const specs = [
    { filters: 32, strides: 2, activation: "relu" },
    { filters: 32, strides: 2, activation: "relu" },
    { filters: LATENT_CHANNELS, strides: 2, activation: "linear" },
  ] as const;
  specs.forEach((s, i) => {
    x = tf.layers
      .conv2d({
        filters: s.filters,
        kernelSize: 5,
        strides: s.strides,
        padding: "same",
        activation: s.activation,
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + i }),
      })
      .apply(x) as tf.SymbolicTensor;
  });
  return x;
}

export function buildEncoder(seed = 1): tf.LayersModel {
  const input = tf.input({ shape: [null, null, 4] }); // RGB + SNR plane
  return tf.model({ inputs: input, outputs: convStack(input, seed) });
}

export function buildDecoder(seed = 100): tf.LayersModel {
  const input = tf.input({ shape: [null, null, LATENT_CHANNELS + 1] });
  let x = input as tf.SymbolicTensor;
  const specs = [
    { filters: 32, activation: "relu" },
    { filters: 32, activation: "relu" },
    { filters: 3, activation: "linear" },
  ] as const;
  specs.forEach((s, i) => {
    x = tf.layers
      .conv2dTranspose({
        filters: s.filters,
        kernelSize: 5,
        strides: 2,
        padding: "same",
        activation: s.activation,
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + i }),
      })
      .apply(x) as tf.SymbolicTensor;
  });
  return tf.model({ inputs: input, outputs: x });
}

/** Residual two-layer cleanup stage, disabled unless explicitly requested. */
export function buildRefiner(seed = 200): tf.LayersModel {
  const input = tf.input({ shape: [null, null, 3] });
  let x = tf.layers
    .conv2d({
      filters: 16, kernelSize: 3, padding: "same", activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
    })
    .apply(input) as tf.SymbolicTensor;
  x = tf.layers
    .conv2d({
      filters: 3, kernelSize: 3, padding: "same", activation: "linear",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
    })
    .apply(x) as tf.SymbolicTensor;
  const out = tf.layers.add().apply([input, x]) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: out });
}

export function buildModel(seed = 1, withRefiner = false): CodecModel {
  return {
    encoder: buildEncoder(seed),
    decoder: buildDecoder(seed + 100),
    refiner: withRefiner ? buildRefiner(seed + 200) : null,
  };
}

function padTo8(x: tf.Tensor3D): tf.Tensor3D {
  const [h, w] = x.shape;
  const padH = (DOWN_FACTOR - (h % DOWN_FACTOR)) % DOWN_FACTOR;
  const padW = (DOWN_FACTOR - (w % DOWN_FACTOR)) % DOWN_FACTOR;
  if (padH === 0 && padW === 0) return x;
  return tf.mirrorPad(x, [[0, padH], [0, padW], [0, 0]], "symmetric");
}

function snrPlane(h: number, w: number, snrDb: number): tf.Tensor3D {
  return tf.fill([h, w, 1], snrDb / SNR_SCALE);
}

/** Centered pixels in [-0.5, 0.5] as an H x W x 3 tensor. */
export function centerPixels(pixels: Uint8Array, width: number, height: number): tf.Tensor3D {
  const data = Float32Array.from(pixels, (v) => v / 255 - 0.5);
  return tf.tensor3d(data, [height, width, 3]);
}

/**
 * Encode one frame to exactly 2*round(cbr*W*H*3) floats.
 *
 * The flat latent is truncated to the budget, or zero-padded when the
 * requested ratio exceeds the latent capacity (the tail carries nothing).
 */
export function encodeFrame(
  model: CodecModel,
  pixels: Uint8Array,
  width: number,
  height: number,
  snrDb: number,
  targetCbr: number,
): Float32Array {
  const budget = 2 * symbolBudget(targetCbr, width, height);
  const latent = tf.tidy(() => {
    const img = padTo8(centerPixels(pixels, width, height));
    const [h, w] = img.shape;
    const input = tf.concat([img, snrPlane(h, w, snrDb)], 2).expandDims(0);
    return (model.encoder.predict(input) as tf.Tensor).flatten();
  });
  const flat = latent.dataSync() as Float32Array;
  latent.dispose();
  const out = new Float32Array(budget);
  out.set(flat.subarray(0, Math.min(budget, flat.length)));
  return out;
}

/** Invert encodeFrame: rebuild the latent grid, decode, crop and quantize. */
export function decodeFrame(
  model: CodecModel,
  vector: Float32Array,
  width: number,
  height: number,
  snrDb: number,
): Uint8Array {
  const hPad = Math.ceil(height / DOWN_FACTOR) * DOWN_FACTOR;
  const wPad = Math.ceil(width / DOWN_FACTOR) * DOWN_FACTOR;
  const lh = hPad / DOWN_FACTOR;
  const lw = wPad / DOWN_FACTOR;
  const latentSize = lh * lw * LATENT_CHANNELS;
  const full = new Float32Array(latentSize);
  full.set(vector.subarray(0, Math.min(vector.length, latentSize)));
  const decoded = tf.tidy(() => {
    const latent = tf.tensor3d(full, [lh, lw, LATENT_CHANNELS]);
    const input = tf.concat([latent, snrPlane(lh, lw, snrDb)], 2).expandDims(0);
    let out = (model.decoder.predict(input) as tf.Tensor).squeeze([0]) as tf.Tensor3D;
    if (model.refiner) {
      out = (model.refiner.predict(out.expandDims(0)) as tf.Tensor)
        .squeeze([0]) as tf.Tensor3D;
    }
    return out
      .slice([0, 0, 0], [height, width, 3])
      .add(0.5)
      .mul(255)
      .clipByValue(0, 255)
      .round();
  });
  const pixels = Uint8Array.from(decoded.dataSync());
  decoded.dispose();
  return pixels;
}
