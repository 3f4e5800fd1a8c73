/** Weight persistence: one JSON file holding each sub-model's artifacts. */
import * as fs from "node:fs";

import * as tf from "@tensorflow/tfjs";

import { CodecModel, buildModel } from "./model.js";

interface StoredArtifacts {
  modelTopology: unknown;
  weightSpecs: tf.io.WeightsManifestEntry[];
  weightDataB64: string;
}

interface WeightsFile {
  format: "jscc-plugin-weights";
  version: 1;
  trainedEpochs: number;
  encoder: StoredArtifacts;
  decoder: StoredArtifacts;
  refiner?: StoredArtifacts;
}

async function modelToArtifacts(model: tf.LayersModel): Promise<StoredArtifacts> {
  let captured: tf.io.ModelArtifacts | null = null;
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      captured = artifacts;
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    }),
  );
  const a = captured!;
  return {
    modelTopology: a.modelTopology,
    weightSpecs: a.weightSpecs!,
    weightDataB64: Buffer.from(a.weightData as ArrayBuffer).toString("base64"),
  };
}

async function artifactsToModel(stored: StoredArtifacts): Promise<tf.LayersModel> {
  const raw = Buffer.from(stored.weightDataB64, "base64");
  const weightData = raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength);
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: stored.modelTopology as {},
      weightSpecs: stored.weightSpecs,
      weightData,
    }),
  );
}

export async function saveWeights(
  path: string,
  model: CodecModel,
  trainedEpochs: number,
): Promise<void> {
  const file: WeightsFile = {
    format: "jscc-plugin-weights",
    version: 1,
    trainedEpochs,
    encoder: await modelToArtifacts(model.encoder),
    decoder: await modelToArtifacts(model.decoder),
  };
  if (model.refiner) file.refiner = await modelToArtifacts(model.refiner);
  fs.writeFileSync(path, JSON.stringify(file));
}

export async function loadWeights(path: string): Promise<CodecModel> {
  const file = JSON.parse(fs.readFileSync(path, "utf8")) as WeightsFile;
  if (file.format !== "jscc-plugin-weights") {
    throw new Error(`${path} is not a weights file`);
  }
  return {
    encoder: await artifactsToModel(file.encoder),
    decoder: await artifactsToModel(file.decoder),
    refiner: file.refiner ? await artifactsToModel(file.refiner) : null,
  };
}

/** Weights from file, or a deterministic random-init model without one. */
export async function loadOrInit(path: string | null, refine: boolean): Promise<CodecModel> {
  if (path) return loadWeights(path);
  return buildModel(1, refine);
}
