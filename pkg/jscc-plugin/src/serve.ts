/**
 * Framed request loop on stdin/stdout (persistent mode).
 *
 * Answers Capabilities, Encode and Decode; a malformed frame gets one error
 * frame back and a nonzero exit. All diagnostics go to stderr -- stdout
 * carries protocol bytes only.
 */
import {
  FrameReader,
  Op,
  ProtocolError,
  buildCapabilitiesResponse,
  buildDecodeResponse,
  buildEncodeResponse,
  buildErrorResponse,
  parseBody,
  parseDecodeRequest,
  parseEncodeRequest,
} from "./protocol.js";
import { CodecModel, decodeFrame, encodeFrame } from "./model.js";
import { loadOrInit } from "./weights.js";

function handle(model: CodecModel, body: Buffer): Buffer {
  const { op, payload } = parseBody(body);
  switch (op) {
    case Op.Capabilities:
      return buildCapabilitiesResponse(true);
    case Op.Encode: {
      const req = parseEncodeRequest(payload);
      const vector = encodeFrame(
        model, req.pixels, req.width, req.height, req.snrHint, req.targetCbr);
      return buildEncodeResponse(vector);
    }
    case Op.Decode: {
      const req = parseDecodeRequest(payload);
      const pixels = decodeFrame(
        model, req.vector, req.width, req.height, req.snrHint);
      return buildDecodeResponse(pixels);
    }
    default:
      return buildErrorResponse(`unknown op ${op}`);
  }
}

export async function serve(weightsPath: string | null, refine: boolean): Promise<void> {
  const model = await loadOrInit(weightsPath, refine);
  const reader = new FrameReader();
  process.stdin.on("data", (chunk: Buffer) => {
    try {
      reader.push(chunk, (body) => {
        process.stdout.write(handle(model, body));
      });
    } catch (e) {
      if (e instanceof ProtocolError) {
        process.stdout.write(buildErrorResponse(e.message));
        process.exit(1);
      }
      console.error(e);
      process.exit(1);
    }
  });
  process.stdin.on("end", () => process.exit(0));
}

function main(): void {
  const args = process.argv.slice(2);
  const i = args.indexOf("--weights");
  const weights = i >= 0 ? args[i + 1] : null;
  serve(weights, args.includes("--refine")).catch((e) => {
    console.error(e);
    process.exit(1);
  });
}

if (process.argv[1] && process.argv[1].endsWith("serve.js")) {
  main();
}
