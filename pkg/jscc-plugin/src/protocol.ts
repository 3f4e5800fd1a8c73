/**
 * Wire protocol shared with the host simulator.
 *
 * Every message: [u32le total length][magic "HSCC"][version u8][op u8][payload].
 * Variable-size payload fields carry their own u32le counts; all integers and
 * floats are little-endian.
 */

export const MAGIC = Buffer.from("HSCC");
export const VERSION = 0x01;

export enum Op {
  Encode = 0x01,
  Decode = 0x02,
  Capabilities = 0x03,
  Error = 0x7f,
}

export interface EncodeRequest {
  width: number;
  height: number;
  snrHint: number;
  targetCbr: number;
  pixels: Uint8Array;
}

export interface DecodeRequest {
  width: number;
  height: number;
  snrHint: number;
  vector: Float32Array;
}

export class ProtocolError extends Error {}

/** Complex symbols the host expects for one frame: round(cbr * W * H * 3). */
export function symbolBudget(cbr: number, width: number, height: number): number {
  return Math.round(cbr * width * height * 3);
}

export function buildMessage(op: Op, payload: Buffer): Buffer {
  const body = Buffer.concat([MAGIC, Buffer.from([VERSION, op]), payload]);
  const head = Buffer.alloc(4);
  head.writeUInt32LE(body.length, 0);
  return Buffer.concat([head, body]);
}

/** Split a framed body into op and payload, checking magic and version. */
export function parseBody(body: Buffer): { op: number; payload: Buffer } {
  if (body.length < 6) throw new ProtocolError("message body shorter than header");
  if (!body.subarray(0, 4).equals(MAGIC)) throw new ProtocolError("bad magic");
  if (body[4] !== VERSION) throw new ProtocolError(`unsupported version ${body[4]}`);
  return { op: body[5], payload: body.subarray(6) };
}

export function parseEncodeRequest(payload: Buffer): EncodeRequest {
  if (payload.length < 20) throw new ProtocolError("encode request truncated");
  const width = payload.readUInt32LE(0);
  const height = payload.readUInt32LE(4);
  const snrHint = payload.readFloatLE(8);
  const targetCbr = payload.readFloatLE(12);
  const n = payload.readUInt32LE(16);
  if (payload.length - 20 !== n || n !== width * height * 3) {
    throw new ProtocolError("pixel payload length mismatch");
  }
  return { width, height, snrHint, targetCbr, pixels: payload.subarray(20) };
}

export function parseDecodeRequest(payload: Buffer): DecodeRequest {
  if (payload.length < 16) throw new ProtocolError("decode request truncated");
  const width = payload.readUInt32LE(0);
  const height = payload.readUInt32LE(4);
  const snrHint = payload.readFloatLE(8);
  const n = payload.readUInt32LE(12);
  if (payload.length - 16 !== 4 * n) {
    throw new ProtocolError("float vector length mismatch");
  }
  const vector = new Float32Array(n);
  for (let i = 0; i < n; i++) vector[i] = payload.readFloatLE(16 + 4 * i);
  return { width, height, snrHint, vector };
}

export function buildEncodeResponse(vector: Float32Array): Buffer {
  const payload = Buffer.alloc(4 + 4 * vector.length);
  payload.writeUInt32LE(vector.length, 0);
  for (let i = 0; i < vector.length; i++) payload.writeFloatLE(vector[i], 4 + 4 * i);
  return buildMessage(Op.Encode, payload);
}

export function buildDecodeResponse(pixels: Uint8Array): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32LE(pixels.length, 0);
  return buildMessage(Op.Decode, Buffer.concat([head, Buffer.from(pixels)]));
}

export function buildCapabilitiesResponse(persistent = true): Buffer {
  return buildMessage(Op.Capabilities, Buffer.from([VERSION, persistent ? 1 : 0]));
}

export function buildErrorResponse(message: string): Buffer {
  const text = Buffer.from(message, "utf8");
  const head = Buffer.alloc(4);
  head.writeUInt32LE(text.length, 0);
  return buildMessage(Op.Error, Buffer.concat([head, text]));
}

/** Incremental framer: feed chunks, emits complete message bodies. */
export class FrameReader {
  private pending: Buffer = Buffer.alloc(0);

  push(chunk: Buffer, onBody: (body: Buffer) => void): void {
    this.pending = this.pending.length ? Buffer.concat([this.pending, chunk]) : chunk;
    while (this.pending.length >= 4) {
      const total = this.pending.readUInt32LE(0);
      if (this.pending.length < 4 + total) break;
      const body = this.pending.subarray(4, 4 + total);
      this.pending = this.pending.subarray(4 + total);
      onBody(body);
    }
  }
}
