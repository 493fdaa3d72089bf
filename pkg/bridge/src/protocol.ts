/**
 * Wire protocol framing.
 *
 * Every message is a 4-byte big-endian length N followed by N payload bytes.
 * The payload is one line of UTF-8 JSON, a newline terminator, then raw frame
 * bytes whose size the header declares (zero for frame-less messages).
 *
 * Headers are serialized with sorted keys and no whitespace so both ends of
 * the wire produce byte-identical encodings for the golden fixtures.
 */

export const PROTOCOL_VERSION = 1;
export const MAX_MESSAGE_BYTES = 1 << 28;

export interface RewardRequestHeader {
  id: number;
  op: "reward_terms";
  caption: string;
  t_noise: number;
  seed: number;
  frame_count: number;
  height: number;
  width: number;
  channels: number;
}

export type Header = Record<string, unknown>;

/** JSON.stringify with recursively sorted object keys, no whitespace. */
export function stableStringify(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}

export function encodeMessage(header: Header, payload: Buffer = Buffer.alloc(0)): Buffer {
  const head = Buffer.from(stableStringify(header), "utf-8");
  if (head.includes(0x0a)) {
    throw new Error("header must not contain newlines");
  }
  const body = Buffer.concat([head, Buffer.from("\n"), payload]);
  if (body.length > MAX_MESSAGE_BYTES) {
    throw new Error(`message of ${body.length} bytes exceeds limit`);
  }
  const prefix = Buffer.alloc(4);
  prefix.writeUInt32BE(body.length);
  return Buffer.concat([prefix, body]);
}

export class ProtocolError extends Error {}

/** Split one framed payload (without the length prefix) into header + bytes. */
export function splitMessage(body: Buffer): { header: Header; payload: Buffer } {
  const nl = body.indexOf(0x0a);
  if (nl < 0) {
    throw new ProtocolError("malformed message: missing header terminator");
  }
  let header: unknown;
  try {
    header = JSON.parse(body.subarray(0, nl).toString("utf-8"));
  } catch (e) {
    throw new ProtocolError(`malformed message header: ${(e as Error).message}`);
  }
  if (header === null || typeof header !== "object" || Array.isArray(header)) {
    throw new ProtocolError("malformed message: header is not an object");
  }
  return { header: header as Header, payload: body.subarray(nl + 1) };
}

/** Decode one complete framed message from a byte buffer. */
export function decodeMessage(buf: Buffer): { header: Header; payload: Buffer } {
  if (buf.length < 4) {
    throw new ProtocolError("truncated message: missing length prefix");
  }
  const n = buf.readUInt32BE(0);
  if (buf.length !== 4 + n) {
    throw new ProtocolError(`length prefix ${n} does not match body of ${buf.length - 4}`);
  }
  return splitMessage(buf.subarray(4));
}

/**
 * Incremental frame extractor for a TCP stream: feed arbitrary chunks,
 * pop complete messages.
 */
export class MessageReader {
  private buf: Buffer = Buffer.alloc(0);

  feed(chunk: Buffer): void {
    this.buf = this.buf.length === 0 ? chunk : Buffer.concat([this.buf, chunk]);
  }

  /** Returns the next complete message, or null if more bytes are needed. */
  next(): { header: Header; payload: Buffer } | null {
    if (this.buf.length < 4) {
      return null;
    }
    const n = this.buf.readUInt32BE(0);
    if (n > MAX_MESSAGE_BYTES) {
      throw new ProtocolError(`peer announced oversized message of ${n} bytes`);
    }
    if (this.buf.length < 4 + n) {
      return null;
    }
    const body = this.buf.subarray(4, 4 + n);
    this.buf = this.buf.subarray(4 + n);
    return splitMessage(body);
  }
}

export function parseRewardRequest(header: Header, payload: Buffer): RewardRequestHeader {
  const require = (key: string): unknown => {
    if (!(key in header)) {
      throw new ProtocolError(`request missing field '${key}'`);
    }
    return header[key];
  };
  const num = (key: string): number => {
    const v = require(key);
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new ProtocolError(`request field '${key}' must be a finite number`);
    }
    return v;
  };
  if (require("op") !== "reward_terms") {
    throw new ProtocolError(`unknown op '${String(header.op)}'`);
  }
  const caption = require("caption");
  if (typeof caption !== "string") {
    throw new ProtocolError("request field 'caption' must be a string");
  }
  const req: RewardRequestHeader = {
    id: num("id"),
    op: "reward_terms",
    caption,
    t_noise: num("t_noise"),
    seed: num("seed"),
    frame_count: num("frame_count"),
    height: num("height"),
    width: num("width"),
    channels: num("channels"),
  };
  if (req.channels !== 3) {
    throw new ProtocolError("frames must be 3-channel RGB");
  }
  if (req.frame_count < 1 || req.height < 1 || req.width < 1) {
    throw new ProtocolError("frame dimensions must be positive");
  }
  const expected = req.frame_count * req.height * req.width * req.channels;
  if (payload.length !== expected) {
    throw new ProtocolError(
      `frame payload of ${payload.length} bytes does not match declared ${expected}`);
  }
  return req;
}
