/**
 * TCP bridge server.
 *
 * On connect the server sends a capabilities handshake, then handles framed
 * reward requests sequentially per connection. Malformed input produces a
 * structured error response (id 0 when the request id is unrecoverable) and
 * never kills the process; multiple connections are accepted and serialized
 * onto the single model.
 */

import * as net from "node:net";

import {
  MAX_WINDOW, MODEL_ID, NATIVE_RESOLUTION, SCHEDULE_T, ProceduralDiffusionModel,
} from "./model.js";
import {
  Header, MessageReader, ProtocolError, PROTOCOL_VERSION, encodeMessage,
  parseRewardRequest,
} from "./protocol.js";

export function handshakeHeader(): Header {
  return {
    protocol_version: PROTOCOL_VERSION,
    max_window: MAX_WINDOW,
    schedule_T: SCHEDULE_T,
    model_id: MODEL_ID,
    native_resolution: [NATIVE_RESOLUTION, NATIVE_RESOLUTION],
    resize: "nearest",
  };
}

export class BridgeServer {
  readonly model = new ProceduralDiffusionModel();
  private server: net.Server;
  private busy: Promise<void> = Promise.resolve();

  constructor() {
    this.server = net.createServer((socket) => this.handleConnection(socket));
  }

  listen(port: number, host = "127.0.0.1"): Promise<number> {
    return new Promise((resolve, reject) => {
      this.server.once("error", reject);
      this.server.listen(port, host, () => {
        const addr = this.server.address() as net.AddressInfo;
        resolve(addr.port);
      });
    });
  }

  close(): Promise<void> {
    return new Promise((resolve) => this.server.close(() => resolve()));
  }

  private handleConnection(socket: net.Socket): void {
    socket.on("error", () => socket.destroy());
    socket.write(encodeMessage(handshakeHeader()));
    const reader = new MessageReader();
    socket.on("data", (chunk: Buffer) => {
      try {
        reader.feed(chunk);
        let message;
        while ((message = reader.next()) !== null) {
          const { header, payload } = message;
          // one request in flight model-side: connections share one queue
          this.busy = this.busy.then(() => {
            if (!socket.destroyed) {
              socket.write(encodeMessage(this.respond(header, payload)));
            }
          });
        }
      } catch (e) {
        // framing is unrecoverable on this connection: answer and drop it
        if (!socket.destroyed) {
          socket.write(encodeMessage({ id: 0, error: String((e as Error).message) }));
        }
        socket.destroy();
      }
    });
  }

  private respond(header: Header, payload: Buffer): Header {
    const reqId = typeof header.id === "number" && Number.isFinite(header.id)
      ? (header.id as number) : 0;
    try {
      const req = parseRewardRequest(header, payload);
      if (req.frame_count > MAX_WINDOW) {
        return { id: reqId, error: `window of ${req.frame_count} frames exceeds max ${MAX_WINDOW}` };
      }
      const frameBytes = req.height * req.width * req.channels;
      const frames: Uint8Array[] = [];
      for (let f = 0; f < req.frame_count; f++) {
        frames.push(new Uint8Array(
          payload.subarray(f * frameBytes, (f + 1) * frameBytes)));
      }
      const { rAlign, rRec } = this.model.computeRewardTerms(
        frames, req.height, req.width, req.caption, req.t_noise, req.seed);
      return { id: req.id, r_align: rAlign, r_rec: rRec };
    } catch (e) {
      const kind = e instanceof ProtocolError ? "" : "internal error: ";
      return { id: reqId, error: kind + String((e as Error).message) };
    }
  }
}
