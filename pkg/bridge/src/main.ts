/** Entry point: `node dist/main.js [--port N] [--host H]`. */

import { BridgeServer, handshakeHeader } from "./server.js";
import { stableStringify } from "./protocol.js";

function arg(name: string, fallback: string): string {
  const i = process.argv.indexOf(`--${name}`);
  return i >= 0 && i + 1 < process.argv.length ? process.argv[i + 1] : fallback;
}

const port = parseInt(arg("port", "7741"), 10);
const host = arg("host", "127.0.0.1");

const server = new BridgeServer();
server.listen(port, host).then((bound) => {
  console.log(`bridge listening on ${host}:${bound}`);
  console.log(stableStringify(handshakeHeader()));
}).catch((e) => {
  console.error(`cannot bind ${host}:${port}: ${e}`);
  process.exit(1);
});
