import { createApp } from "./app.js";
import type { WebSocketLike } from "./protocol.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

createApp(root, {
  socketFactory: () => {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    const ws = new WebSocket(`${scheme}://${location.host}/ws`);
    return ws as unknown as WebSocketLike;
  },
});
