export * from "./protocol.js";
export * from "./state.js";
export * from "./client.js";
export * from "./render.js";
