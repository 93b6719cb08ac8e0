export * from "./protocol.js";
export * from "./timeline.js";
export * from "./scribble.js";
export * from "./state.js";
export * from "./client.js";
