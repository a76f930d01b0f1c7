export * from "./session.js";
export * from "./core.js";
export * from "./stub.js";
export * from "./viewport.js";
export * from "./tracks.js";
export * from "./linking.js";
export * from "./planes.js";
export * from "./distmap.js";
