import { Api } from "./api.js";
import { mountApp } from "./app.js";

declare global {
  interface Window {
    /** Override for the verification service URL (default local port 8899). */
    HHL_SERVICE_URL?: string;
  }
}

const base = window.HHL_SERVICE_URL ?? "http://127.0.0.1:8899";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
mountApp(root, new Api(base));
