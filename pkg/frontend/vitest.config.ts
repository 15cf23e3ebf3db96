import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // The end-to-end suite starts the real verification service and runs
    // the SMT solver, so generous timeouts are needed.
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
