import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    port: 5173,
    proxy: {
      "/v1": {
        target: process.env.SITEREC_URL ?? "http://127.0.0.1:8008",
        changeOrigin: true,
      },
    },
  },
  build: {
    outDir: "dist",
    sourcemap: true,
  },
  test: {
    environment: "jsdom",
    globalSetup: "tests/global_setup.ts",
    testTimeout: 120_000,
    hookTimeout: 180_000,
  },
});
