import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.{test,spec}.ts"],
    testTimeout: 120_000,
    hookTimeout: 300_000,
  },
});
