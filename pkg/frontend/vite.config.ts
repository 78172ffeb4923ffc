import { defineConfig } from "vitest/config";

// dev proxies API paths to the study service so the UI stays same-origin
export default defineConfig({
  server: {
    proxy: {
      "/sessions": "http://localhost:8000",
      "/docs": "http://localhost:8000",
    },
  },
  test: {
    environment: "jsdom",
  },
});
