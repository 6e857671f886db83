import { defineConfig } from "vitest/config";

export default defineConfig({
  build: {
    target: "es2020"
  },
  server: {
    proxy: {
      "/assess": "http://127.0.0.1:8000",
      "/revisions": "http://127.0.0.1:8000",
      "/rubric": "http://127.0.0.1:8000",
      "/health": "http://127.0.0.1:8000"
    }
  },
  test: {
    environment: "happy-dom"
  }
});
