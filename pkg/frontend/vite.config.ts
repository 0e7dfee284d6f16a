import { defineConfig } from "vite";

// Dev-server proxy lets `npm run dev` talk to a local `thma serve` without
// CORS or an explicit ?api= override.
export default defineConfig({
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8080",
    },
  },
  build: {
    outDir: "dist",
    sourcemap: true,
  },
});
