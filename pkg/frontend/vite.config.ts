import { defineConfig } from 'vitest/config';

export default defineConfig({
  build: { outDir: 'dist' },
  server: {
    // dev mode assumes the advisor service on its default port; the built
    // bundle is served by the service itself and needs no proxy
    proxy: {
      '/meta': 'http://127.0.0.1:8000',
      '/sessions': 'http://127.0.0.1:8000',
    },
  },
  test: {
    environment: 'jsdom',
    include: ['tests/**/*.test.ts'],
  },
});
