import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    testTimeout: 120_000,
    hookTimeout: 300_000,
    // Model training is CPU-bound; run files one at a time so timings stay
    // predictable and the HTTP integration gets the whole machine.
    fileParallelism: false,
  },
});
