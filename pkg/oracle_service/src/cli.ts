/**
 * Command line entry points.
 *
 *   node dist/cli.js train --out DIR [--images N] [--epochs E] [--seed S]
 *   node dist/cli.js serve --model DIR --port P
 *
 * `train` generates the synthetic world, fits the classifier, and writes
 * the model artifact with its recorded validation accuracy. `serve` loads
 * such an artifact and answers /meta and /classify requests.
 */

import { parseArgs } from 'node:util';

import { DatasetMeta, classTemplates, makeDataset } from './data';
import { loadOracle, saveOracle, train } from './model';
import { boundPort, createApp, oracleFromModel, startServer } from './server';

const WORLD: DatasetMeta = { classes: 10, height: 32, width: 32, channels: 3 };

async function runTrain(args: string[]): Promise<void> {
  const { values } = parseArgs({
    args,
    options: {
      out: { type: 'string' },
      images: { type: 'string', default: '400' },
      epochs: { type: 'string', default: '20' },
      seed: { type: 'string', default: '0' },
      noise: { type: 'string', default: '12' },
    },
  });
  if (!values.out) {
    throw new Error('train requires --out DIR');
  }
  const seed = Number(values.seed);
  const templates = classTemplates(WORLD.classes, WORLD.height, WORLD.width, WORLD.channels, seed);
  const dataset = makeDataset(templates, WORLD, Number(values.images), seed, Number(values.noise));
  const oracle = await train(dataset, { epochs: Number(values.epochs), seed });
  await saveOracle(oracle, values.out);
  console.log(`trained on ${values.images} images for ${values.epochs} epochs`);
  console.log(`validation accuracy ${oracle.valAccuracy.toFixed(4)}, saved to ${values.out}`);
}

async function runServe(args: string[]): Promise<void> {
  const { values } = parseArgs({
    args,
    options: {
      model: { type: 'string' },
      port: { type: 'string', default: '8080' },
    },
  });
  if (!values.model) {
    throw new Error('serve requires --model DIR');
  }
  const oracle = await loadOracle(values.model);
  const server = await startServer(createApp(oracleFromModel(oracle)), Number(values.port));
  const { classes, height, width, channels } = oracle.meta;
  console.log(
    `serving ${classes}-class ${height}x${width}x${channels} classifier ` +
      `(val accuracy ${oracle.valAccuracy.toFixed(4)}) on http://127.0.0.1:${boundPort(server)}`,
  );
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === 'train') {
    await runTrain(rest);
  } else if (command === 'serve') {
    await runServe(rest);
  } else {
    console.error('usage: cli.js <train|serve> [options]');
    process.exitCode = 2;
  }
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exitCode = 1;
});
