/**
 * HTTP front end for a trained classifier.
 *
 * Wire protocol:
 *   GET  /meta      -> {"classes": K, "height": H, "width": W, "channels": C}
 *   POST /classify  body = binary PGM/PPM -> {"probs": [f64 x K]}
 *
 * Classification is deterministic: identical request bodies always produce
 * identical responses. Anything unparseable or of the wrong shape is
 * answered with HTTP 400 and a JSON {"error": reason}.
 */

import * as http from 'node:http';

import express from 'express';
import type { Express, Request, Response } from 'express';

import { DatasetMeta } from './data';
import { TrainedOracle, predictProbs } from './model';
import { RawImage, parseNetpbm } from './netpbm';

export interface ClassifyOracle {
  meta: DatasetMeta;
  probs(image: RawImage): number[];
}

/** Adapt a trained model to the ClassifyOracle the app serves. */
export function oracleFromModel(trained: TrainedOracle): ClassifyOracle {
  return {
    meta: trained.meta,
    probs: (image) => predictProbs(trained.model, trained.meta, image.pixels),
  };
}

/** Express app exposing `oracle` under the classify wire protocol. */
export function createApp(oracle: ClassifyOracle): Express {
  const app = express();
  const { meta } = oracle;

  app.get('/meta', (_req: Request, res: Response) => {
    res.json({
      classes: meta.classes,
      height: meta.height,
      width: meta.width,
      channels: meta.channels,
    });
  });

  const rawBody = express.raw({ type: () => true, limit: '16mb' });
  app.post('/classify', rawBody, (req: Request, res: Response) => {
    const body: unknown = req.body;
    if (!Buffer.isBuffer(body) || body.length === 0) {
      res.status(400).json({ error: 'request body must be binary PGM/PPM image data' });
      return;
    }
    let image: RawImage;
    try {
      image = parseNetpbm(body);
    } catch (err) {
      res.status(400).json({ error: (err as Error).message });
      return;
    }
    if (
      image.height !== meta.height ||
      image.width !== meta.width ||
      image.channels !== meta.channels
    ) {
      res.status(400).json({
        error:
          `image is ${image.height}x${image.width}x${image.channels}, ` +
          `classifier expects ${meta.height}x${meta.width}x${meta.channels}`,
      });
      return;
    }
    res.json({ probs: oracle.probs(image) });
  });

  return app;
}

/**
 * Start `app` on `port` (0 picks a free port). Resolves once the server is
 * accepting connections; rejects with the listen error, e.g. EADDRINUSE
 * when the port is already taken.
 */
export function startServer(app: Express, port: number): Promise<http.Server> {
  return new Promise((resolve, reject) => {
    const server = app.listen(port, '127.0.0.1');
    server.once('listening', () => resolve(server));
    server.once('error', (err: Error) => reject(err));
  });
}

/** Close the server and wait for in-flight connections to drain. */
export function stopServer(server: http.Server): Promise<void> {
  return new Promise((resolve, reject) => {
    server.close((err) => (err ? reject(err) : resolve()));
  });
}

/** The port the server actually bound (useful after listening on 0). */
export function boundPort(server: http.Server): number {
  const address = server.address();
  if (address === null || typeof address === 'string') {
    throw new Error('server is not listening on a TCP port');
  }
  return address.port;
}
