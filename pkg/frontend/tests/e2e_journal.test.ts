// End-to-end check against the real backend: spawn the service, run the
// scripted QC1 + QC2 session through the controller, then read the job's
// journal file and verify the exact event sequence and bit-exact geometry.

import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, readdirSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { QcApiClient } from '../src/api.js';
import { ReviewController } from '../src/session.js';

const PORT = 18760 + (process.pid % 200);
const BASE = `http://127.0.0.1:${PORT}`;

const backendAvailable = spawnSync('python3', ['-c', 'import bladeqc'], { timeout: 20000 }).status === 0;

let server: ChildProcess | null = null;
let dataDir = '';

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error('backend did not come up');
}

interface JournalRecord {
  seq: number;
  action: string;
  payload: Record<string, unknown>;
}

function readJournal(jobId: string): JournalRecord[] {
  const files = readdirSync(dataDir).filter((f) => f.includes(jobId));
  expect(files).toHaveLength(1);
  return readFileSync(join(dataDir, files[0]!), 'utf-8')
    .trim()
    .split('\n')
    .map((line) => JSON.parse(line) as JournalRecord)
    .sort((a, b) => a.seq - b.seq);
}

describe.runIf(backendAvailable)('scripted session against the real service', () => {
  beforeAll(async () => {
    dataDir = mkdtempSync(join(tmpdir(), 'bladeqc-e2e-'));
    server = spawn(
      'python3',
      ['-m', 'bladeqc.cli', 'serve', '--port', String(PORT), '--data-dir', dataDir],
      { stdio: 'ignore' },
    );
    await waitForHealth(30000);
  }, 40000);

  afterAll(() => {
    server?.kill();
  });

  it('writes exactly the expected journal and round-trips clue corners', async () => {
    // find a job id the hash puts in the treatment arm
    let jobId = '';
    let imageId = '';
    for (let i = 0; i < 64 && !jobId; i++) {
      const candidate = `e2e-${i}`;
      const response = await fetch(`${BASE}/jobs`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({
          job_id: candidate,
          turbine_id: 'wtg-1',
          images: [
            {
              image_id: `${candidate}-img`,
              file_ref: 'blob://x.jpg',
              native_resolution: [64, 64],
              working_resolution: [32, 32],
            },
          ],
        }),
      });
      const body = (await response.json()) as { data: { arm: string } };
      if (body.data.arm === 'treatment') {
        jobId = candidate;
        imageId = `${candidate}-img`;
      }
    }
    expect(jobId).not.toBe('');

    const predictions = {
      image_id: imageId,
      instances: [
        { id: 'p1', score: 0.95, polygon: [3, 5, 13, 5, 13, 25, 3, 25], frame: 'native' },
        { id: 'p2', score: 0.7, polygon: [40, 40, 50, 40, 50, 50, 40, 50], frame: 'native' },
      ],
    };
    await fetch(`${BASE}/jobs/${jobId}/predictions`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(predictions),
    });

    const api = new QcApiClient(BASE, { actor: 'e2e-analyst' });
    let tick = 1000000;
    const controller = new ReviewController(api, { clock: () => (tick += 5000) });

    // QC1: open -> convert one clue -> dismiss one -> draw -> close -> complete
    await controller.openImage(imageId, 1);
    const clueIds = controller.clues.map((c) => c.id);
    expect(clueIds).toHaveLength(2);
    const clueCorners = [...controller.clues[0]!.corners];
    const converted = await controller.convertClue(clueIds[0]!);
    await controller.dismissClue(clueIds[1]!);
    await controller.drawAnnotation([30, 30, 35, 30, 30, 35]);
    await controller.closeSession();
    await controller.completeStage(imageId, 1);

    // QC2: open -> flag a missed damage -> close -> complete
    await controller.openImage(imageId, 2);
    const misses = await controller.flagMissed('hairline crack');
    expect(misses).toBe(1);
    expect(controller.jobMissCount()).toBe(1);
    await controller.closeSession();
    await controller.completeStage(imageId, 2);

    expect(converted.polygon).toEqual(clueCorners);
    expect(converted.polygon.every((v, i) => Object.is(v, clueCorners[i]))).toBe(true);

    const records = readJournal(jobId);
    expect(records.map((r) => r.action)).toEqual([
      'job_ingested',
      'predictions_ingested',
      'qc1_open',
      'clue_converted',
      'clue_dismissed',
      'annotation_drawn',
      'qc1_close',
      'qc1_complete',
      'qc2_open',
      'missed_damage_flagged',
      'qc2_close',
      'qc2_complete',
    ]);

    const conversion = records.find((r) => r.action === 'clue_converted')!;
    const annotationWire = conversion.payload['annotation'] as { polygon: number[] };
    expect(annotationWire.polygon).toEqual(clueCorners);
  }, 60000);
});
