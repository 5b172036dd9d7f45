// In-memory stand-in for the QC service, faithful to its envelope, status
// codes and one-event-per-endpoint rule. `journalActions` records what the
// real server would append to the job journal, in order.

import type { FetchLike } from '../src/api.js';
import type { AnnotationWire, ClueWire, TransitionRow } from '../src/types.js';

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

function ok(data: unknown): Response {
  return json(200, { data });
}

function error(status: number, code: string, message: string): Response {
  return json(status, { error: { code, message } });
}

export function makeClue(id: string, imageId: string, corners: number[], score = 0.9): ClueWire {
  return {
    id,
    image_id: imageId,
    corners,
    score,
    source_instance: id.replace(/^clue:/, ''),
    status: 'proposed',
  };
}

export class FakeQcServer {
  journalActions: string[] = [];
  clues = new Map<string, ClueWire[]>();
  annotations = new Map<string, AnnotationWire[]>();
  misses = new Map<string, number>();
  transitions: TransitionRow[] = [];
  /** When set, the next mutating request fails once with this error. */
  failNext: { status: number; code: string; message: string } | null = null;

  private annotationSeq = 0;

  seedImage(imageId: string, clues: ClueWire[]): void {
    this.clues.set(imageId, clues);
    this.annotations.set(imageId, []);
    this.misses.set(imageId, 0);
  }

  readonly fetch: FetchLike = async (input, init) => {
    const url = new URL(input, 'http://fake');
    const path = url.pathname;
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : {};

    if (method !== 'GET' && this.failNext) {
      const fail = this.failNext;
      this.failNext = null;
      return error(fail.status, fail.code, fail.message);
    }

    let m: RegExpMatchArray | null;
    if ((m = path.match(/^\/images\/([^/]+)\/clues$/)) && method === 'GET') {
      const clues = this.clues.get(decodeURIComponent(m[1]!));
      if (!clues) return error(404, 'not_found', `image ${m[1]} unknown`);
      return ok(clues);
    }
    if ((m = path.match(/^\/images\/([^/]+)\/annotations$/)) && method === 'GET') {
      const imageId = decodeURIComponent(m[1]!);
      const annotations = this.annotations.get(imageId);
      if (!annotations) return error(404, 'not_found', `image ${imageId} unknown`);
      return ok({ image_id: imageId, annotations });
    }
    if (path === '/transitions' && method === 'GET') {
      return ok({ transitions: this.transitions });
    }
    if ((m = path.match(/^\/images\/([^/]+)\/qc([12])\/(open|close|complete)$/)) && method === 'POST') {
      const imageId = decodeURIComponent(m[1]!);
      this.journalActions.push(`qc${m[2]}_${m[3]}`);
      return ok({ image_id: imageId, stage: `QC${m[2]}_${m[3] === 'open' ? 'OPEN' : 'DONE'}` });
    }
    if ((m = path.match(/^\/images\/([^/]+)\/clues\/([^/]+)\/convert$/)) && method === 'POST') {
      const imageId = decodeURIComponent(m[1]!);
      const clue = this.clues.get(imageId)?.find((c) => c.id === decodeURIComponent(m![2]!));
      if (!clue) return error(404, 'not_found', 'clue unknown');
      if (clue.status !== 'proposed') return error(409, 'conflict', `clue already ${clue.status}`);
      const edited = body.polygon as number[] | undefined;
      clue.status = edited ? 'modified' : 'converted';
      this.journalActions.push(edited ? 'clue_modified' : 'clue_converted');
      const annotation: AnnotationWire = {
        id: `a${++this.annotationSeq}`,
        image_id: imageId,
        polygon: edited ?? [...clue.corners],
        provenance: {
          kind: edited ? 'clue_modified' : 'clue_converted',
          clue_id: clue.id,
        },
        damage_label: body.damage_label ?? null,
        author: 'analyst',
        stage: 'qc1',
        created_at: body.timestamp ?? 0,
      };
      this.annotations.get(imageId)!.push(annotation);
      return ok(annotation);
    }
    if ((m = path.match(/^\/images\/([^/]+)\/clues\/([^/]+)\/dismiss$/)) && method === 'POST') {
      const clue = this.clues
        .get(decodeURIComponent(m[1]!))
        ?.find((c) => c.id === decodeURIComponent(m![2]!));
      if (!clue) return error(404, 'not_found', 'clue unknown');
      if (clue.status !== 'proposed') return error(409, 'conflict', `clue already ${clue.status}`);
      clue.status = 'dismissed';
      this.journalActions.push('clue_dismissed');
      return ok(clue);
    }
    if ((m = path.match(/^\/images\/([^/]+)\/annotations$/)) && method === 'POST') {
      const imageId = decodeURIComponent(m[1]!);
      this.journalActions.push('annotation_drawn');
      const annotation: AnnotationWire = {
        id: `a${++this.annotationSeq}`,
        image_id: imageId,
        polygon: body.polygon,
        provenance: { kind: 'manual' },
        damage_label: body.damage_label ?? null,
        author: 'analyst',
        stage: 'qc1',
        created_at: body.timestamp ?? 0,
      };
      this.annotations.get(imageId)!.push(annotation);
      return ok(annotation);
    }
    if ((m = path.match(/^\/images\/([^/]+)\/annotations\/([^/]+)\/approve$/)) && method === 'POST') {
      this.journalActions.push('annotation_approved');
      return ok({ image_id: decodeURIComponent(m[1]!), stage: 'QC2_OPEN' });
    }
    if ((m = path.match(/^\/images\/([^/]+)\/missed$/)) && method === 'POST') {
      const imageId = decodeURIComponent(m[1]!);
      const count = (this.misses.get(imageId) ?? 0) + 1;
      this.misses.set(imageId, count);
      this.journalActions.push('missed_damage_flagged');
      return ok({ image_id: imageId, misses: count });
    }
    return error(404, 'not_found', `no route ${method} ${path}`);
  };
}
