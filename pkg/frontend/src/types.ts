// Wire types mirroring the QC service's JSON payloads.

export interface ClueWire {
  id: string;
  image_id: string;
  /** 4 corners as [x0, y0, x1, y1, x2, y2, x3, y3], native-frame pixels, CCW. */
  corners: number[];
  score: number;
  source_instance: string;
  status: 'proposed' | 'converted' | 'modified' | 'dismissed';
}

export interface ProvenanceWire {
  kind: 'manual' | 'clue_converted' | 'clue_modified';
  clue_id?: string;
}

export interface AnnotationWire {
  id: string;
  image_id: string;
  /** Flat [x0, y0, ...] polygon in native-frame pixels. */
  polygon: number[];
  provenance: ProvenanceWire;
  damage_label: string | null;
  author: string;
  stage: 'qc1' | 'qc2';
  created_at: number;
}

export interface TransitionRow {
  state: string;
  action: string;
  next: string;
  guards: string[];
}

export interface StageWire {
  image_id: string;
  stage: string;
}

export interface MissedWire {
  image_id: string;
  misses: number;
}

export interface AnnotationExportWire {
  image_id: string;
  annotations: AnnotationWire[];
}

export interface Point {
  x: number;
  y: number;
}

export function polygonPoints(flat: number[]): Point[] {
  const out: Point[] = [];
  for (let i = 0; i + 1 < flat.length; i += 2) {
    out.push({ x: flat[i]!, y: flat[i + 1]! });
  }
  return out;
}
