// Review session management. One image is on screen at a time; opening it
// emits the stage's open event and navigating away emits the close event,
// which is exactly what the per-picture QC timers measure. Every analyst
// action is a single API call; the UI state is updated optimistically and
// rolled back (plus refreshed) when the server refuses.

import { ApiError, QcApiClient } from './api.js';
import type { AnnotationWire, ClueWire, TransitionRow } from './types.js';

export type QcStage = 1 | 2;

export interface ViewSession {
  imageId: string;
  stage: QcStage;
  openedAt: number;
}

export interface ControllerOptions {
  clock?: () => number;
  onToast?: (message: string) => void;
  /** Loads the inspection picture; rejects when unfetchable. */
  imageLoader?: (imageId: string) => Promise<unknown>;
}

export class SessionError extends Error {}

export class ReviewController {
  session: ViewSession | null = null;
  clues: ClueWire[] = [];
  annotations: AnnotationWire[] = [];
  imageError: string | null = null;
  selectedClueId: string | null = null;

  private readonly clock: () => number;
  private readonly onToast: (message: string) => void;
  private readonly imageLoader: (imageId: string) => Promise<unknown>;
  private transitions: TransitionRow[] | null = null;
  private stageByImage = new Map<string, string>();
  private missesByImage = new Map<string, number>();

  constructor(
    private readonly api: QcApiClient,
    options: ControllerOptions = {},
  ) {
    this.clock = options.clock ?? (() => Date.now());
    this.onToast = options.onToast ?? (() => undefined);
    this.imageLoader = options.imageLoader ?? (async () => undefined);
  }

  // ------------------------------------------------------------ session

  /** Open an image for review. Closes any previous session first (one open
   *  session per analyst); emits no timer event if the picture itself
   *  cannot be fetched. */
  async openImage(imageId: string, stage: QcStage): Promise<void> {
    if (this.session) {
      await this.closeSession();
    }
    this.imageError = null;
    try {
      await this.imageLoader(imageId);
    } catch (err) {
      this.imageError = `image ${imageId} could not be loaded: ${String(err)}`;
      return;
    }
    const [clues, annotations] = await Promise.all([
      this.api.getClues(imageId),
      this.api.getAnnotations(imageId),
    ]);
    const state = await this.api.qcOpen(imageId, stage, this.clock());
    this.stageByImage.set(imageId, state.stage);
    this.session = { imageId, stage, openedAt: this.clock() };
    this.clues = clues;
    this.annotations = annotations;
    this.selectedClueId = clues.find((c) => c.status === 'proposed')?.id ?? null;
  }

  /** Navigate away: close the stage timer and drop the session. */
  async closeSession(): Promise<void> {
    const session = this.requireSession();
    const state = await this.api.qcClose(session.imageId, session.stage, this.clock());
    this.stageByImage.set(session.imageId, state.stage);
    this.session = null;
    this.clues = [];
    this.annotations = [];
    this.selectedClueId = null;
  }

  /** Mark the stage finished for an image; requires its session closed. */
  async completeStage(imageId: string, stage: QcStage): Promise<void> {
    if (this.session && this.session.imageId === imageId) {
      throw new SessionError('close the session before completing the stage');
    }
    const state = await this.api.qcComplete(imageId, stage);
    this.stageByImage.set(imageId, state.stage);
  }

  private requireSession(): ViewSession {
    if (!this.session) {
      throw new SessionError('no image is open');
    }
    return this.session;
  }

  // ------------------------------------------------------------- actions

  /** Accept a clue as-is, or with an analyst-edited polygon. Unedited
   *  conversions send no geometry at all: the server reuses the clue's
   *  corners, so the annotation round-trips bit-identically. */
  async convertClue(clueId: string, editedPolygon?: number[]): Promise<AnnotationWire> {
    const session = this.requireSession();
    const clue = this.clueById(clueId);
    const previous = clue.status;
    clue.status = editedPolygon ? 'modified' : 'converted';
    try {
      const annotation = await this.api.convertClue(session.imageId, clueId, {
        polygon: editedPolygon,
        timestamp: this.clock(),
      });
      this.annotations.push(annotation);
      this.advanceSelection();
      return annotation;
    } catch (err) {
      clue.status = previous;
      await this.recoverFrom(err, session.imageId);
      throw err;
    }
  }

  async dismissClue(clueId: string): Promise<void> {
    const session = this.requireSession();
    const clue = this.clueById(clueId);
    const previous = clue.status;
    clue.status = 'dismissed';
    try {
      await this.api.dismissClue(session.imageId, clueId, { timestamp: this.clock() });
      this.advanceSelection();
    } catch (err) {
      clue.status = previous;
      await this.recoverFrom(err, session.imageId);
      throw err;
    }
  }

  async drawAnnotation(polygon: number[], damageLabel?: string): Promise<AnnotationWire> {
    const session = this.requireSession();
    const annotation = await this.api.drawAnnotation(session.imageId, polygon, {
      timestamp: this.clock(),
      damage_label: damageLabel,
    });
    this.annotations.push(annotation);
    return annotation;
  }

  async approveAnnotation(annotationId: string): Promise<void> {
    const session = this.requireSession();
    await this.api.approveAnnotation(session.imageId, annotationId, this.clock());
  }

  /** QC2: record a damage the first pass missed. */
  async flagMissed(note?: string): Promise<number> {
    const session = this.requireSession();
    const result = await this.api.flagMissed(session.imageId, {
      timestamp: this.clock(),
      note,
    });
    this.missesByImage.set(session.imageId, result.misses);
    return result.misses;
  }

  missCount(imageId: string): number {
    return this.missesByImage.get(imageId) ?? 0;
  }

  jobMissCount(): number {
    let total = 0;
    for (const count of this.missesByImage.values()) total += count;
    return total;
  }

  // ------------------------------------------------------------- helpers

  private clueById(clueId: string): ClueWire {
    const clue = this.clues.find((c) => c.id === clueId);
    if (!clue) {
      throw new SessionError(`clue ${clueId} is not in the open image`);
    }
    return clue;
  }

  private advanceSelection(): void {
    this.selectedClueId = this.clues.find((c) => c.status === 'proposed')?.id ?? null;
  }

  private async recoverFrom(err: unknown, imageId: string): Promise<void> {
    if (err instanceof ApiError && err.staleState) {
      this.onToast(err.message);
      // our optimistic view diverged; trust the server again
      this.clues = await this.api.getClues(imageId);
      this.annotations = await this.api.getAnnotations(imageId);
      this.advanceSelection();
    }
  }

  // ------------------------------------------- transition-table gating

  async loadTransitions(): Promise<void> {
    this.transitions = (await this.api.getTransitions()).transitions;
  }

  /** False only when the published table provably forbids the action for
   *  the image's last known state; unknown states leave the server as the
   *  arbiter. Used to disable buttons client-side. */
  actionAllowed(imageId: string, action: string): boolean {
    if (!this.transitions) return true;
    const state = this.stageByImage.get(imageId);
    if (!state) return true;
    return this.transitions.some((row) => row.state === state && row.action === action);
  }
}
