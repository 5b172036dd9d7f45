// Keyboard-first review: accepting the model's suggestion must cost one
// keystroke, because the whole productivity win lives in interaction cost.
//   Enter  -> convert the selected clue
//   Delete -> dismiss the selected clue
//   Space  -> next image in the queue

import { ReviewController } from './session.js';

export interface KeyboardDeps {
  controller: ReviewController;
  nextImage: () => Promise<void> | void;
}

export type KeyHandler = (key: string) => Promise<boolean>;

export function makeKeyHandler({ controller, nextImage }: KeyboardDeps): KeyHandler {
  return async (key: string): Promise<boolean> => {
    if (key === 'Enter') {
      const clueId = controller.selectedClueId;
      if (!clueId) return false;
      await controller.convertClue(clueId);
      return true;
    }
    if (key === 'Delete' || key === 'Backspace') {
      const clueId = controller.selectedClueId;
      if (!clueId) return false;
      await controller.dismissClue(clueId);
      return true;
    }
    if (key === ' ' || key === 'Space') {
      await nextImage();
      return true;
    }
    return false;
  };
}
