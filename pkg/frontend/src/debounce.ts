export interface Debounced {
  request: () => void;
  flush: () => void;
  dispose: () => void;
}

/** Trailing-edge debounce: bursts of request() coalesce into one call after
 * delayMs of quiet. flush() fires a pending call immediately. */
export function debounce(fn: () => void, delayMs = 150): Debounced {
  let timer: ReturnType<typeof setTimeout> | null = null;
  const request = () => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn();
    }, delayMs);
  };
  const flush = () => {
    if (timer === null) return;
    clearTimeout(timer);
    timer = null;
    fn();
  };
  const dispose = () => {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
    }
  };
  return { request, flush, dispose };
}
