import { describe, expect, it } from 'vitest';

import { RequestSequencer } from '../src/sequencer';

describe('RequestSequencer', () => {
  it('accepts the latest ticket', () => {
    const seq = new RequestSequencer();
    const t = seq.issue();
    expect(seq.accept(t)).toBe(true);
  });

  it('discards a stale response that arrives after a newer request', () => {
    const seq = new RequestSequencer();
    const slow = seq.issue();
    const fast = seq.issue();
    expect(seq.accept(fast)).toBe(true);
    expect(seq.accept(slow)).toBe(false); // late arrival of the old render
  });

  it('discards an outdated ticket even before the newer response lands', () => {
    const seq = new RequestSequencer();
    const first = seq.issue();
    seq.issue();
    expect(seq.accept(first)).toBe(false);
  });

  it('never applies the same ticket twice', () => {
    const seq = new RequestSequencer();
    const t = seq.issue();
    expect(seq.accept(t)).toBe(true);
    expect(seq.accept(t)).toBe(false);
  });

  it('tracks in-flight state', () => {
    const seq = new RequestSequencer();
    expect(seq.inFlight).toBe(false);
    const t = seq.issue();
    expect(seq.inFlight).toBe(true);
    seq.accept(t);
    expect(seq.inFlight).toBe(false);
  });
});
