import type { PlanRequest, RenderParams } from './types';

export type Mode = 'multiplicative' | 'block_randomize';

export interface StudioState {
  mode: Mode;
  alpha: number;        // 0..1, slider
  seed: number;         // 0..10, stepper
  block: string;        // B1..Bn, ENTRY, OUTPUT
  classIndex: number;
  latentSeed: number;
  count: number;
  compareBase: boolean;
  lockedIndex: number | null; // latent index pinned via lock-latent
}

export const SEED_MIN = 0;
export const SEED_MAX = 10;

export function initialState(): StudioState {
  return {
    mode: 'multiplicative',
    alpha: 0.35,
    seed: 0,
    block: 'B2',
    classIndex: 0,
    latentSeed: 0,
    count: 2,
    compareBase: true,
    lockedIndex: null,
  };
}

export function clampSeed(seed: number): number {
  return Math.min(SEED_MAX, Math.max(SEED_MIN, Math.round(seed)));
}

export function planFromState(s: StudioState): PlanRequest {
  if (s.mode === 'block_randomize') {
    return { mode: 'block_randomize', seed: s.seed, blocks: [s.block] };
  }
  return { mode: 'multiplicative', seed: s.seed, alpha: s.alpha };
}

export function renderParamsFromState(s: StudioState): RenderParams {
  return {
    classes: [s.classIndex],
    latent_seed: s.latentSeed,
    count: s.count,
    compare_base: s.compareBase,
  };
}

export function blockChoices(numBlocks: number): string[] {
  const blocks = ['ENTRY'];
  for (let i = 1; i <= numBlocks; i++) blocks.push(`B${i}`);
  blocks.push('OUTPUT');
  return blocks;
}
