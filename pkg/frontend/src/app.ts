import { ApiClient } from './api';
import { debounce } from './debounce';
import { RequestSequencer } from './sequencer';
import {
  StudioState,
  blockChoices,
  clampSeed,
  initialState,
  planFromState,
  renderParamsFromState,
} from './state';
import type { GridInfo, Pick } from './types';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function provenanceSummary(pick: Pick): string {
  const plans = pick.provenance.variants
    .map((v) => v.plan ?? `base (${v.label})`)
    .join('\n');
  return [
    `tile [${pick.tile[0]}, ${pick.tile[1]}] of grid ${pick.grid_id}`,
    `latent_seed=${pick.provenance.latent_seed} latent_index=${pick.provenance.latent_index}`,
    `classes=${pick.provenance.classes.join(',')}`,
    plans,
  ].join('\n');
}

export class StudioApp {
  private state: StudioState = initialState();
  private sessionId = '';
  private lastGrid: GridInfo | null = null;
  private readonly sequencer = new RequestSequencer();
  private readonly planDebounce = debounce(() => void this.applyAndRender(), 150);

  constructor(private readonly api: ApiClient, private readonly doc: Document = document) {}

  async start(): Promise<void> {
    const session = await this.api.createSession();
    this.sessionId = session.session_id;

    const classPicker = el<HTMLSelectElement>('class-picker');
    for (let c = 0; c < session.num_classes; c++) {
      const opt = this.doc.createElement('option');
      opt.value = String(c);
      opt.textContent = `class ${c}`;
      classPicker.appendChild(opt);
    }
    const blockPicker = el<HTMLSelectElement>('block-picker');
    for (const b of blockChoices(session.num_blocks)) {
      const opt = this.doc.createElement('option');
      opt.value = b;
      opt.textContent = b;
      blockPicker.appendChild(opt);
    }
    blockPicker.value = this.state.block;

    this.wireControls();
    await this.applyAndRender();
  }

  private wireControls(): void {
    const alpha = el<HTMLInputElement>('alpha-slider');
    alpha.value = String(this.state.alpha);
    this.updateAlphaLabel();
    alpha.addEventListener('input', () => {
      this.state.alpha = Number(alpha.value);
      this.updateAlphaLabel();
      this.planDebounce.request(); // coalesce while dragging
    });
    alpha.addEventListener('change', () => this.planDebounce.flush());

    el<HTMLButtonElement>('seed-down').addEventListener('click', () => this.stepSeed(-1));
    el<HTMLButtonElement>('seed-up').addEventListener('click', () => this.stepSeed(1));

    const mode = el<HTMLSelectElement>('mode-picker');
    mode.addEventListener('change', () => {
      this.state.mode = mode.value === 'block_randomize' ? 'block_randomize' : 'multiplicative';
      this.doc.body.classList.toggle('mode-blocks', this.state.mode === 'block_randomize');
      this.planDebounce.flush();
      this.planDebounce.request();
    });

    el<HTMLSelectElement>('block-picker').addEventListener('change', (ev) => {
      this.state.block = (ev.target as HTMLSelectElement).value;
      this.planDebounce.request();
    });

    el<HTMLSelectElement>('class-picker').addEventListener('change', (ev) => {
      this.state.classIndex = Number((ev.target as HTMLSelectElement).value);
      this.planDebounce.request();
    });

    const compare = el<HTMLInputElement>('compare-toggle');
    compare.checked = this.state.compareBase;
    compare.addEventListener('change', () => {
      this.state.compareBase = compare.checked;
      this.planDebounce.request();
    });

    const lock = el<HTMLInputElement>('lock-toggle');
    lock.addEventListener('change', () => {
      void this.toggleLock(lock.checked);
    });

    el<HTMLButtonElement>('sweep-button').addEventListener('click', () => {
      void this.renderBlockSweep();
    });
    el<HTMLButtonElement>('save-button').addEventListener('click', () => {
      void this.savePick();
    });
  }

  private updateAlphaLabel(): void {
    el<HTMLSpanElement>('alpha-value').textContent = this.state.alpha.toFixed(2);
  }

  private stepSeed(delta: number): void {
    this.state.seed = clampSeed(this.state.seed + delta);
    el<HTMLSpanElement>('seed-value').textContent = String(this.state.seed);
    this.planDebounce.request();
  }

  private async toggleLock(locked: boolean): Promise<void> {
    if (locked) {
      this.state.lockedIndex = 0;
      await this.api.lockLatent(this.sessionId, this.state.latentSeed, 0);
    } else {
      this.state.lockedIndex = null;
      await this.api.unlockLatent(this.sessionId);
    }
    this.planDebounce.request();
  }

  /** Set the current plan and render; stale responses are dropped. */
  async applyAndRender(): Promise<void> {
    const ticket = this.sequencer.issue();
    const status = el<HTMLSpanElement>('status');
    status.textContent = 'rendering...';
    try {
      await this.api.setPlan(this.sessionId, planFromState(this.state));
      const grid = await this.api.render(this.sessionId, renderParamsFromState(this.state));
      if (!this.sequencer.accept(ticket)) return; // a newer request superseded this one
      this.lastGrid = grid;
      const img = el<HTMLImageElement>('grid-image');
      img.src = this.api.gridUrl(grid.grid_id);
      img.dataset.gridId = grid.grid_id;
      status.textContent = `grid ${grid.rows}x${grid.cols} (${grid.columns.join(' | ')})`;
    } catch (err) {
      if (this.sequencer.accept(ticket)) {
        status.textContent = String(err);
      }
    }
  }

  /** One randomized block per panel, side by side, same inputs everywhere. */
  async renderBlockSweep(): Promise<void> {
    const container = el<HTMLDivElement>('sweep-row');
    container.textContent = '';
    const blocks = blockChoices(Number(el<HTMLSelectElement>('block-picker').childElementCount) - 2)
      .filter((b) => b.startsWith('B'));
    for (const block of blocks) {
      await this.api.setPlan(this.sessionId, {
        mode: 'block_randomize',
        seed: this.state.seed,
        blocks: [block],
      });
      const grid = await this.api.render(this.sessionId, {
        classes: [this.state.classIndex],
        latent_seed: this.state.latentSeed,
        count: 1,
        compare_base: false,
      });
      const fig = this.doc.createElement('figure');
      const img = this.doc.createElement('img');
      img.src = this.api.gridUrl(grid.grid_id);
      img.alt = `block ${block} randomized`;
      const cap = this.doc.createElement('figcaption');
      cap.textContent = block;
      fig.appendChild(img);
      fig.appendChild(cap);
      container.appendChild(fig);
    }
    // restore the panel's own plan afterwards
    await this.api.setPlan(this.sessionId, planFromState(this.state));
  }

  async savePick(): Promise<void> {
    if (!this.lastGrid) return;
    const pick = await this.api.savePick(this.sessionId, this.lastGrid.grid_id, 0, 0);
    this.appendGalleryItem(pick);
  }

  private appendGalleryItem(pick: Pick): void {
    const gallery = el<HTMLDivElement>('gallery');
    const img = this.doc.createElement('img');
    img.src = this.api.gridUrl(pick.grid_id);
    img.title = provenanceSummary(pick); // provenance on hover
    img.className = 'pick';
    gallery.appendChild(img);
  }

  async loadGallery(): Promise<void> {
    for (const pick of await this.api.gallery()) {
      this.appendGalleryItem(pick);
    }
  }
}

export { provenanceSummary };
