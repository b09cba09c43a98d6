import type {
  GridInfo,
  Pick,
  PlanRequest,
  Provenance,
  RenderParams,
  SessionInfo,
} from './types';

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = `${resp.status}`;
    try {
      const body = await resp.json();
      detail = body.message ? `${body.code}: ${body.message} ${body.detail ?? ''}` : detail;
    } catch {
      // non-JSON error body, keep the status text
    }
    throw new Error(`request failed: ${detail}`);
  }
  return resp.json() as Promise<T>;
}

/** Thin client for the exploration service. The UI never computes pixels;
 * every image it shows is fetched from these endpoints. */
export class ApiClient {
  constructor(private baseUrl = '') {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(): Promise<SessionInfo> {
    return asJson(await fetch(this.url('/sessions'), { method: 'POST' }));
  }

  async setPlan(sessionId: string, plan: PlanRequest): Promise<string> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/plan`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(plan),
    });
    const body = await asJson<{ plan_id: string }>(resp);
    return body.plan_id;
  }

  async render(sessionId: string, params: RenderParams): Promise<GridInfo> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/render`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(params),
    });
    return asJson(resp);
  }

  gridUrl(gridId: string): string {
    return this.url(`/grids/${gridId}.png`);
  }

  async provenance(gridId: string): Promise<Provenance> {
    return asJson(await fetch(this.url(`/grids/${gridId}/provenance`)));
  }

  async lockLatent(sessionId: string, latentSeed: number, index: number): Promise<void> {
    await asJson(await fetch(this.url(`/sessions/${sessionId}/lock-latent`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ latent_seed: latentSeed, index }),
    }));
  }

  async unlockLatent(sessionId: string): Promise<void> {
    await asJson(await fetch(this.url(`/sessions/${sessionId}/unlock-latent`), {
      method: 'POST',
    }));
  }

  async savePick(sessionId: string, gridId: string, row: number, col: number): Promise<Pick> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/save`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ grid_id: gridId, tile: [row, col] }),
    });
    return asJson(resp);
  }

  async gallery(): Promise<Pick[]> {
    return asJson(await fetch(this.url('/gallery')));
  }
}
