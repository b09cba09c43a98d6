/** Orders async responses per panel: a response is applied only if no newer
 * request was issued meanwhile, so stale renders never overwrite fresh ones.
 * At most one result lands per issue() call. */
export class RequestSequencer {
  private issued = 0;
  private applied = 0;

  issue(): number {
    return ++this.issued;
  }

  /** True (and records it) if this ticket is newer than anything applied
   * and no newer ticket has been issued. */
  accept(ticket: number): boolean {
    if (ticket !== this.issued || ticket <= this.applied) {
      return false;
    }
    this.applied = ticket;
    return true;
  }

  get inFlight(): boolean {
    return this.issued > this.applied;
  }
}
