/** A/B playback of original versus processed audio.
 *
 * Both tracks render the same clip, so a meaningful comparison needs the
 * switch to preserve the playback position: toggling seeks the incoming
 * track to the outgoing track's position before swapping which one is
 * audible.
 */

export class AbPlayer {
  active: "original" | "processed" = "processed";

  constructor(
    readonly original: HTMLAudioElement,
    readonly processed: HTMLAudioElement,
  ) {
    this.original.preload = "auto";
    this.processed.preload = "auto";
  }

  private current(): HTMLAudioElement {
    return this.active === "original" ? this.original : this.processed;
  }

  private other(): HTMLAudioElement {
    return this.active === "original" ? this.processed : this.original;
  }

  setSources(originalUrl: string, processedUrl: string): void {
    const wasPlaying = !this.current().paused;
    const position = this.current().currentTime;
    if (this.original.src !== originalUrl) {
      this.original.src = originalUrl;
    }
    if (this.processed.src !== processedUrl) {
      this.processed.src = processedUrl;
      // a fresh trial starts the comparison from the top
      this.safeSeek(this.processed, 0);
      this.safeSeek(this.original, 0);
      return;
    }
    this.safeSeek(this.current(), position);
    if (wasPlaying) {
      void this.current().play()?.catch(() => undefined);
    }
  }

  /** Swap which track is audible, keeping the position aligned. */
  toggle(): "original" | "processed" {
    const from = this.current();
    const to = this.other();
    const position = from.currentTime;
    const wasPlaying = !from.paused;
    from.pause();
    this.safeSeek(to, position);
    this.active = this.active === "original" ? "processed" : "original";
    if (wasPlaying) {
      void to.play()?.catch(() => undefined);
    }
    return this.active;
  }

  play(): void {
    void this.current().play()?.catch(() => undefined);
  }

  pause(): void {
    this.current().pause();
  }

  private safeSeek(el: HTMLAudioElement, position: number): void {
    try {
      el.currentTime = position;
    } catch {
      // headless test media elements reject seeking; position sync is
      // best effort there
    }
  }
}
