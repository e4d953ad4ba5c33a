/** Fixed-capacity ring buffers holding the most recent samples per channel. */

export class ChannelRings {
  private buffers: Float32Array[] = [];
  private write = 0;
  private filled = 0;

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("capacity must be >= 1");
  }

  get channelCount(): number {
    return this.buffers.length;
  }

  get length(): number {
    return this.filled;
  }

  /** Append one packet's worth of samples (Int16Array per channel). */
  push(samples: ArrayLike<number>[]): void {
    if (this.buffers.length === 0) {
      this.buffers = samples.map(() => new Float32Array(this.capacity));
    } else if (samples.length !== this.buffers.length) {
      // Channel count changed mid-stream: restart cleanly.
      this.buffers = samples.map(() => new Float32Array(this.capacity));
      this.write = 0;
      this.filled = 0;
    }
    const n = samples[0]?.length ?? 0;
    for (let t = 0; t < n; t++) {
      for (let c = 0; c < samples.length; c++) {
        (this.buffers[c] as Float32Array)[this.write] = (samples[c] as ArrayLike<number>)[t] as number;
      }
      this.write = (this.write + 1) % this.capacity;
      if (this.filled < this.capacity) this.filled++;
    }
  }

  /** Most recent samples of one channel, oldest first. */
  channel(c: number): Float32Array {
    const buf = this.buffers[c];
    if (!buf) return new Float32Array(0);
    const out = new Float32Array(this.filled);
    const start = (this.write - this.filled + this.capacity * 2) % this.capacity;
    for (let i = 0; i < this.filled; i++) {
      out[i] = buf[(start + i) % this.capacity] as number;
    }
    return out;
  }

  clear(): void {
    this.buffers = [];
    this.write = 0;
    this.filled = 0;
  }
}
