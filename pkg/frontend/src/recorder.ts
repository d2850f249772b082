/** Pointer trace capture in native image coordinates.
 *
 * Bursty pointer streams are coalesced to at most one sample per
 * MIN_PERIOD_MS; a heartbeat re-records the latest position while the
 * cursor rests so dwells stay densely sampled. Samples are never
 * interpolated, and nothing is appended once recording stops.
 */

import { Trajectory } from "./schema.js"

const MIN_PERIOD_MS = 1000 / 120 // coalesce ceiling
export const HEARTBEAT_MS = 25 // rest-state sampling, >= 30 Hz effective

export class TraceRecorder {
  readonly imageId: string
  readonly width: number
  readonly height: number
  droppedOutOfBounds = 0

  private points: { t: number; x: number; y: number }[] = []
  private startMs: number | null = null
  private lastT = -1
  private lastPos: { x: number; y: number } | null = null
  private lastSampleMs = -Infinity
  private active = true

  constructor(imageId: string, width: number, height: number) {
    this.imageId = imageId
    this.width = width
    this.height = height
  }

  get sampleCount(): number {
    return this.points.length
  }

  stop(): void {
    this.active = false
  }

  /** Feed one pointer position (image pixels) at wall-clock timeMs. */
  pointer(timeMs: number, x: number, y: number): boolean {
    if (!this.active) return false
    if (x < 0 || x >= this.width || y < 0 || y >= this.height) {
      this.droppedOutOfBounds += 1
      this.lastPos = null // do not let the heartbeat resurrect it
      return false
    }
    this.lastPos = { x, y }
    return this.sample(timeMs, x, y)
  }

  /** Heartbeat hook: re-record the resting position. */
  tick(timeMs: number): boolean {
    if (!this.active || this.lastPos === null) return false
    return this.sample(timeMs, this.lastPos.x, this.lastPos.y)
  }

  private sample(timeMs: number, x: number, y: number): boolean {
    if (timeMs - this.lastSampleMs < MIN_PERIOD_MS) return false
    if (this.startMs === null) this.startMs = timeMs
    const t = Math.round(timeMs - this.startMs)
    if (t <= this.lastT) return false
    this.points.push({ t, x: Math.round(x), y: Math.round(y) })
    this.lastT = t
    this.lastSampleMs = timeMs
    return true
  }

  toTrajectory(): Trajectory {
    return {
      image_id: this.imageId,
      viewport: { w: this.width, h: this.height },
      source: "mouse",
      points: this.points.map((p) => ({ ...p })),
    }
  }
}
