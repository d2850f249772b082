/** Capture session state machine: reading -> reviewing -> submitted.
 *
 * Recording happens only while reading. Submission posts the trajectory,
 * then the derived overlay is reviewed and a label chosen. A failed post
 * keeps the session in local storage so the tab can crash and recover.
 */

import { TraceRecorder } from "./recorder.js"
import { Trajectory } from "./schema.js"

export type SessionState = "reading" | "reviewing" | "submitted"

export interface IngestResponse {
  session_id: string
  image_id: string
  stay_points: number
  stays: number[][]
  map_path: string
}

export interface ServerClient {
  ingest(record: {
    session_id: string
    image_id: string
    trajectory: Trajectory
  }): Promise<IngestResponse>
  label(sessionId: string, label: number): Promise<void>
}

export interface KeyValueStore {
  getItem(key: string): string | null
  setItem(key: string, value: string): void
  removeItem(key: string): void
}

const STORE_PREFIX = "cogcad-pending:"

export class CaptureSession {
  readonly sessionId: string
  readonly recorder: TraceRecorder
  state: SessionState = "reading"
  ingestResult: IngestResponse | null = null
  lastError: string | null = null

  private client: ServerClient
  private storage: KeyValueStore | null

  constructor(
    sessionId: string,
    imageId: string,
    width: number,
    height: number,
    client: ServerClient,
    storage: KeyValueStore | null = null,
  ) {
    this.sessionId = sessionId
    this.recorder = new TraceRecorder(imageId, width, height)
    this.client = client
    this.storage = storage
  }

  pointer(timeMs: number, x: number, y: number): boolean {
    if (this.state !== "reading") return false
    return this.recorder.pointer(timeMs, x, y)
  }

  tick(timeMs: number): boolean {
    if (this.state !== "reading") return false
    return this.recorder.tick(timeMs)
  }

  /** Post the trajectory; on success recording stops and review begins. */
  async submit(): Promise<IngestResponse> {
    if (this.state !== "reading") throw new Error(`cannot submit while ${this.state}`)
    if (this.recorder.sampleCount === 0) throw new Error("no samples recorded")
    const record = {
      session_id: this.sessionId,
      image_id: this.recorder.imageId,
      trajectory: this.recorder.toTrajectory(),
    }
    try {
      const result = await this.client.ingest(record)
      this.recorder.stop()
      this.state = "reviewing"
      this.ingestResult = result
      this.lastError = null
      this.storage?.removeItem(STORE_PREFIX + this.sessionId)
      return result
    } catch (err) {
      this.lastError = String(err)
      this.storage?.setItem(STORE_PREFIX + this.sessionId, JSON.stringify(record))
      throw err
    }
  }

  /** Attach the diagnosis label, finishing the session. */
  async setLabel(label: number): Promise<void> {
    if (this.state !== "reviewing") throw new Error(`cannot label while ${this.state}`)
    await this.client.label(this.sessionId, label)
    this.state = "submitted"
  }
}

/** Pending (unsubmitted) records left behind by crashed or offline tabs. */
export function pendingRecords(storage: KeyValueStore, knownKeys: string[]): object[] {
  const out: object[] = []
  for (const key of knownKeys) {
    if (!key.startsWith(STORE_PREFIX)) continue
    const raw = storage.getItem(key)
    if (raw) out.push(JSON.parse(raw))
  }
  return out
}

/** Default client speaking to the ingestion service over fetch. */
export function httpClient(baseUrl: string): ServerClient {
  return {
    async ingest(record) {
      const resp = await fetch(`${baseUrl}/sessions`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(record),
      })
      const body = await resp.json()
      if (!resp.ok) {
        const detail = body?.error
          ? `${body.error.code}: ${body.error.message}` +
            (body.error.index !== undefined ? ` (index ${body.error.index})` : "")
          : `HTTP ${resp.status}`
        throw new Error(detail)
      }
      return body as IngestResponse
    },
    async label(sessionId, label) {
      const resp = await fetch(`${baseUrl}/sessions/${sessionId}/label`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ label }),
      })
      if (!resp.ok) throw new Error(`HTTP ${resp.status}`)
    },
  }
}
