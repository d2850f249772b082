/** Drive the recorder with a scripted two-dwell reading path and print the
 * exported trajectory JSON. Used by the cross-component round-trip check:
 * the output must ingest cleanly and yield the same stay points as the
 * command-line extractor.
 *
 * Usage: node dist/scripted_export.js [size]
 */

import { TraceRecorder, HEARTBEAT_MS } from "./recorder.js"
import { validateTrajectory } from "./schema.js"

const size = Number(process.argv[2] ?? 400)
const recorder = new TraceRecorder("scripted-image", size, size)

let clock = 1000 // arbitrary wall-clock origin
const dwell = (x: number, y: number, ms: number) => {
  recorder.pointer(clock, x, y)
  const end = clock + ms
  while (clock < end) {
    clock += HEARTBEAT_MS
    recorder.tick(clock)
  }
}
const travel = (x0: number, y0: number, x1: number, y1: number, steps: number) => {
  for (let s = 1; s <= steps; s++) {
    clock += HEARTBEAT_MS
    recorder.pointer(clock, x0 + ((x1 - x0) * s) / (steps + 1), y0 + ((y1 - y0) * s) / (steps + 1))
  }
  clock += HEARTBEAT_MS
}

const a = { x: Math.round(size * 0.3), y: Math.round(size * 0.35) }
const b = { x: Math.round(size * 0.7), y: Math.round(size * 0.6) }
dwell(a.x, a.y, 600)
travel(a.x, a.y, b.x, b.y, 2)
dwell(b.x, b.y, 600)

const traj = recorder.toTrajectory()
const problems = validateTrajectory(traj)
if (problems.length > 0) {
  console.error("exported trajectory is invalid:", problems)
  process.exit(1)
}
console.log(JSON.stringify(traj))
