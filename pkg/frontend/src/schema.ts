/** Trajectory record shared with the ingestion service. */

export interface TrajectoryPoint {
  t: number
  x: number
  y: number
}

export interface Trajectory {
  image_id: string
  viewport: { w: number; h: number }
  source: string
  points: TrajectoryPoint[]
}

/** Validate a trajectory record; returns human-readable problems. */
export function validateTrajectory(traj: Trajectory): string[] {
  const errors: string[] = []
  if (!traj.image_id) errors.push("missing image_id")
  if (!traj.viewport || traj.viewport.w <= 0 || traj.viewport.h <= 0) {
    errors.push("bad viewport")
  }
  if (!Array.isArray(traj.points) || traj.points.length === 0) {
    errors.push("no points")
    return errors
  }
  let lastT = -Infinity
  traj.points.forEach((p, i) => {
    if (!Number.isInteger(p.t) || !Number.isInteger(p.x) || !Number.isInteger(p.y)) {
      errors.push(`point ${i} not integer`)
    }
    if (p.t <= lastT) errors.push(`timestamps not strictly increasing at index ${i}`)
    lastT = p.t
    if (p.x < 0 || p.x >= traj.viewport.w || p.y < 0 || p.y >= traj.viewport.h) {
      errors.push(`point ${i} outside viewport`)
    }
  })
  return errors
}
