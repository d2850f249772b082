/** Pan/zoom mapping between native image pixels and canvas pixels.
 *
 * Recorded coordinates are always image-space, so the trace pipeline never
 * sees the viewport; the mapping must round-trip exactly at any zoom.
 */

export interface Point {
  x: number
  y: number
}

const MIN_SCALE = 0.1
const MAX_SCALE = 16

export class ViewTransform {
  scale = 1
  /** Canvas position of image pixel (0, 0). */
  offsetX = 0
  offsetY = 0

  imageToScreen(p: Point): Point {
    return { x: p.x * this.scale + this.offsetX, y: p.y * this.scale + this.offsetY }
  }

  screenToImage(p: Point): Point {
    return { x: (p.x - this.offsetX) / this.scale, y: (p.y - this.offsetY) / this.scale }
  }

  /** Zoom by `factor`, keeping the given screen point fixed. */
  zoomAt(screen: Point, factor: number): void {
    const anchor = this.screenToImage(screen)
    this.scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, this.scale * factor))
    this.offsetX = screen.x - anchor.x * this.scale
    this.offsetY = screen.y - anchor.y * this.scale
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx
    this.offsetY += dy
  }

  /** Center the image in a canvas and fit it fully inside. */
  fit(imageW: number, imageH: number, canvasW: number, canvasH: number): void {
    this.scale = Math.min(canvasW / imageW, canvasH / imageH)
    this.offsetX = (canvasW - imageW * this.scale) / 2
    this.offsetY = (canvasH - imageH * this.scale) / 2
  }
}
