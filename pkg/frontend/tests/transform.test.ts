import { describe, expect, it } from "vitest"

import { ViewTransform } from "../src/transform"

describe("screen/image round trip", () => {
  it("is identity within 0.5 px across zoom levels 0.5x to 4x", () => {
    for (const zoom of [0.5, 0.75, 1, 1.5, 2, 3, 4]) {
      const view = new ViewTransform()
      view.scale = zoom
      view.offsetX = 13.7
      view.offsetY = -41.2
      for (let i = 0; i < 200; i++) {
        const p = { x: (i * 7.13) % 1024, y: (i * 3.71) % 768 }
        const back = view.screenToImage(view.imageToScreen(p))
        expect(Math.abs(back.x - p.x)).toBeLessThan(0.5)
        expect(Math.abs(back.y - p.y)).toBeLessThan(0.5)
        const fwd = view.imageToScreen(view.screenToImage(p))
        expect(Math.abs(fwd.x - p.x)).toBeLessThan(0.5)
        expect(Math.abs(fwd.y - p.y)).toBeLessThan(0.5)
      }
    }
  })

  it("keeps the anchor point fixed while zooming", () => {
    const view = new ViewTransform()
    view.fit(512, 512, 1024, 768)
    const anchor = { x: 300, y: 200 }
    const before = view.screenToImage(anchor)
    view.zoomAt(anchor, 2.0)
    const after = view.screenToImage(anchor)
    expect(Math.abs(after.x - before.x)).toBeLessThan(1e-9)
    expect(Math.abs(after.y - before.y)).toBeLessThan(1e-9)
  })

  it("clamps zoom to sane bounds", () => {
    const view = new ViewTransform()
    for (let i = 0; i < 50; i++) view.zoomAt({ x: 0, y: 0 }, 10)
    expect(view.scale).toBeLessThanOrEqual(16)
    for (let i = 0; i < 100; i++) view.zoomAt({ x: 0, y: 0 }, 0.1)
    expect(view.scale).toBeGreaterThanOrEqual(0.1)
  })

  it("fit centers the image", () => {
    const view = new ViewTransform()
    view.fit(100, 200, 1000, 400)
    const topLeft = view.imageToScreen({ x: 0, y: 0 })
    const bottomRight = view.imageToScreen({ x: 100, y: 200 })
    expect(topLeft.y).toBeCloseTo(0)
    expect(bottomRight.y).toBeCloseTo(400)
    expect(topLeft.x).toBeCloseTo(1000 / 2 - 100)
    expect(bottomRight.x).toBeCloseTo(1000 / 2 + 100)
  })
})
