/** Browser glue: canvas viewer with zoom/pan, live trace capture, overlay
 * review, and label submission. All coordinate math and session logic live
 * in the imported modules; this file only wires DOM events.
 */

import { ViewTransform } from "./transform.js"
import { CaptureSession, httpClient, IngestResponse } from "./session.js"
import { HEARTBEAT_MS } from "./recorder.js"

const params = new URLSearchParams(window.location.search)
const imageId = params.get("image") ?? "demo"
const serverUrl = params.get("server") ?? ""

const canvas = document.getElementById("viewer") as HTMLCanvasElement
const ctx = canvas.getContext("2d")!
const hud = document.getElementById("hud")!
const banner = document.getElementById("banner")!
const submitBtn = document.getElementById("submit") as HTMLButtonElement
const labelBox = document.getElementById("labels")!
const opacity = document.getElementById("opacity") as HTMLInputElement

const view = new ViewTransform()
let session: CaptureSession | null = null
let image: HTMLImageElement | null = null
let overlay: HTMLImageElement | null = null
let panning = false
let lastPan = { x: 0, y: 0 }

function draw() {
  ctx.fillStyle = "#14161a"
  ctx.fillRect(0, 0, canvas.width, canvas.height)
  if (!image) return
  ctx.imageSmoothingEnabled = view.scale < 1
  const origin = view.imageToScreen({ x: 0, y: 0 })
  ctx.drawImage(image, origin.x, origin.y, image.width * view.scale, image.height * view.scale)
  if (overlay && session?.state !== "reading") {
    ctx.globalAlpha = Number(opacity.value)
    ctx.drawImage(overlay, origin.x, origin.y, image.width * view.scale, image.height * view.scale)
    ctx.globalAlpha = 1
  }
}

function status(extra = "") {
  if (!session) return
  const r = session.recorder
  hud.textContent =
    `${session.state} | samples ${r.sampleCount} | out-of-bounds ${r.droppedOutOfBounds}` +
    (extra ? ` | ${extra}` : "")
}

function showBanner(text: string, retry: boolean) {
  banner.textContent = text
  banner.style.display = "block"
  if (retry) {
    const btn = document.createElement("button")
    btn.textContent = "retry"
    btn.onclick = () => {
      banner.style.display = "none"
      void doSubmit()
    }
    banner.appendChild(btn)
  }
}

async function doSubmit() {
  if (!session) return
  submitBtn.disabled = true
  try {
    const result: IngestResponse = await session.submit()
    overlay = new Image()
    overlay.onload = draw
    overlay.src = `${serverUrl}/overlay/${imageId}/${session.sessionId}?t=${Date.now()}`
    labelBox.style.display = "block"
    status(`stay points ${result.stay_points}`)
  } catch (err) {
    showBanner(`submit failed, data kept locally: ${err}`, true)
    submitBtn.disabled = false
    status()
  }
}

async function start() {
  image = new Image()
  image.src = `${serverUrl}/images/${imageId}`
  await image.decode()
  view.fit(image.width, image.height, canvas.width, canvas.height)

  session = new CaptureSession(
    `ui-${Date.now()}-${Math.floor(Math.random() * 1e6)}`,
    imageId,
    image.width,
    image.height,
    httpClient(serverUrl),
    window.localStorage,
  )

  canvas.addEventListener("pointermove", (ev) => {
    const rect = canvas.getBoundingClientRect()
    const screen = { x: ev.clientX - rect.left, y: ev.clientY - rect.top }
    if (panning) {
      view.panBy(screen.x - lastPan.x, screen.y - lastPan.y)
      lastPan = screen
      draw()
      return
    }
    const img = view.screenToImage(screen)
    session!.pointer(performance.now(), img.x, img.y)
    status()
  })
  canvas.addEventListener("pointerdown", (ev) => {
    if (ev.button === 1 || ev.button === 2 || ev.shiftKey) {
      panning = true
      const rect = canvas.getBoundingClientRect()
      lastPan = { x: ev.clientX - rect.left, y: ev.clientY - rect.top }
    }
  })
  window.addEventListener("pointerup", () => (panning = false))
  canvas.addEventListener("contextmenu", (ev) => ev.preventDefault())
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault()
    const rect = canvas.getBoundingClientRect()
    view.zoomAt(
      { x: ev.clientX - rect.left, y: ev.clientY - rect.top },
      ev.deltaY < 0 ? 1.15 : 1 / 1.15,
    )
    draw()
  })

  window.setInterval(() => {
    session!.tick(performance.now())
    status()
  }, HEARTBEAT_MS)

  submitBtn.onclick = () => void doSubmit()
  opacity.oninput = draw
  for (const btn of labelBox.querySelectorAll("button")) {
    btn.addEventListener("click", async () => {
      const label = Number((btn as HTMLButtonElement).dataset.label)
      await session!.setLabel(label)
      labelBox.style.display = "none"
      status("label saved, session closed")
    })
  }
  draw()
  status()
}

void start()
