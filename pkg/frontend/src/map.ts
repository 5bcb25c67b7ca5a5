// Canvas slippy-tile map over the artifact grid's local pyramid. The server
// renders every overlay pixel; this layer only places tiles and draws
// vector outlines on top. Stale responses are discarded by job token.

import { ApiClient, GeoJson, Meta } from "./api";

export interface Viewport {
  center: [number, number];
  zoom: number;
}

interface RenderToken {
  jobId: string;
  threshold: number;
  serial: number;
}

export class TileMap {
  private ctx: CanvasRenderingContext2D;
  private serial = 0;
  private cache = new Map<string, HTMLImageElement>();

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly api: ApiClient,
    private readonly meta: Meta,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  /** meters per screen pixel at a pyramid level */
  private scaleAt(zoom: number): number {
    return this.meta.pixel_size * 2 ** (this.meta.max_zoom - zoom);
  }

  worldToScreen(view: Viewport, x: number, y: number): [number, number] {
    const scale = this.scaleAt(view.zoom);
    return [
      this.canvas.width / 2 + (x - view.center[0]) / scale,
      this.canvas.height / 2 - (y - view.center[1]) / scale,
    ];
  }

  screenToWorld(view: Viewport, px: number, py: number): [number, number] {
    const scale = this.scaleAt(view.zoom);
    return [
      view.center[0] + (px - this.canvas.width / 2) * scale,
      view.center[1] - (py - this.canvas.height / 2) * scale,
    ];
  }

  render(view: Viewport, jobId: string | null, threshold: number, buildings?: GeoJson, events?: GeoJson): void {
    const token: RenderToken = { jobId: jobId ?? "", threshold, serial: ++this.serial };
    this.ctx.fillStyle = "#10141a";
    this.ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    this.drawExtent(view);
    if (jobId) this.drawTiles(view, jobId, threshold, token);
    if (buildings) this.drawBuildings(view, buildings);
    if (events) this.drawEvents(view, events);
  }

  private drawExtent(view: Viewport): void {
    const [xmin, ymin, xmax, ymax] = this.meta.extent;
    const [sx0, sy0] = this.worldToScreen(view, xmin, ymax);
    const [sx1, sy1] = this.worldToScreen(view, xmax, ymin);
    this.ctx.strokeStyle = "#3c4a5a";
    this.ctx.strokeRect(sx0, sy0, sx1 - sx0, sy1 - sy0);
  }

  private drawTiles(view: Viewport, jobId: string, threshold: number, token: RenderToken): void {
    const zoom = Math.max(0, Math.min(view.zoom, this.meta.max_zoom));
    const tileMeters = this.meta.tile_size * this.scaleAt(zoom);
    const [xmin, , , ymax] = this.meta.extent;
    const tilesX = Math.ceil((this.meta.width * this.meta.pixel_size) / tileMeters);
    const tilesY = Math.ceil((this.meta.height * this.meta.pixel_size) / tileMeters);
    for (let ty = 0; ty < tilesY; ty++) {
      for (let tx = 0; tx < tilesX; tx++) {
        const west = xmin + tx * tileMeters;
        const north = ymax - ty * tileMeters;
        const [sx, sy] = this.worldToScreen(view, west, north);
        const sizePx = tileMeters / this.scaleAt(view.zoom);
        if (sx + sizePx < 0 || sy + sizePx < 0 || sx > this.canvas.width || sy > this.canvas.height) {
          continue;
        }
        const url = this.api.tileUrl(zoom, tx, ty, jobId, threshold);
        const cached = this.cache.get(url);
        if (cached && cached.complete) {
          this.ctx.drawImage(cached, sx, sy, sizePx, sizePx);
          continue;
        }
        const img = cached ?? new Image();
        if (!cached) {
          img.src = url;
          this.cache.set(url, img);
        }
        img.addEventListener(
          "load",
          () => {
            // a newer render supersedes this one; drop the stale draw
            if (token.serial === this.serial) {
              this.ctx.drawImage(img, sx, sy, sizePx, sizePx);
            }
          },
          { once: true },
        );
      }
    }
  }

  private drawBuildings(view: Viewport, buildings: GeoJson): void {
    for (const feature of buildings.features) {
      if (feature.geometry.type !== "Polygon") continue;
      const rings = feature.geometry.coordinates as [number, number][][];
      const ring = rings[0];
      if (!ring) continue;
      this.ctx.beginPath();
      ring.forEach(([x, y], i) => {
        const [sx, sy] = this.worldToScreen(view, x, y);
        if (i === 0) this.ctx.moveTo(sx, sy);
        else this.ctx.lineTo(sx, sy);
      });
      this.ctx.closePath();
      const predicted = feature.properties["predicted"] === "damaged";
      this.ctx.strokeStyle = predicted ? "#ff5d47" : "#7fd4a0";
      this.ctx.stroke();
    }
  }

  private drawEvents(view: Viewport, events: GeoJson): void {
    for (const feature of events.features) {
      if (feature.geometry.type !== "Point") continue;
      const [x, y] = feature.geometry.coordinates as [number, number];
      const [sx, sy] = this.worldToScreen(view, x, y);
      this.ctx.beginPath();
      this.ctx.arc(sx, sy, 5, 0, Math.PI * 2);
      this.ctx.strokeStyle = "#ffd447";
      this.ctx.stroke();
    }
  }
}
