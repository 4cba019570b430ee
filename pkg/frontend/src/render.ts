// Canvas rendering: strain heatmap with a fixed color scale, the 2% safe
// contour, and the trajectory overlays.

import { MapSlice } from "./protocol.js";
import { Point, ViewModel } from "./viewmodel.js";

export const COLOR_SCALE_MAX = 15; // percent strain at the top of the scale
export const SAFE_CONTOUR = 2.0; // percent

// compact perceptually-ordered ramp (dark blue -> green -> yellow)
const RAMP: [number, number, number][] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function colorFor(value: number): [number, number, number] {
  const x = Math.min(Math.max(value / COLOR_SCALE_MAX, 0), 1) * (RAMP.length - 1);
  const i = Math.min(Math.floor(x), RAMP.length - 2);
  const f = x - i;
  return [
    Math.round(RAMP[i][0] + f * (RAMP[i + 1][0] - RAMP[i][0])),
    Math.round(RAMP[i][1] + f * (RAMP[i + 1][1] - RAMP[i][1])),
    Math.round(RAMP[i][2] + f * (RAMP[i + 1][2] - RAMP[i][2])),
  ];
}

export interface Transform {
  toCanvas(p: Point): [number, number];
  toMap(x: number, y: number): Point;
}

export function makeTransform(
  map: MapSlice,
  width: number,
  height: number,
): Transform {
  const [peMin, peMax] = map.peRange;
  const [seMin, seMax] = map.seRange;
  return {
    toCanvas(p: Point): [number, number] {
      const x = ((p.pe - peMin) / (peMax - peMin)) * width;
      const y = height - ((p.se - seMin) / (seMax - seMin)) * height;
      return [x, y];
    },
    toMap(x: number, y: number): Point {
      return {
        pe: peMin + (x / width) * (peMax - peMin),
        se: seMin + ((height - y) / height) * (seMax - seMin),
      };
    },
  };
}

export function heatmapImage(map: MapSlice, greyed: boolean): ImageData {
  const [rows, cols] = map.shape;
  const img = new ImageData(cols, rows);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      // row 0 of the grid is the lowest elevation: flip vertically
      const value = map.values[(rows - 1 - r) * cols + c];
      const [red, green, blue] = colorFor(value);
      const k = (r * cols + c) * 4;
      if (greyed) {
        const mean = Math.round((red + green + blue) / 3);
        img.data[k] = mean;
        img.data[k + 1] = mean;
        img.data[k + 2] = mean;
      } else {
        img.data[k] = red;
        img.data[k + 1] = green;
        img.data[k + 2] = blue;
      }
      img.data[k + 3] = 255;
    }
  }
  return img;
}

// marching-squares segments of the safe contour, in map coordinates
export function safeContourSegments(map: MapSlice): [Point, Point][] {
  const [rows, cols] = map.shape;
  const [peMin, peMax] = map.peRange;
  const [seMin, seMax] = map.seRange;
  const dPe = (peMax - peMin) / (cols - 1);
  const dSe = (seMax - seMin) / (rows - 1);
  const value = (r: number, c: number) => map.values[r * cols + c];
  const segments: [Point, Point][] = [];

  const interp = (
    a: number,
    b: number,
    pa: Point,
    pb: Point,
  ): Point => {
    const f = (SAFE_CONTOUR - a) / (b - a);
    return { pe: pa.pe + f * (pb.pe - pa.pe), se: pa.se + f * (pb.se - pa.se) };
  };

  for (let r = 0; r < rows - 1; r++) {
    for (let c = 0; c < cols - 1; c++) {
      const corners = [
        value(r, c),
        value(r, c + 1),
        value(r + 1, c + 1),
        value(r + 1, c),
      ];
      const points: Point[] = [
        { pe: peMin + c * dPe, se: seMin + r * dSe },
        { pe: peMin + (c + 1) * dPe, se: seMin + r * dSe },
        { pe: peMin + (c + 1) * dPe, se: seMin + (r + 1) * dSe },
        { pe: peMin + c * dPe, se: seMin + (r + 1) * dSe },
      ];
      const crossings: Point[] = [];
      for (let e = 0; e < 4; e++) {
        const a = corners[e];
        const b = corners[(e + 1) % 4];
        if ((a < SAFE_CONTOUR) !== (b < SAFE_CONTOUR)) {
          crossings.push(interp(a, b, points[e], points[(e + 1) % 4]));
        }
      }
      if (crossings.length === 2) {
        segments.push([crossings[0], crossings[1]]);
      }
    }
  }
  return segments;
}

function drawPolyline(
  ctx: CanvasRenderingContext2D,
  points: Point[],
  transform: Transform,
  style: string,
  width: number,
  dashed = false,
) {
  if (points.length < 2) return;
  ctx.save();
  ctx.strokeStyle = style;
  ctx.lineWidth = width;
  ctx.setLineDash(dashed ? [6, 4] : []);
  ctx.beginPath();
  const [x0, y0] = transform.toCanvas(points[0]);
  ctx.moveTo(x0, y0);
  for (const p of points.slice(1)) {
    const [x, y] = transform.toCanvas(p);
    ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.restore();
}

export function renderScene(
  canvas: HTMLCanvasElement,
  vm: ViewModel,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!vm.map) {
    ctx.fillStyle = "#888";
    ctx.fillText("waiting for map slice...", 20, 30);
    return;
  }
  const transform = makeTransform(vm.map, canvas.width, canvas.height);

  const [rows, cols] = vm.map.shape;
  const off = new OffscreenCanvas(cols, rows);
  const offCtx = off.getContext("2d") as OffscreenCanvasRenderingContext2D;
  offCtx.putImageData(heatmapImage(vm.map, vm.stale), 0, 0);
  ctx.imageSmoothingEnabled = true;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);

  ctx.save();
  ctx.strokeStyle = vm.stale ? "#999" : "#ffffff";
  ctx.lineWidth = 1.2;
  for (const [a, b] of safeContourSegments(vm.map)) {
    const [x0, y0] = transform.toCanvas(a);
    const [x1, y1] = transform.toCanvas(b);
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  }
  ctx.restore();

  drawPolyline(ctx, vm.ghost, transform, "rgba(255,255,255,0.45)", 1.5, true);
  drawPolyline(ctx, vm.planned, transform, "#ffffff", 2.0);
  drawPolyline(ctx, vm.executed, transform, "#1f77ff", 2.5);

  if (vm.executed.length > 0) {
    const [x, y] = transform.toCanvas(vm.executed[vm.executed.length - 1]);
    ctx.fillStyle = "#ff3030";
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
  if (vm.goal) {
    const [x, y] = transform.toCanvas(vm.goal);
    ctx.strokeStyle = "#ff30c0";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(x, y, 7, 0, 2 * Math.PI);
    ctx.stroke();
  }
}
