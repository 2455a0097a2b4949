// Pixel <-> position mapping for scan images.
//
// Two conventions coexist deliberately:
//  - "field" coordinates are what the operator reads: origin at the image
//    corner, pixel (row, col) at (col * pitch, row * pitch), so pixel
//    (50, 50) of the default 20 um / 100 px scan reads (10.0, 10.0) um.
//  - "stage" coordinates are what the instrument speaks: origin at the
//    actuator center, pixel centers at (col + 0.5) * pitch - extent / 2.
// Display uses field; every API call uses stage.

export interface ScanGeometry {
  extentUm: [number, number];
  resolution: [number, number]; // [nx, ny]
}

export function pixelPitch(geom: ScanGeometry): [number, number] {
  return [geom.extentUm[0] / geom.resolution[0], geom.extentUm[1] / geom.resolution[1]];
}

export function pixelToField(geom: ScanGeometry, row: number, col: number): [number, number] {
  const [px, py] = pixelPitch(geom);
  return [col * px, row * py];
}

export function pixelToStage(geom: ScanGeometry, row: number, col: number): [number, number] {
  const [px, py] = pixelPitch(geom);
  return [(col + 0.5) * px - geom.extentUm[0] / 2, (row + 0.5) * py - geom.extentUm[1] / 2];
}

export function stageToPixel(geom: ScanGeometry, x: number, y: number): [number, number] {
  const [px, py] = pixelPitch(geom);
  return [(y + geom.extentUm[1] / 2) / py - 0.5, (x + geom.extentUm[0] / 2) / px - 0.5];
}

/** Clamp a stage position to the scanned extent (selection invariant). */
export function clampToExtent(geom: ScanGeometry, x: number, y: number): [number, number] {
  const hx = geom.extentUm[0] / 2;
  const hy = geom.extentUm[1] / 2;
  return [Math.min(Math.max(x, -hx), hx), Math.min(Math.max(y, -hy), hy)];
}

/** Canvas click offset (0..1 in each axis) to integer pixel indices. */
export function canvasFractionToPixel(
  geom: ScanGeometry,
  fx: number,
  fy: number,
): [number, number] {
  const [nx, ny] = geom.resolution;
  const col = Math.min(nx - 1, Math.max(0, Math.floor(fx * nx)));
  const row = Math.min(ny - 1, Math.max(0, Math.floor(fy * ny)));
  return [row, col];
}
