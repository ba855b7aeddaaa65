/** Orbit camera state and the wire encoding the service expects. */

export interface OrbitState {
  azimuth: number;   // degrees
  elevation: number; // degrees
  radius: number;
  width: number;
  height: number;
  fov?: number;      // degrees, default 50
}

export interface CameraJson {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
  near: number;
  world_to_camera: number[]; // row-major 3x4
}

type Vec3 = [number, number, number];

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function norm(a: Vec3): number {
  return Math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

/** Mirror of the server's orbit camera construction (y-down image plane). */
export function orbitCamera(state: OrbitState): CameraJson {
  const az = (state.azimuth * Math.PI) / 180;
  const el = (state.elevation * Math.PI) / 180;
  const eye: Vec3 = [
    state.radius * Math.cos(el) * Math.sin(az),
    state.radius * Math.sin(el),
    state.radius * Math.cos(el) * Math.cos(az),
  ];
  const fwd = scale(sub([0, 0, 0], eye), 1 / state.radius);
  let up: Vec3 = [0, 1, 0];
  let right = cross(fwd, up);
  if (norm(right) < 1e-9) {
    up = [0, 0, 1];
    right = cross(fwd, up);
  }
  right = scale(right, 1 / norm(right));
  const down = cross(fwd, right);
  const rows = [right, down, fwd];
  const w2c: number[] = [];
  for (const row of rows) {
    const t = -(row[0] * eye[0] + row[1] * eye[1] + row[2] * eye[2]);
    w2c.push(row[0], row[1], row[2], t);
  }
  const fov = state.fov ?? 50;
  const f = (0.5 * state.width) / Math.tan((fov * Math.PI) / 360);
  return {
    fx: f,
    fy: f,
    cx: state.width / 2,
    cy: state.height / 2,
    width: state.width,
    height: state.height,
    near: 0.05,
    world_to_camera: w2c,
  };
}

/** Base64 of the camera JSON, as the `cam` query parameter. */
export function encodeCamera(cam: CameraJson): string {
  const json = JSON.stringify(cam);
  if (typeof btoa === "function") return btoa(json);
  return Buffer.from(json, "utf-8").toString("base64");
}

export function encodeOrbit(state: OrbitState): string {
  return encodeCamera(orbitCamera(state));
}
