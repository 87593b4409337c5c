import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import {
  ellipseFromCov,
  orbitBasis,
  orbitProject,
  parseCalibration,
  projectCovariance,
  projectPoint,
} from "../src/geometry";
import type { OrbitCamera } from "../src/geometry";
import type { Point3, ViewDoc } from "../src/types";

const FIXTURES = join(__dirname, "fixtures");
const views = parseCalibration(readFileSync(join(FIXTURES, "calibration_fixture_a.json"), "utf-8"));
const cam1 = views[0];
const cam2 = views[1];

// first waypoint mean of the recorded golden plan
const MU0: Point3 = [0.09864957569850323, -0.14578232340069922, 1.1006386101502312];

describe("projectPoint", () => {
  it("matches the service projector in the identity view", () => {
    expect(projectPoint(cam1, [0, 0, 1])).toEqual([50, 50]);
    expect(projectPoint(cam1, [1, 0, 1])).toEqual([150, 50]);
    const p = projectPoint(cam1, [0.02, -0.04, 0.9])!;
    expect(p[0]).toBeCloseTo(52.22222222222222, 12);
    expect(p[1]).toBeCloseTo(45.55555555555556, 12);
    const m = projectPoint(cam1, MU0)!;
    expect(m[0]).toBeCloseTo(58.962939768671035, 12);
    expect(m[1]).toBeCloseTo(36.754751100290704, 12);
  });

  it("matches the service projector in the rotated view", () => {
    expect(projectPoint(cam2, [0, 0, 1])).toEqual([50, 50]);
    const p = projectPoint(cam2, [0.02, -0.04, 0.9])!;
    expect(p[0]).toBeCloseTo(39.79591836734694, 12);
    expect(p[1]).toBeCloseTo(45.91836734693877, 12);
    const m = projectPoint(cam2, MU0)!;
    expect(m[0]).toBeCloseTo(61.16531455878787, 12);
    expect(m[1]).toBeCloseTo(33.82623234313408, 12);
  });

  it("returns null at or behind the camera", () => {
    // this world point sits exactly at the second camera's center
    expect(projectPoint(cam2, [1, 0, 1])).toBeNull();
    expect(projectPoint(cam1, [0, 0, -1])).toBeNull();
    expect(projectPoint(cam1, [0.5, 0.5, 0])).toBeNull();
  });
});

describe("parseCalibration", () => {
  it("accepts a bare list or a views wrapper", () => {
    expect(views).toHaveLength(2);
    expect(cam1.id).toBe("cam1");
    const wrapped = parseCalibration(JSON.stringify({ views }));
    expect(wrapped).toHaveLength(2);
    expect(wrapped[1].id).toBe("cam2");
  });

  it("rejects documents without a view list", () => {
    expect(() => parseCalibration('{"views": 3}')).toThrow(/views/);
  });
});

describe("orbit camera", () => {
  const cam: OrbitCamera = { yaw: 0, pitch: 0, zoom: 100, target: [0, 0, 0] };

  it("keeps the basis orthonormal for any angles", () => {
    for (const [yaw, pitch] of [
      [0, 0],
      [0.7, 0.5],
      [-2.1, 1.2],
      [3.0, -0.9],
    ]) {
      const { right, up, forward } = orbitBasis({ ...cam, yaw, pitch });
      const dot = (a: Point3, b: Point3) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
      expect(dot(right, up)).toBeCloseTo(0, 12);
      expect(dot(right, forward)).toBeCloseTo(0, 12);
      expect(dot(up, forward)).toBeCloseTo(0, 12);
      expect(dot(right, right)).toBeCloseTo(1, 12);
      expect(dot(up, up)).toBeCloseTo(1, 12);
    }
  });

  it("projects the target to the origin and scales with zoom", () => {
    const at = orbitProject(cam, [0, 0, 0]);
    expect(at.x).toBeCloseTo(0, 12);
    expect(at.y).toBeCloseTo(0, 12);
    const off = orbitProject(cam, [0, 1, 0]);
    expect(Math.hypot(off.x, off.y)).toBeCloseTo(100, 9);
    const zoomed = orbitProject({ ...cam, zoom: 200 }, [0, 1, 0]);
    expect(Math.hypot(zoomed.x, zoomed.y)).toBeCloseTo(200, 9);
  });

  it("orders depth along the viewing direction", () => {
    const near = orbitProject(cam, [-1, 0, 0]);
    const far = orbitProject(cam, [1, 0, 0]);
    expect(far.depth).toBeGreaterThan(near.depth);
  });
});

describe("covariance projection", () => {
  it("an identity basis picks out the top-left block", () => {
    const sigma = [4, 1, 0, 1, 9, 0, 0, 0, 25];
    const cov = projectCovariance(sigma, [1, 0, 0], [0, 1, 0]);
    expect(cov).toEqual([4, 1, 1, 9]);
  });

  it("zero covariance degenerates to a point", () => {
    const e = ellipseFromCov([0, 0, 0, 0]);
    expect(e.rx).toBe(0);
    expect(e.ry).toBe(0);
  });

  it("diagonal covariance gives axis-aligned radii", () => {
    const e = ellipseFromCov([9, 0, 0, 4]);
    expect(e.rx).toBeCloseTo(3, 12);
    expect(e.ry).toBeCloseTo(2, 12);
    expect(Math.abs(Math.sin(e.angle))).toBeCloseTo(0, 12);
  });

  it("recovers the eigenvalues of a correlated covariance", () => {
    // [[2,1],[1,2]] has eigenvalues 3 and 1, major axis at 45 degrees
    const e = ellipseFromCov([2, 1, 1, 2]);
    expect(e.rx).toBeCloseTo(Math.sqrt(3), 12);
    expect(e.ry).toBeCloseTo(1, 12);
    expect(Math.abs(Math.cos(2 * e.angle))).toBeCloseTo(0, 9);
  });
});
