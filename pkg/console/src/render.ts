// Canvas painter: draws the scene primitives. All decisions about WHAT to
// draw live in scene.ts; this file only puts pixels down.

import type { Primitive, Scene } from "./scene.js";

const COLORS = {
  background: "#10151c",
  road: "#3d4a5c",
  building: "#5a6578",
  buildingEdge: "#707c92",
  area: "rgba(80, 140, 90, 0.18)",
  areaEdge: "#4f8c5a",
  route: "#c9a227",
  landing: "#7fd1b9",
  waypoint: "#9fb4cc",
  objectHidden: "rgba(200, 120, 120, 0.25)",
  objectFound: "#ff6b6b",
  ground: "#6bb3ff",
  aerial: "#d08bff",
  busyRing: "#ffd166",
  label: "#cdd7e4",
};

export function paintScene(ctx: CanvasRenderingContext2D, scene: Scene, w: number, h: number): void {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, w, h);
  for (const p of scene.primitives) {
    paintPrimitive(ctx, scene, p);
  }
}

function polyPath(ctx: CanvasRenderingContext2D, scene: Scene, polygon: [number, number][]): void {
  ctx.beginPath();
  polygon.forEach(([x, y], i) => {
    const [px, py] = scene.affine.toPx(x, y);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.closePath();
}

function paintPrimitive(ctx: CanvasRenderingContext2D, scene: Scene, p: Primitive): void {
  const { toPx } = scene.affine;
  switch (p.kind) {
    case "road": {
      const [x1, y1] = toPx(...p.from);
      const [x2, y2] = toPx(...p.to);
      ctx.strokeStyle = COLORS.road;
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
      break;
    }
    case "area": {
      polyPath(ctx, scene, p.polygon);
      ctx.fillStyle = COLORS.area;
      ctx.fill();
      ctx.strokeStyle = COLORS.areaEdge;
      ctx.lineWidth = 1;
      ctx.stroke();
      labelAtCentroid(ctx, scene, p.polygon, p.name);
      break;
    }
    case "building": {
      polyPath(ctx, scene, p.polygon);
      ctx.fillStyle = COLORS.building;
      ctx.fill();
      ctx.strokeStyle = COLORS.buildingEdge;
      ctx.stroke();
      break;
    }
    case "route": {
      ctx.strokeStyle = COLORS.route;
      ctx.lineWidth = 2;
      ctx.setLineDash([8, 6]);
      ctx.beginPath();
      p.points.forEach(([x, y], i) => {
        const [px, py] = toPx(x, y);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      });
      ctx.stroke();
      ctx.setLineDash([]);
      if (p.points.length > 0) {
        const [px, py] = toPx(...p.points[0]);
        ctx.fillStyle = COLORS.route;
        ctx.font = "11px sans-serif";
        ctx.fillText(`route ${p.name}`, px + 6, py - 6);
      }
      break;
    }
    case "landing": {
      const [px, py] = toPx(...p.at);
      ctx.strokeStyle = COLORS.landing;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.arc(px, py, 7, 0, Math.PI * 2);
      ctx.stroke();
      ctx.font = "9px sans-serif";
      ctx.fillStyle = COLORS.landing;
      ctx.fillText("H", px - 3, py + 3);
      break;
    }
    case "object": {
      const [px, py] = toPx(...p.at);
      ctx.fillStyle = p.discovered ? COLORS.objectFound : COLORS.objectHidden;
      ctx.beginPath();
      ctx.arc(px, py, 5, 0, Math.PI * 2);
      ctx.fill();
      if (p.discovered) {
        ctx.fillStyle = COLORS.label;
        ctx.font = "10px sans-serif";
        ctx.fillText(p.id, px + 7, py + 3);
      }
      break;
    }
    case "waypoint": {
      const [px, py] = toPx(...p.at);
      ctx.fillStyle = COLORS.waypoint;
      ctx.beginPath();
      ctx.arc(px, py, 3, 0, Math.PI * 2);
      ctx.fill();
      ctx.font = "10px sans-serif";
      ctx.fillText(p.name, px + 5, py - 4);
      break;
    }
    case "robot": {
      const [px, py] = toPx(...p.at);
      if (p.footprintRadius !== null && p.footprintRadius > 0) {
        ctx.strokeStyle = "rgba(208, 139, 255, 0.4)";
        ctx.lineWidth = 1;
        ctx.beginPath();
        ctx.arc(px, py, p.footprintRadius * scene.affine.scale, 0, Math.PI * 2);
        ctx.stroke();
      }
      ctx.save();
      ctx.translate(px, py);
      if (p.busy) {
        ctx.strokeStyle = COLORS.busyRing;
        ctx.beginPath();
        ctx.arc(0, 0, 11, 0, Math.PI * 2);
        ctx.stroke();
      }
      ctx.rotate(-p.headingRad);
      ctx.fillStyle = p.glyph === "ground" ? COLORS.ground : COLORS.aerial;
      ctx.beginPath();
      if (p.glyph === "ground") {
        ctx.rect(-7, -5, 14, 10); // rover box
      } else {
        ctx.moveTo(9, 0); // flyer arrow
        ctx.lineTo(-6, 6);
        ctx.lineTo(-3, 0);
        ctx.lineTo(-6, -6);
        ctx.closePath();
      }
      ctx.fill();
      ctx.restore();
      ctx.fillStyle = COLORS.label;
      ctx.font = "11px sans-serif";
      const badge = p.altitudeBadge ? ` ▲${p.altitudeBadge}` : "";
      ctx.fillText(`${p.name}${badge}`, px + 12, py + 4);
      break;
    }
  }
}

function labelAtCentroid(
  ctx: CanvasRenderingContext2D,
  scene: Scene,
  polygon: [number, number][],
  text: string,
): void {
  const cx = polygon.reduce((s, p) => s + p[0], 0) / polygon.length;
  const cy = polygon.reduce((s, p) => s + p[1], 0) / polygon.length;
  const [px, py] = scene.affine.toPx(cx, cy);
  ctx.fillStyle = COLORS.areaEdge;
  ctx.font = "10px sans-serif";
  ctx.fillText(text, px - text.length * 2.5, py);
}
