// Dual orthographic projection of the scene: top view (x-y) and side view
// (y-z).  Both task worlds are readable in these two projections, which keeps
// the console free of 3-D machinery.

import { ChainConfig, fkPoints, Vec3 } from "./chain.js";

export interface ViewBox {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export const TOP_VIEW: ViewBox = { xMin: -1.1, xMax: 1.1, yMin: -0.4, yMax: 1.1 };
export const SIDE_VIEW: ViewBox = { xMin: -0.4, xMax: 1.1, yMin: -0.05, yMax: 0.9 };

type Ctx = CanvasRenderingContext2D;

function project(
  box: ViewBox,
  w: number,
  h: number,
  u: number,
  v: number,
): [number, number] {
  const px = ((u - box.xMin) / (box.xMax - box.xMin)) * w;
  const py = h - ((v - box.yMin) / (box.yMax - box.yMin)) * h;
  return [px, py];
}

function polyline(ctx: Ctx, box: ViewBox, pts: Array<[number, number]>, color: string, width = 3) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  pts.forEach(([u, v], i) => {
    const [x, y] = project(box, ctx.canvas.width, ctx.canvas.height, u, v);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

export interface SceneInputs {
  chains: { left: ChainConfig; right: ChainConfig };
  jointPos: number[]; // 14
  world: Record<string, unknown> | null;
  collided: boolean;
  status: string;
}

export function armPoints(chains: SceneInputs["chains"], jointPos: number[]) {
  const left = fkPoints(chains.left, jointPos.slice(0, 7)).points;
  const right = fkPoints(chains.right, jointPos.slice(7, 14)).points;
  return { left, right };
}

export function renderScene(topCtx: Ctx, sideCtx: Ctx, scene: SceneInputs): void {
  for (const [ctx, box, planar] of [
    [topCtx, TOP_VIEW, true],
    [sideCtx, SIDE_VIEW, false],
  ] as Array<[Ctx, ViewBox, boolean]>) {
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    drawWorld(ctx, box, scene.world, planar);
    const { left, right } = armPoints(scene.chains, scene.jointPos);
    const pick = (p: Vec3): [number, number] => (planar ? [p[0], p[1]] : [p[1], p[2]]);
    const armColor = scene.collided ? "#ff5050" : "#7fd0ff";
    polyline(ctx, box, left.map(pick), armColor);
    polyline(ctx, box, right.map(pick), scene.collided ? "#ff5050" : "#ffd07f");
    ctx.fillStyle = "#c8d2dc";
    ctx.font = "12px monospace";
    ctx.fillText(scene.status, 8, 16);
  }
}

function drawWorld(
  ctx: Ctx,
  box: ViewBox,
  world: Record<string, unknown> | null,
  planar: boolean,
): void {
  if (!world) return;
  if (world.type === "gather_balls" && planar) {
    const tri = world.triangle as number[][] | undefined;
    if (tri) {
      polyline(
        ctx,
        box,
        [...tri, tri[0]].map((p) => [p[0], p[1]] as [number, number]),
        "#3b719f",
        2,
      );
    }
    const balls = (world.balls as number[][]) ?? [];
    ctx.fillStyle = "#e8e4da";
    for (const b of balls) {
      const [x, y] = project(box, ctx.canvas.width, ctx.canvas.height, b[0], b[1]);
      ctx.beginPath();
      ctx.arc(x, y, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  if (world.type === "curtained_shelf") {
    const disp = Number(world.curtain_displacement ?? 0);
    if (planar) {
      polyline(ctx, box, [[-0.42, 0.35], [0.42 - disp, 0.35]], "#9f8f3b", 2);
    } else {
      polyline(ctx, box, [[0.35, 0.0], [0.35, 0.75 - disp]], "#9f8f3b", 2);
    }
    const obj = world.object_pos as number[] | undefined;
    if (obj) {
      const [u, v] = planar ? [obj[0], obj[1]] : [obj[1], obj[2]];
      const [x, y] = project(box, ctx.canvas.width, ctx.canvas.height, u, v);
      ctx.fillStyle = world.grasped ? "#90e090" : "#e09090";
      ctx.fillRect(x - 5, y - 5, 10, 10);
    }
  }
}
