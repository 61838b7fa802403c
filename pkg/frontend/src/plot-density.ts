#!/usr/bin/env node
import { renderDensityMatrix } from "./density.js";
import { runScript } from "./cli.js";

const USAGE = "usage: plot-density --in rho.json --out rho.svg [--dpi N] [--max-level N]";

runScript(process.argv.slice(2), USAGE, (text, args) =>
  renderDensityMatrix(text, {
    dpi: args.dpi,
    maxLevel: args.extra.has("max-level") ? Number(args.extra.get("max-level")) : undefined,
  }),
);
